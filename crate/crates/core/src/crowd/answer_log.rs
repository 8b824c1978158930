//! Append-only JSON-lines answer log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::crowd::aggregate::WorkerAnswer;
use crate::error::{Error, Result};

/// Single-writer append handle. Every append is one `write_all` of a
/// complete line followed by a flush.
#[derive(Debug)]
pub struct AnswerLog {
    path: PathBuf,
    file: File,
}

impl AnswerLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(AnswerLog { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, answer: &WorkerAnswer) -> Result<()> {
        let mut line = serde_json::to_vec(answer)?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// Replays a log. A final line without a newline is a torn write and is
/// skipped with a warning; any other malformed line is an error.
pub fn read_answers(path: impl AsRef<Path>) -> Result<Vec<WorkerAnswer>> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<WorkerAnswer>(line.trim_end()) {
            Ok(a) => out.push(a),
            Err(_) if !line.ends_with('\n') => {
                log::warn!("{}:{line_no}: ignoring truncated final record", path.display());
            }
            Err(e) => return Err(Error::parse(path.display().to_string(), line_no, e.to_string())),
        }
    }
    Ok(out)
}

pub fn write_answers(answers: &[WorkerAnswer], mut out: impl Write) -> Result<()> {
    for a in answers {
        serde_json::to_writer(&mut out, a)?;
        out.write_all(b"\n").map_err(|e| Error::io("<answers>", e))?;
    }
    Ok(())
}

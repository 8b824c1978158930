//! HIT dispatch state behind the task service.
//!
//! A HIT is handed out until `assignments_required` distinct workers have
//! answered it, never twice to the same worker. Accepted answers go to the
//! log before the in-memory state changes, so reopening a store on an
//! existing log restores it exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::crowd::aggregate::WorkerAnswer;
use crate::crowd::hits::Hit;
use crate::crowd::answer_log::{read_answers, AnswerLog};
use crate::error::{Error, Result};

#[derive(Debug)]
pub enum SubmitError {
    /// The worker already answered this HIT, or it is complete.
    Conflict(String),
    /// Unknown HIT or selections outside the HIT.
    Invalid(String),
    Storage(Error),
}

impl std::fmt::Display for SubmitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubmitError::Conflict(m) | SubmitError::Invalid(m) => f.write_str(m),
            SubmitError::Storage(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SubmitError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub hits_total: usize,
    pub hits_complete: usize,
    pub answers: usize,
}

#[derive(Debug)]
pub struct TaskStore {
    hits: Vec<Hit>,
    by_id: BTreeMap<String, usize>,
    workers: Vec<BTreeSet<String>>,
    answers: usize,
    log: AnswerLog,
}

impl TaskStore {
    /// Opens the store, replaying any answers already in the log.
    pub fn open(hits: Vec<Hit>, log_path: impl AsRef<Path>) -> Result<Self> {
        let by_id: BTreeMap<String, usize> = hits.iter().enumerate().map(|(i, h)| (h.id.clone(), i)).collect();
        if by_id.len() != hits.len() {
            return Err(Error::InvalidArgument("duplicate HIT ids".into()));
        }
        let mut workers = vec![BTreeSet::new(); hits.len()];
        let mut answers = 0;
        for a in read_answers(log_path.as_ref())? {
            let Some(&i) = by_id.get(&a.hit_id) else {
                log::warn!("log entry for unknown HIT {}", a.hit_id);
                continue;
            };
            if workers[i].insert(a.worker_id.clone()) {
                answers += 1;
            }
        }
        let log = AnswerLog::open(log_path)?;
        Ok(TaskStore {
            hits,
            by_id,
            workers,
            answers,
            log,
        })
    }

    pub fn hits(&self) -> &[Hit] {
        &self.hits
    }

    fn complete(&self, i: usize) -> bool {
        self.workers[i].len() >= self.hits[i].assignments_required
    }

    /// First incomplete HIT this worker has not answered yet.
    pub fn next_for(&self, worker_id: &str) -> Option<&Hit> {
        (0..self.hits.len())
            .find(|&i| !self.complete(i) && !self.workers[i].contains(worker_id))
            .map(|i| &self.hits[i])
    }

    pub fn submit(&mut self, mut answer: WorkerAnswer) -> std::result::Result<(), SubmitError> {
        let &i = self
            .by_id
            .get(&answer.hit_id)
            .ok_or_else(|| SubmitError::Invalid(format!("unknown HIT {:?}", answer.hit_id)))?;
        answer
            .validate(&self.hits[i])
            .map_err(|e| SubmitError::Invalid(e.to_string()))?;
        if self.workers[i].contains(&answer.worker_id) {
            return Err(SubmitError::Conflict(format!(
                "worker {} already answered {}",
                answer.worker_id, answer.hit_id
            )));
        }
        if self.complete(i) {
            return Err(SubmitError::Conflict(format!("HIT {} is complete", answer.hit_id)));
        }
        if answer.submitted_at == 0 {
            answer.submitted_at = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0);
        }
        self.log.append(&answer).map_err(SubmitError::Storage)?;
        self.workers[i].insert(answer.worker_id);
        self.answers += 1;
        Ok(())
    }

    pub fn progress(&self) -> Progress {
        Progress {
            hits_total: self.hits.len(),
            hits_complete: (0..self.hits.len()).filter(|&i| self.complete(i)).count(),
            answers: self.answers,
        }
    }

    pub fn is_done(&self) -> bool {
        let p = self.progress();
        p.hits_complete == p.hits_total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowd::hits::HitInstance;

    fn hits() -> Vec<Hit> {
        (1..=2)
            .map(|n| Hit {
                id: format!("big-city/{n:03}"),
                property: "big".into(),
                class: "City".into(),
                instances: (0..5)
                    .map(|i| HitInstance {
                        id: format!("c{n}{i}"),
                        display_properties: Default::default(),
                    })
                    .collect(),
                candidate_properties: vec!["population".into()],
                assignments_required: 5,
            })
            .collect()
    }

    fn answer(hit: &str, worker: &str, inst: &[&str]) -> WorkerAnswer {
        WorkerAnswer {
            hit_id: hit.into(),
            worker_id: worker.into(),
            selected_instances: inst.iter().map(|s| s.to_string()).collect(),
            selected_properties: vec![],
            submitted_at: 0,
        }
    }

    #[test]
    fn dispatch_until_complete() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = TaskStore::open(hits(), dir.path().join("log.jsonl")).unwrap();
        assert_eq!(store.next_for("w0").unwrap().id, "big-city/001");
        for w in 0..5 {
            store.submit(answer("big-city/001", &format!("w{w}"), &["c10"])).unwrap();
        }
        assert_eq!(store.next_for("w9").unwrap().id, "big-city/002");
        assert_eq!(store.next_for("w0").unwrap().id, "big-city/002");
        let p = store.progress();
        assert_eq!((p.hits_total, p.hits_complete, p.answers), (2, 1, 5));
        assert!(matches!(
            store.submit(answer("big-city/001", "w7", &[])),
            Err(SubmitError::Conflict(_))
        ));
    }

    #[test]
    fn rejects_duplicates_and_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = TaskStore::open(hits(), dir.path().join("log.jsonl")).unwrap();
        store.submit(answer("big-city/001", "w1", &[])).unwrap();
        assert!(matches!(store.submit(answer("big-city/001", "w1", &[])), Err(SubmitError::Conflict(_))));
        assert!(matches!(store.submit(answer("big-city/001", "w2", &["zzz"])), Err(SubmitError::Invalid(_))));
        assert!(matches!(store.submit(answer("nope", "w2", &[])), Err(SubmitError::Invalid(_))));
        assert_eq!(store.progress().answers, 1);
    }

    #[test]
    fn reopen_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        {
            let mut store = TaskStore::open(hits(), &path).unwrap();
            for w in 0..5 {
                store.submit(answer("big-city/001", &format!("w{w}"), &[])).unwrap();
            }
            store.submit(answer("big-city/002", "w0", &[])).unwrap();
        }
        let store = TaskStore::open(hits(), &path).unwrap();
        assert_eq!(store.progress().answers, 6);
        assert_eq!(store.progress().hits_complete, 1);
        assert!(store.next_for("w0").is_none());
        assert_eq!(read_answers(&path).unwrap().len(), 6);
    }
}

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use opinionkb_cli::PipelineConfig;

pub const CITY_CORPUS: &str = "\
Tokyo/NOUN is/VERB a/DET big/ADJ city/NOUN ./OTHER
Shanghai/NOUN is/VERB a/DET very/ADV big/ADJ city/NOUN ./OTHER
Lagos/NOUN is/VERB a/DET large/ADJ city/NOUN ./OTHER
";

pub const CITY_SCENARIO: &str = "\
[\"big@City\"]
truth_predicate = \"population\"
threshold = 0.7
threshold_kind = \"quantile\"
direction = \"above\"
relevant_properties = [\"population\"]
noise = 0.1

[\"large@City\"]
truth_predicate = \"population\"
threshold = 0.7
threshold_kind = \"quantile\"
direction = \"above\"
relevant_properties = [\"population\"]
noise = 0.1
";

/// Writes a 500-city simulate-mode fixture into `dir` and returns its config path.
pub fn city_fixture(dir: &Path, extra: &str) -> PathBuf {
    std::fs::write(dir.join("kb.tsv"), opinionkb::synthetic::city_kb(500, 17)).unwrap();
    std::fs::write(dir.join("corpus.txt"), CITY_CORPUS).unwrap();
    std::fs::write(dir.join("lexicon.tsv"), "big\tlarge\tsyn\n").unwrap();
    std::fs::write(dir.join("scenario.toml"), CITY_SCENARIO).unwrap();
    let cfg = dir.join("pipeline.toml");
    std::fs::write(
        &cfg,
        format!(
            "kb = \"kb.tsv\"\ncorpus = \"corpus.txt\"\nlexicon = \"lexicon.tsv\"\nscenario = \"scenario.toml\"\n\
             seed = 7\nsample_budget = 200\nclassifier = \"decision_tree\"\n{extra}"
        ),
    )
    .unwrap();
    cfg
}

pub fn load(path: &Path) -> PipelineConfig {
    PipelineConfig::load(path).unwrap()
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

mod common;

use std::process::Command;

use opinionkb::crowd::hits::read_hits;
use opinionkb_cli::pipeline::{hits_by_pair, read_models, HITS, MANIFEST, MODELS, RAW_PAIRS};
use opinionkb_cli::report::report;
use opinionkb_cli::{Pipeline, Stage};

#[test]
fn forty_hits_per_pair_and_cost() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::load(&common::city_fixture(dir.path(), ""));
    let out = dir.path().join("run");
    let mut p = Pipeline::new(cfg.clone(), &out).unwrap();
    let manifest = p.run().unwrap();
    assert_eq!(manifest.artifacts.len(), 13);
    let hits = read_hits(out.join(HITS)).unwrap();
    let grouped = hits_by_pair(&hits);
    assert_eq!(grouped.keys().collect::<Vec<_>>(), vec!["big@City", "large@City"]);
    for h in grouped.values() {
        assert_eq!(h.len(), 40);
        assert!(h.iter().all(|h| h.instances.len() == 5 && h.assignments_required == 5));
    }
    let r = report(&cfg, &out).unwrap();
    for section in ["== Selection ==", "== Classifiers ==", "== Inference ==", "== Cost =="] {
        assert!(r.text.contains(section), "{section}");
    }
    assert!(r.text.contains("$6.00"));
    assert!(r.text.contains("$12.00"));
    assert!(r.tsv.contains("big@City\t40\t6.00"));
}

#[test]
fn resume_reruns_from_first_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::load(&common::city_fixture(dir.path(), ""));
    let out = dir.path().join("run");
    let first = Pipeline::new(cfg.clone(), &out).unwrap().run().unwrap();
    let raw_before = std::fs::metadata(out.join(RAW_PAIRS)).unwrap().modified().unwrap();
    std::fs::remove_file(out.join(MODELS)).unwrap();
    let mut p = Pipeline::new(cfg, &out).unwrap();
    assert!(p.is_complete(Stage::Aggregate));
    assert!(!p.is_complete(Stage::Train));
    let second = p.run().unwrap();
    assert_eq!(first, second);
    assert_eq!(std::fs::metadata(out.join(RAW_PAIRS)).unwrap().modified().unwrap(), raw_before);
    assert_eq!(read_models(&out.join(MODELS)).unwrap().len(), 2);
}

#[test]
fn partial_answer_log_is_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::load(&common::city_fixture(dir.path(), ""));
    let out = dir.path().join("run");
    let first = Pipeline::new(cfg.clone(), &out).unwrap().run().unwrap();
    let answers = out.join("answers.jsonl");
    let text = std::fs::read_to_string(&answers).unwrap();
    let half: String = text.lines().take(100).map(|l| format!("{l}\n")).collect();
    std::fs::write(&answers, half).unwrap();
    let mut p = Pipeline::new(cfg, &out).unwrap();
    assert!(!p.is_complete(Stage::Answers));
    assert_eq!(p.run().unwrap(), first);
}

#[test]
fn seeds_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::load(&common::city_fixture(dir.path(), ""));
    let a = Pipeline::new(cfg.clone(), dir.path().join("a")).unwrap().run().unwrap();
    cfg.seed += 1;
    let b = Pipeline::new(cfg, dir.path().join("b")).unwrap().run().unwrap();
    assert_ne!(a, b);
}

#[test]
fn missing_lexicon_fails_before_any_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = common::city_fixture(dir.path(), "");
    std::fs::remove_file(dir.path().join("lexicon.tsv")).unwrap();
    let out = dir.path().join("run");
    let err = Pipeline::new(common::load(&cfg_path), &out).unwrap().run().unwrap_err();
    assert!(err.to_string().contains("lexicon"), "{err}");
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 0);
}

#[test]
fn binary_runs_stages_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::city_fixture(dir.path(), "k = 1\nalgo = \"fgreedy\"\n");
    let out = dir.path().join("run");
    let bin = env!("CARGO_BIN_EXE_opinionkb");
    let run = |args: &[&str]| {
        let o = Command::new(bin)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(args)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    for stage in ["extract", "map", "graph", "select", "sample", "hits", "simulate", "aggregate", "train", "apply", "infer", "enrich"] {
        run(&[stage]);
    }
    assert!(out.join(MANIFEST).is_file());
    let selection = std::fs::read_to_string(out.join("selection.tsv")).unwrap();
    assert!(selection.starts_with("rank\tpair\tweight_degree\n1\tbig@City\t500\n"), "{selection}");
    let text = run(&["report"]);
    assert!(text.contains("large@City"));
    let tsv = run(&["report", "--tsv"]);
    assert!(tsv.contains("# cost"));

    let graph = out.join("graph.tsv");
    let o = Command::new(bin)
        .args(["select", "--algo", "exact", "--k", "2", "--graph"])
        .arg(&graph)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("#induced_weight\t500"));
}

#[test]
fn bundled_sample_config_validates() {
    let cfg = common::load(&common::data_dir().join("pipeline.toml"));
    cfg.validate().unwrap();
    assert_eq!(cfg.k, 5);
}

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use anyhow::Result;
use opinionkb::crowd::hits::read_hits;
use opinionkb::crowd::{cost, ScenarioSpec};
use opinionkb::inference::{FactSource, SubjectiveFact};
use opinionkb::resemble::STGraph;
use opinionkb::scalar::fraction_to_f64;
use opinionkb::selection::{selection_report, Algorithm, EXACT_LIMIT};
use opinionkb::{KnowledgeBase, STPair};

use crate::config::{Mode, PipelineConfig};
use crate::pipeline::{hits_by_pair, read_inference, read_models, run_selection, GRAPH, HITS, INFERENCE, MODELS};

pub struct Report {
    pub tsv: String,
    pub text: String,
}

const GAP: &str = "-";

fn pct(x: Option<f64>) -> String {
    x.map_or(GAP.to_string(), |v| format!("{v:.3}"))
}

/// Fraction of `facts` whose label matches `truth`; facts without a truth
/// entry are skipped.
pub fn fact_accuracy<'a>(facts: impl IntoIterator<Item = &'a SubjectiveFact>, truth: &BTreeMap<String, bool>) -> Option<f64> {
    let (mut hit, mut n) = (0usize, 0usize);
    for f in facts {
        if let Some(&t) = truth.get(&f.entity) {
            n += 1;
            if t == f.label {
                hit += 1;
            }
        }
    }
    (n > 0).then(|| hit as f64 / n as f64)
}

pub fn report(cfg: &PipelineConfig, dir: &Path) -> Result<Report> {
    let mut tsv = String::new();
    let mut text = String::new();

    text.push_str("== Selection ==\n");
    tsv.push_str("# selection\n");
    match STGraph::read_tsv(dir.join(GRAPH)) {
        Ok(g) => {
            let mut algos = vec![Algorithm::Random, Algorithm::FGreedy, Algorithm::BGreedy, Algorithm::DivFGreedy];
            if g.len() <= EXACT_LIMIT {
                algos.push(Algorithm::Exact);
            }
            let mut rows = Vec::new();
            for a in algos {
                match run_selection(&g, a, cfg.k, cfg.delta, cfg.seed) {
                    Ok(r) => rows.push((a.name().to_string(), cfg.k, r)),
                    Err(e) => log::warn!("{}: {e}", a.name()),
                }
            }
            let (t, table) = selection_report(&rows);
            tsv.push_str(&t);
            text.push_str(&table);
        }
        Err(_) => {
            tsv.push_str("missing\n");
            text.push_str("(graph missing)\n");
        }
    }

    text.push_str("\n== Classifiers ==\n");
    tsv.push_str("# classifiers\npair\tfeatures\tlabelled\tpositives\tcv_accuracy\n");
    match read_models(&dir.join(MODELS)) {
        Ok(models) => {
            let _ = writeln!(text, "{:<24} {:>9} {:>9} {:>9} {:>8}", "pair", "features", "labelled", "positive", "cv_acc");
            for m in &models {
                let _ = writeln!(tsv, "{}\t{}\t{}\t{}\t{}", m.pair, m.features.join(","), m.labelled, m.positives, pct(m.cv_accuracy));
                let _ = writeln!(
                    text,
                    "{:<24} {:>9} {:>9} {:>9} {:>8}",
                    m.pair,
                    m.features.len(),
                    m.labelled,
                    m.positives,
                    pct(m.cv_accuracy)
                );
            }
        }
        Err(_) => text.push_str("(models missing)\n"),
    }

    text.push_str("\n== Inference ==\n");
    tsv.push_str("# inference\npair\tseed_facts\tinferred_facts\tseed_accuracy\tinferred_accuracy\n");
    match read_inference(&dir.join(INFERENCE)) {
        Ok(out) => {
            let truths = scenario_truths(cfg, &out.facts);
            let mut by_pair: BTreeMap<STPair, (Vec<&SubjectiveFact>, Vec<&SubjectiveFact>)> = BTreeMap::new();
            for f in &out.facts {
                let e = by_pair.entry(f.pair.clone()).or_default();
                if f.source == FactSource::Inference {
                    e.1.push(f);
                } else {
                    e.0.push(f);
                }
            }
            let _ = writeln!(text, "{:<24} {:>10} {:>10} {:>9} {:>9}", "pair", "seed", "inferred", "seed_acc", "inf_acc");
            for (pair, (seeds, derived)) in &by_pair {
                let truth = truths.get(pair);
                let sa = truth.and_then(|t| fact_accuracy(seeds.iter().copied(), t));
                let ia = truth.and_then(|t| fact_accuracy(derived.iter().copied(), t));
                let _ = writeln!(tsv, "{}\t{}\t{}\t{}\t{}", pair.id(), seeds.len(), derived.len(), pct(sa), pct(ia));
                let _ = writeln!(
                    text,
                    "{:<24} {:>10} {:>10} {:>9} {:>9}",
                    pair.id(),
                    seeds.len(),
                    derived.len(),
                    pct(sa),
                    pct(ia)
                );
            }
            let _ = writeln!(
                text,
                "total: {} seed, {} inferred, {} conflicts",
                out.report.seed_count, out.report.inferred_count, out.report.conflict_count
            );
        }
        Err(_) => text.push_str("(inference missing)\n"),
    }

    text.push_str("\n== Cost ==\n");
    tsv.push_str("# cost\npair\thits\tcost\n");
    match (read_hits(dir.join(HITS)), cfg.cost_model()) {
        (Ok(hits), Ok(model)) => {
            let mut total = opinionkb::Fraction::from_integer(0);
            for (pair, h) in hits_by_pair(&hits) {
                let c = cost(&h, &model)?;
                total += c;
                let _ = writeln!(tsv, "{pair}\t{}\t{:.2}", h.len(), fraction_to_f64(c));
                let _ = writeln!(text, "{pair:<24} {:>5} HITs  ${:.2}", h.len(), fraction_to_f64(c));
            }
            let _ = writeln!(tsv, "total\t{}\t{:.2}", hits.len(), fraction_to_f64(total));
            let _ = writeln!(text, "{:<24} {:>5} HITs  ${:.2}", "total", hits.len(), fraction_to_f64(total));
        }
        _ => text.push_str("(hits missing)\n"),
    }
    Ok(Report { tsv, text })
}

/// Scenario truth per pair, in simulate mode only.
fn scenario_truths(cfg: &PipelineConfig, facts: &[SubjectiveFact]) -> BTreeMap<STPair, BTreeMap<String, bool>> {
    let mut out = BTreeMap::new();
    if cfg.mode != Mode::Simulate {
        return out;
    }
    let Some(Ok(spec)) = cfg.scenario.as_ref().map(ScenarioSpec::load) else {
        return out;
    };
    let Ok(kb) = KnowledgeBase::load(&cfg.kb) else {
        return out;
    };
    for f in facts {
        if out.contains_key(&f.pair) {
            continue;
        }
        if let Ok(s) = spec.for_pair(&f.pair) {
            if let Ok(t) = s.truth(&kb, &f.pair.class) {
                out.insert(f.pair.clone(), t);
            }
        }
    }
    out
}

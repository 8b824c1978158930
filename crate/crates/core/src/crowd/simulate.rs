//! Simulated crowd workers answering HITs from a ground-truth scenario.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crowd::aggregate::WorkerAnswer;
use crate::crowd::hits::Hit;
use crate::error::{Error, Result};
use crate::extraction::STPair;
use crate::kb::KnowledgeBase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    /// `threshold` is a raw property value.
    #[default]
    Value,
    /// `threshold` is a quantile in [0, 1] of the type's value population.
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Above,
    Below,
}

/// Ground truth and worker behaviour for one ST pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScenario {
    /// Numeric property that decides the truth.
    pub truth_predicate: String,
    pub threshold: f64,
    #[serde(default)]
    pub threshold_kind: ThresholdKind,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default)]
    pub relevant_properties: Vec<String>,
    /// Independent flip probability for every selection, in [0, 0.5).
    #[serde(default)]
    pub noise: f64,
}

impl PairScenario {
    /// Truth label of every instance of `class` (missing values are `false`).
    pub fn truth(&self, kb: &KnowledgeBase, class: &str) -> Result<BTreeMap<String, bool>> {
        let members = kb.instances_of(class, true)?;
        let value = |e: &str| kb.values(e, &self.truth_predicate).iter().find_map(|v| v.numeric);
        let cut = match self.threshold_kind {
            ThresholdKind::Value => self.threshold,
            ThresholdKind::Quantile => {
                let mut values: Vec<f64> = members.iter().filter_map(|e| value(e)).collect();
                if values.is_empty() {
                    return Err(Error::Config(format!(
                        "no numeric {} values on instances of {class}",
                        self.truth_predicate
                    )));
                }
                values.sort_by(f64::total_cmp);
                let q = self.threshold.clamp(0.0, 1.0);
                // nearest-rank quantile
                let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
                values[rank - 1]
            }
        };
        Ok(members
            .iter()
            .map(|e| {
                let label = match (value(e), self.direction) {
                    (Some(v), Direction::Above) => v > cut,
                    (Some(v), Direction::Below) => v < cut,
                    (None, _) => false,
                };
                (e.clone(), label)
            })
            .collect())
    }

    fn validate(&self, pair: &str) -> Result<()> {
        if self.truth_predicate.is_empty() {
            return Err(Error::Config(format!("scenario for {pair} has no truth_predicate")));
        }
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::Config(format!("noise for {pair} must lie in [0, 0.5), got {}", self.noise)));
        }
        if self.threshold_kind == ThresholdKind::Quantile && !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("quantile threshold for {pair} must lie in [0, 1]")));
        }
        Ok(())
    }
}

/// Scenario file: one TOML table per ST pair id, e.g. `["big@City"]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScenarioSpec {
    pub pairs: BTreeMap<String, PairScenario>,
}

impl ScenarioSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        for (pair, s) in &spec.pairs {
            s.validate(pair)?;
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn for_pair(&self, pair: &STPair) -> Result<&PairScenario> {
        self.pairs
            .get(&pair.id())
            .ok_or_else(|| Error::Config(format!("scenario has no truth predicate for {}", pair.id())))
    }
}

pub fn worker_id(slot: usize) -> String {
    format!("sim-{slot:02}")
}

/// Answers every HIT with `assignments_required` simulated workers. Each
/// instance's true label and each property's relevance is flipped
/// independently with the scenario's noise rate. Deterministic under `seed`.
pub fn simulate_workers(hits: &[Hit], scenario: &ScenarioSpec, kb: &KnowledgeBase, seed: u64) -> Result<Vec<WorkerAnswer>> {
    let mut truths: BTreeMap<String, (BTreeMap<String, bool>, &PairScenario)> = BTreeMap::new();
    for hit in hits {
        let pair = hit.st_pair();
        if let std::collections::btree_map::Entry::Vacant(slot) = truths.entry(pair.id()) {
            let s = scenario.for_pair(&pair)?;
            slot.insert((s.truth(kb, &pair.class)?, s));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(hits.len() * 5);
    for (h, hit) in hits.iter().enumerate() {
        let (truth, s) = &truths[&hit.st_pair().id()];
        let relevant: BTreeSet<&str> = s.relevant_properties.iter().map(String::as_str).collect();
        for slot in 0..hit.assignments_required {
            let mut flip = |label: bool| label ^ rng.random_bool(s.noise);
            let selected_instances = hit
                .instance_ids()
                .filter(|e| flip(truth.get(*e).copied().unwrap_or(false)))
                .map(str::to_string)
                .collect();
            let selected_properties = hit
                .candidate_properties
                .iter()
                .filter(|p| flip(relevant.contains(p.as_str())))
                .cloned()
                .collect();
            out.push(WorkerAnswer {
                hit_id: hit.id.clone(),
                worker_id: worker_id(slot),
                selected_instances,
                selected_properties,
                submitted_at: (h * hit.assignments_required + slot) as u64,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowd::aggregate::agreement;
    use crate::crowd::hits::generate_hits;

    fn kb(n: usize) -> KnowledgeBase {
        let text: String = (0..n)
            .map(|i| format!("c{i:04}\ttype\tCity\tentity\nc{i:04}\tpopulation\t{}\tliteral\nc{i:04}\tcountry\tX\tentity\n", i + 1))
            .collect();
        KnowledgeBase::parse(&text, "t").unwrap()
    }

    fn scenario(noise: f64) -> ScenarioSpec {
        ScenarioSpec::parse(&format!(
            "[\"big@City\"]\ntruth_predicate = \"population\"\nthreshold = 0.5\nthreshold_kind = \"quantile\"\nrelevant_properties = [\"population\"]\nnoise = {noise}\n"
        ))
        .unwrap()
    }

    fn hits(kb: &KnowledgeBase, n: usize) -> Vec<Hit> {
        let sample: Vec<String> = (0..n).map(|i| format!("c{i:04}")).collect();
        generate_hits(&STPair::new("big", "City"), &sample, kb, 5).unwrap()
    }

    #[test]
    fn noiseless_answers_match_truth() {
        let kb = kb(20);
        let s = scenario(0.0);
        let truth = s.pairs["big@City"].truth(&kb, "City").unwrap();
        assert_eq!(truth.values().filter(|t| **t).count(), 10);
        let answers = simulate_workers(&hits(&kb, 20), &s, &kb, 9).unwrap();
        assert_eq!(answers.len(), 20);
        for a in &answers {
            for e in &a.selected_instances {
                assert!(truth[e]);
            }
            assert_eq!(a.selected_properties, vec!["population"]);
        }
        let selected: usize = answers.iter().map(|a| a.selected_instances.len()).sum();
        assert_eq!(selected, 10 * 5);
    }

    #[test]
    fn noisy_agreement_matches_binomial_mean() {
        let kb = kb(2000);
        let s = scenario(0.1);
        let hs = hits(&kb, 2000);
        let answers = simulate_workers(&hs, &s, &kb, 3).unwrap();
        let truth = s.pairs["big@City"].truth(&kb, "City").unwrap();
        let mut by_hit: BTreeMap<&str, Vec<WorkerAnswer>> = BTreeMap::new();
        for a in &answers {
            by_hit.entry(a.hit_id.as_str()).or_default().push(a.clone());
        }
        let mut total = 0.0;
        let mut count = 0;
        for h in &hs {
            for e in h.instance_ids().filter(|e| truth[*e]) {
                let a = agreement(&by_hit[h.id.as_str()], e).unwrap();
                total += *a.numer() as f64 / *a.denom() as f64;
                count += 1;
            }
        }
        assert_eq!(count, 1000);
        let mean = total / count as f64;
        assert!((mean - 0.9).abs() <= 0.03, "mean agreement {mean}");
    }

    #[test]
    fn deterministic_under_seed() {
        let kb = kb(30);
        let s = scenario(0.2);
        let hs = hits(&kb, 30);
        assert_eq!(simulate_workers(&hs, &s, &kb, 5).unwrap(), simulate_workers(&hs, &s, &kb, 5).unwrap());
        assert_ne!(simulate_workers(&hs, &s, &kb, 5).unwrap(), simulate_workers(&hs, &s, &kb, 6).unwrap());
    }

    #[test]
    fn configuration_errors() {
        let kb = kb(10);
        let hs = hits(&kb, 10);
        let other = ScenarioSpec::parse("[\"large@City\"]\ntruth_predicate = \"population\"\nthreshold = 3\n").unwrap();
        assert!(matches!(simulate_workers(&hs, &other, &kb, 0), Err(Error::Config(_))));
        assert!(ScenarioSpec::parse("[\"big@City\"]\ntruth_predicate = \"p\"\nthreshold = 1\nnoise = 0.5\n").is_err());
        assert!(ScenarioSpec::parse("[\"big@City\"]\ntruth_predicate = \"\"\nthreshold = 1\n").is_err());
    }

    #[test]
    fn value_threshold_and_direction() {
        let kb = kb(10);
        let s = ScenarioSpec::parse(
            "[\"small@City\"]\ntruth_predicate = \"population\"\nthreshold = 4\ndirection = \"below\"\n",
        )
        .unwrap();
        let truth = s.pairs["small@City"].truth(&kb, "City").unwrap();
        assert_eq!(truth.values().filter(|t| **t).count(), 3);
    }
}

//! Agreement-based aggregation of worker answers.
//!
//! The agreement on an instance is the fraction of answering workers who
//! selected it; the dominant opinion is `yes` iff `agreement - 1/2 >= theta_A`.
//! Properties are scored the same way over all assignments of a pair and
//! kept when their agreement reaches `theta_P`.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::crowd::hits::Hit;
use crate::error::{Error, Result};
use crate::scalar::{fraction_as_f64, fraction_to_f64, Fraction};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerAnswer {
    pub hit_id: String,
    pub worker_id: String,
    pub selected_instances: Vec<String>,
    pub selected_properties: Vec<String>,
    /// Milliseconds since the Unix epoch.
    #[serde(default)]
    pub submitted_at: u64,
}

impl WorkerAnswer {
    /// Checks the selections against the HIT.
    pub fn validate(&self, hit: &Hit) -> Result<()> {
        if self.hit_id != hit.id {
            return Err(Error::InvalidArgument(format!("answer for {} checked against {}", self.hit_id, hit.id)));
        }
        if self.worker_id.trim().is_empty() {
            return Err(Error::InvalidArgument("empty worker_id".into()));
        }
        let mut seen = BTreeSet::new();
        for inst in &self.selected_instances {
            if !hit.has_instance(inst) {
                return Err(Error::InvalidArgument(format!("{inst:?} is not an instance of HIT {}", hit.id)));
            }
            if !seen.insert(inst) {
                return Err(Error::InvalidArgument(format!("{inst:?} selected twice")));
            }
        }
        let mut seen = BTreeSet::new();
        for prop in &self.selected_properties {
            if !hit.candidate_properties.contains(prop) {
                return Err(Error::InvalidArgument(format!("{prop:?} is not a candidate property of HIT {}", hit.id)));
            }
            if !seen.insert(prop) {
                return Err(Error::InvalidArgument(format!("{prop:?} selected twice")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationParams {
    /// Agreement margin over one half, in [0, 0.5].
    #[serde(rename = "theta_A", with = "fraction_as_f64")]
    pub theta_a: Fraction,
    /// Property retention threshold, in [0, 1].
    #[serde(rename = "theta_P", with = "fraction_as_f64")]
    pub theta_p: Fraction,
    pub workers_per_hit: usize,
}

impl Default for AggregationParams {
    fn default() -> Self {
        AggregationParams {
            theta_a: Fraction::new(1, 10),
            theta_p: Fraction::new(3, 10),
            workers_per_hit: 5,
        }
    }
}

impl AggregationParams {
    pub fn validate(&self) -> Result<()> {
        let zero = Fraction::from_integer(0);
        if self.theta_a < zero || self.theta_a > Fraction::new(1, 2) {
            return Err(Error::Config(format!("theta_A must lie in [0, 0.5], got {}", self.theta_a)));
        }
        if self.theta_p < zero || self.theta_p > Fraction::from_integer(1) {
            return Err(Error::Config(format!("theta_P must lie in [0, 1], got {}", self.theta_p)));
        }
        if self.workers_per_hit == 0 {
            return Err(Error::Config("workers_per_hit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Opinion {
    Yes,
    No,
}

impl Opinion {
    pub fn as_bool(self) -> bool {
        self == Opinion::Yes
    }
}

/// Fraction of `answers` whose selection contains `instance`.
pub fn agreement(answers: &[WorkerAnswer], instance: &str) -> Result<Fraction> {
    if answers.is_empty() {
        return Err(Error::InsufficientData(format!("no answers cover {instance:?}")));
    }
    let yes = answers
        .iter()
        .filter(|a| a.selected_instances.iter().any(|s| s == instance))
        .count();
    Ok(Fraction::new(yes as i64, answers.len() as i64))
}

/// `yes` iff `agreement - 1/2 >= theta_a`, in whatever arithmetic `S` provides.
pub fn dominant_opinion<S>(agreement: S, theta_a: S) -> Opinion
where
    S: Num + PartialOrd,
{
    let half = S::one() / (S::one() + S::one());
    if agreement - half >= theta_a {
        Opinion::Yes
    } else {
        Opinion::No
    }
}

/// Properties whose per-assignment agreement reaches `theta_P`, sorted by
/// agreement descending then name. Every candidate is scored, so
/// `theta_P = 0` keeps them all.
pub fn retained_properties(
    answers: &[WorkerAnswer],
    candidates: &[String],
    params: &AggregationParams,
) -> Result<Vec<(String, Fraction)>> {
    if answers.is_empty() {
        return Err(Error::InsufficientData("no answers to score properties".into()));
    }
    let mut votes: BTreeMap<&str, i64> = candidates.iter().map(|c| (c.as_str(), 0)).collect();
    for a in answers {
        for p in &a.selected_properties {
            *votes.entry(p.as_str()).or_default() += 1;
        }
    }
    let total = answers.len() as i64;
    let mut out: Vec<(String, Fraction)> = votes
        .into_iter()
        .map(|(p, n)| (p.to_string(), Fraction::new(n, total)))
        .filter(|(_, score)| *score >= params.theta_p)
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceOpinion {
    pub entity: String,
    #[serde(with = "fraction_as_f64")]
    pub agreement: Fraction,
    pub opinion: Opinion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetainedProperty {
    pub property: String,
    #[serde(with = "fraction_as_f64")]
    pub agreement: Fraction,
}

/// Aggregate of all answers for one ST pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairAggregate {
    pub pair: String,
    pub answers: usize,
    pub instances: Vec<InstanceOpinion>,
    pub retained: Vec<RetainedProperty>,
}

impl PairAggregate {
    pub fn labels(&self) -> BTreeMap<String, bool> {
        self.instances
            .iter()
            .map(|i| (i.entity.clone(), i.opinion.as_bool()))
            .collect()
    }

    pub fn retained_names(&self) -> Vec<String> {
        self.retained.iter().map(|r| r.property.clone()).collect()
    }
}

/// Aggregates the answers of every HIT of one pair. Order-independent; a
/// repeated `(hit_id, worker_id)` is rejected.
pub fn aggregate_pair(hits: &[Hit], answers: &[WorkerAnswer], params: &AggregationParams) -> Result<PairAggregate> {
    let pair = hits
        .first()
        .map(|h| h.st_pair())
        .ok_or_else(|| Error::InvalidArgument("no HITs to aggregate".into()))?;
    if let Some(h) = hits.iter().find(|h| h.st_pair() != pair) {
        return Err(Error::InvalidArgument(format!("HIT {} belongs to another pair", h.id)));
    }
    let by_id: BTreeMap<&str, &Hit> = hits.iter().map(|h| (h.id.as_str(), h)).collect();
    let mut per_hit: BTreeMap<&str, Vec<WorkerAnswer>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for a in answers {
        let Some(hit) = by_id.get(a.hit_id.as_str()) else { continue };
        if !seen.insert((a.hit_id.as_str(), a.worker_id.as_str())) {
            return Err(Error::InvalidArgument(format!(
                "worker {} answered {} twice",
                a.worker_id, a.hit_id
            )));
        }
        a.validate(hit)?;
        per_hit.entry(hit.id.as_str()).or_default().push(a.clone());
    }

    let mut instances = Vec::new();
    let mut all = Vec::new();
    let mut candidates: BTreeSet<String> = BTreeSet::new();
    for hit in hits {
        candidates.extend(hit.candidate_properties.iter().cloned());
        let Some(hit_answers) = per_hit.get(hit.id.as_str()) else {
            log::warn!("HIT {} has no answers", hit.id);
            continue;
        };
        for inst in hit.instance_ids() {
            let a = agreement(hit_answers, inst)?;
            instances.push(InstanceOpinion {
                entity: inst.to_string(),
                agreement: a,
                opinion: dominant_opinion(a, params.theta_a),
            });
        }
        all.extend(hit_answers.iter().cloned());
    }
    instances.sort_by(|a, b| a.entity.cmp(&b.entity));
    let candidates: Vec<String> = candidates.into_iter().collect();
    let retained = if all.is_empty() {
        Vec::new()
    } else {
        retained_properties(&all, &candidates, params)?
    };
    Ok(PairAggregate {
        pair: pair.id(),
        answers: all.len(),
        instances,
        retained: retained
            .into_iter()
            .map(|(property, agreement)| RetainedProperty { property, agreement })
            .collect(),
    })
}

/// Agreement as a float, for reports.
pub fn agreement_f64(a: Fraction) -> f64 {
    fraction_to_f64(a)
}

//! Applying an ST pair to a whole type: representative sampling, KB
//! features, and binary classifiers trained on crowd labels.

pub mod features;
pub mod knn;
pub mod sampling;
pub mod tree;

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::STPair;
use crate::inference::{FactSource, SubjectiveFact};
use crate::scalar::Scalar;

pub use features::{distance, featurize, FeatureKind, FeatureSchema, FeatureSet, FeatureSpec, FeatureValue, FeatureVector, FeaturizeOptions};
pub use knn::KnnModel;
pub use sampling::{representative_sample, Sample};
pub use tree::DecisionTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    DecisionTree,
    NearestNeighbors,
    Constant,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::NearestNeighbors => "nearest_neighbors",
            ModelKind::Constant => "constant",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decision_tree" | "tree" | "dt" => Ok(ModelKind::DecisionTree),
            "nearest_neighbors" | "knn" | "nn" => Ok(ModelKind::NearestNeighbors),
            "constant" => Ok(ModelKind::Constant),
            _ => Err(Error::InvalidArgument(format!("unknown classifier {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub max_depth: usize,
    pub neighbors: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            max_depth: tree::DEFAULT_MAX_DEPTH,
            neighbors: knn::DEFAULT_NEIGHBORS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams<F> {
    DecisionTree { nodes: Vec<tree::Node<F>> },
    NearestNeighbors { k: usize, neighbors: Vec<knn::Neighbor<F>> },
    Constant { label: bool },
}

/// Serializes as `{kind, schema, ...payload}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel<F> {
    pub schema: FeatureSchema,
    #[serde(flatten)]
    pub params: ModelParams<F>,
}

impl<F: Scalar> TrainedModel<F> {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::DecisionTree { .. } => ModelKind::DecisionTree,
            ModelParams::NearestNeighbors { .. } => ModelKind::NearestNeighbors,
            ModelParams::Constant { .. } => ModelKind::Constant,
        }
    }

    fn check(&self, v: &FeatureVector<F>) -> Result<()> {
        if v.values.len() != self.schema.len() {
            return Err(Error::InvalidArgument(format!(
                "vector for {} has {} features, model schema has {}",
                v.entity,
                v.values.len(),
                self.schema.len()
            )));
        }
        Ok(())
    }

    /// Label and confidence for one vector.
    pub fn predict(&self, v: &FeatureVector<F>) -> Result<(bool, F)> {
        self.check(v)?;
        Ok(match &self.params {
            ModelParams::DecisionTree { nodes } => tree::DecisionTree { nodes: nodes.clone() }.predict(v),
            ModelParams::NearestNeighbors { k, neighbors } => KnnModel {
                k: *k,
                neighbors: neighbors.clone(),
            }
            .predict(v),
            ModelParams::Constant { label } => (*label, F::one()),
        })
    }

    /// Batch prediction without cloning the model per call.
    pub fn predict_all(&self, vectors: &[FeatureVector<F>]) -> Result<Vec<(bool, F)>> {
        for v in vectors {
            self.check(v)?;
        }
        Ok(match &self.params {
            ModelParams::DecisionTree { nodes } => {
                let t = tree::DecisionTree { nodes: nodes.clone() };
                vectors.iter().map(|v| t.predict(v)).collect()
            }
            ModelParams::NearestNeighbors { k, neighbors } => {
                let m = KnnModel {
                    k: *k,
                    neighbors: neighbors.clone(),
                };
                vectors.iter().map(|v| m.predict(v)).collect()
            }
            ModelParams::Constant { label } => vec![(*label, F::one()); vectors.len()],
        })
    }
}

fn labelled<'a, F: Scalar>(
    set: &'a FeatureSet<F>,
    labels: &BTreeMap<String, bool>,
) -> Result<(Vec<&'a FeatureVector<F>>, Vec<bool>)> {
    let mut rows = Vec::with_capacity(labels.len());
    let mut ys = Vec::with_capacity(labels.len());
    for (entity, &label) in labels {
        let v = set
            .get(entity)
            .ok_or_else(|| Error::InvalidArgument(format!("labelled entity {entity} has no feature vector")))?;
        if v.values.len() != set.schema.len() {
            return Err(Error::InvalidArgument(format!("vector for {entity} does not match the schema")));
        }
        rows.push(v);
        ys.push(label);
    }
    Ok((rows, ys))
}

fn fit<F: Scalar>(
    schema: &FeatureSchema,
    rows: &[&FeatureVector<F>],
    ys: &[bool],
    kind: ModelKind,
    hyper: Hyper,
) -> Result<TrainedModel<F>> {
    if ys.is_empty() {
        return Err(Error::InvalidArgument("no labelled instances to train on".into()));
    }
    let pos = ys.iter().filter(|&&y| y).count();
    let params = if pos == 0 || pos == ys.len() || kind == ModelKind::Constant {
        if kind != ModelKind::Constant {
            log::warn!("single-class labels; training a constant model");
        }
        ModelParams::Constant { label: pos * 2 > ys.len() }
    } else {
        match kind {
            ModelKind::DecisionTree => ModelParams::DecisionTree {
                nodes: DecisionTree::fit(schema, rows, ys, hyper.max_depth).nodes,
            },
            ModelKind::NearestNeighbors => {
                let m = KnnModel::fit(rows, ys, hyper.neighbors)?;
                ModelParams::NearestNeighbors {
                    k: m.k,
                    neighbors: m.neighbors,
                }
            }
            ModelKind::Constant => unreachable!(),
        }
    };
    Ok(TrainedModel {
        schema: schema.clone(),
        params,
    })
}

pub fn train<F: Scalar>(
    set: &FeatureSet<F>,
    labels: &BTreeMap<String, bool>,
    kind: ModelKind,
    hyper: Hyper,
) -> Result<TrainedModel<F>> {
    if kind == ModelKind::NearestNeighbors && hyper.neighbors.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("neighbor count must be odd, got {}", hyper.neighbors)));
    }
    let (rows, ys) = labelled(set, labels)?;
    fit(&set.schema, &rows, &ys, kind, hyper)
}

/// Mean fold accuracy. Folds are stratified by label after a seeded shuffle
/// unless a class has fewer members than there are folds.
pub fn cross_validate<F: Scalar>(
    set: &FeatureSet<F>,
    labels: &BTreeMap<String, bool>,
    kind: ModelKind,
    hyper: Hyper,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    if folds < 2 {
        return Err(Error::InvalidArgument("cross-validation needs at least 2 folds".into()));
    }
    if labels.len() < folds {
        return Err(Error::InvalidArgument(format!(
            "{} labelled instances cannot fill {folds} folds",
            labels.len()
        )));
    }
    let (rows, ys) = labelled(set, labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..ys.len()).filter(|&i| ys[i]).collect();
    let mut neg: Vec<usize> = (0..ys.len()).filter(|&i| !ys[i]).collect();
    let stratified = [pos.len(), neg.len()].iter().all(|&n| n == 0 || n >= folds);
    let order: Vec<usize> = if stratified {
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        pos.into_iter().chain(neg).collect()
    } else {
        log::warn!("a class has fewer than {folds} members; folds are not stratified");
        let mut all: Vec<usize> = (0..ys.len()).collect();
        all.shuffle(&mut rng);
        all
    };
    let mut fold_of = vec![0; ys.len()];
    for (n, &i) in order.iter().enumerate() {
        fold_of[i] = n % folds;
    }
    let mut total = 0.0;
    for f in 0..folds {
        let train_idx: Vec<usize> = (0..ys.len()).filter(|&i| fold_of[i] != f).collect();
        let test_idx: Vec<usize> = (0..ys.len()).filter(|&i| fold_of[i] == f).collect();
        let tr: Vec<&FeatureVector<F>> = train_idx.iter().map(|&i| rows[i]).collect();
        let ty: Vec<bool> = train_idx.iter().map(|&i| ys[i]).collect();
        let model = fit(&set.schema, &tr, &ty, kind, hyper)?;
        let correct = test_idx
            .iter()
            .filter(|&&i| model.predict(rows[i]).map(|(l, _)| l == ys[i]).unwrap_or(false))
            .count();
        total += correct as f64 / test_idx.len() as f64;
    }
    Ok(total / folds as f64)
}

/// One classifier fact per vector.
pub fn apply_model<F: Scalar>(
    model: &TrainedModel<F>,
    schema: &FeatureSchema,
    vectors: &[FeatureVector<F>],
    pair: &STPair,
) -> Result<Vec<SubjectiveFact>> {
    if schema != &model.schema {
        return Err(Error::InvalidArgument("feature schema differs from the model's".into()));
    }
    let predictions = model.predict_all(vectors)?;
    Ok(vectors
        .iter()
        .zip(predictions)
        .map(|(v, (label, confidence))| SubjectiveFact {
            entity: v.entity.clone(),
            pair: pair.clone(),
            label,
            source: FactSource::Classifier,
            confidence: confidence.as_f64(),
            provenance: None,
        })
        .collect())
}

/// Fraction of `labels` the model reproduces.
pub fn accuracy<F: Scalar>(model: &TrainedModel<F>, set: &FeatureSet<F>, labels: &BTreeMap<String, bool>) -> Result<f64> {
    let (rows, ys) = labelled(set, labels)?;
    if rows.is_empty() {
        return Ok(1.0);
    }
    let mut correct = 0;
    for (v, y) in rows.iter().zip(ys) {
        if model.predict(v)?.0 == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / rows.len() as f64)
}

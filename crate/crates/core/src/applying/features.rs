use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{KnowledgeBase, ObjectKind};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub predicate: String,
    pub kind: FeatureKind,
}

/// Ordered predicate list shared by every vector of a feature set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSchema(pub Vec<FeatureSpec>);

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|f| f.predicate.as_str())
    }

    pub fn position(&self, predicate: &str) -> Option<usize> {
        self.0.iter().position(|f| f.predicate == predicate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue<F> {
    Numeric(F),
    Categorical(String),
}

/// One instance's features, aligned with a [`FeatureSchema`]; `None` is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<F> {
    pub entity: String,
    pub values: Vec<Option<FeatureValue<F>>>,
}

impl<F: Scalar> FeatureVector<F> {
    pub fn numeric(&self, i: usize) -> Option<F> {
        match self.values.get(i)? {
            Some(FeatureValue::Numeric(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn categorical(&self, i: usize) -> Option<&str> {
        match self.values.get(i)? {
            Some(FeatureValue::Categorical(t)) => Some(t),
            _ => None,
        }
    }

    /// Numeric features by predicate name.
    pub fn numeric_map(&self, schema: &FeatureSchema) -> BTreeMap<String, Option<F>> {
        schema
            .0
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == FeatureKind::Numeric)
            .map(|(i, s)| (s.predicate.clone(), self.numeric(i)))
            .collect()
    }

    /// Categorical features by predicate name.
    pub fn categorical_map(&self, schema: &FeatureSchema) -> BTreeMap<String, Option<String>> {
        schema
            .0
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == FeatureKind::Categorical)
            .map(|(i, s)| (s.predicate.clone(), self.categorical(i).map(str::to_string)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet<F> {
    pub schema: FeatureSchema,
    pub vectors: Vec<FeatureVector<F>>,
}

impl<F: Scalar> FeatureSet<F> {
    pub fn get(&self, entity: &str) -> Option<&FeatureVector<F>> {
        self.vectors
            .binary_search_by(|v| v.entity.as_str().cmp(entity))
            .ok()
            .map(|i| &self.vectors[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeaturizeOptions {
    /// Relations to other entities become categorical features keyed by the target id.
    pub include_relations: bool,
}

impl Default for FeaturizeOptions {
    fn default() -> Self {
        FeaturizeOptions {
            include_relations: true,
        }
    }
}

/// One vector per instance of `class` (sorted by entity id). Numeric
/// predicates are min-max normalized over the population; multi-valued
/// predicates use their first value in load order.
pub fn featurize<F: Scalar>(
    kb: &KnowledgeBase,
    class: &str,
    retained: &[String],
    opts: FeaturizeOptions,
) -> Result<FeatureSet<F>> {
    if retained.is_empty() {
        return Err(Error::InvalidArgument("no retained properties to featurize".into()));
    }
    let members = kb.instances_of(class, true)?;
    let mut schema = Vec::new();
    let mut columns: Vec<Vec<Option<FeatureValue<f64>>>> = Vec::new();
    for predicate in retained {
        if schema.iter().any(|s: &FeatureSpec| &s.predicate == predicate) {
            continue;
        }
        let firsts: Vec<Option<&crate::kb::Value>> =
            members.iter().map(|e| kb.values(e, predicate).first()).collect();
        let observed: Vec<&crate::kb::Value> = firsts.iter().flatten().copied().collect();
        if observed.is_empty() {
            log::warn!("property {predicate} never observed on {class}; dropped from schema");
            continue;
        }
        let relation = observed.iter().any(|v| v.kind == ObjectKind::Entity);
        if relation && !opts.include_relations {
            log::warn!("relation {predicate} excluded from features");
            continue;
        }
        let numeric = observed.iter().all(|v| v.numeric.is_some());
        let (kind, column) = if numeric {
            let vals: Vec<f64> = observed.iter().filter_map(|v| v.numeric).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            let column = firsts
                .iter()
                .map(|v| {
                    v.and_then(|v| v.numeric).map(|x| {
                        let scaled = if span > 0.0 { (x - lo) / span } else { 0.0 };
                        FeatureValue::Numeric(scaled.clamp(0.0, 1.0))
                    })
                })
                .collect();
            (FeatureKind::Numeric, column)
        } else {
            let column = firsts
                .iter()
                .map(|v| v.map(|v| FeatureValue::Categorical(v.text.clone())))
                .collect();
            (FeatureKind::Categorical, column)
        };
        schema.push(FeatureSpec {
            predicate: predicate.clone(),
            kind,
        });
        columns.push(column);
    }
    let vectors = members
        .iter()
        .enumerate()
        .map(|(row, entity)| FeatureVector {
            entity: entity.clone(),
            values: columns
                .iter()
                .map(|col| match &col[row] {
                    Some(FeatureValue::Numeric(x)) => Some(FeatureValue::Numeric(F::of(*x))),
                    Some(FeatureValue::Categorical(t)) => Some(FeatureValue::Categorical(t.clone())),
                    None => None,
                })
                .collect(),
        })
        .collect();
    Ok(FeatureSet {
        schema: FeatureSchema(schema),
        vectors,
    })
}

/// Mean per-feature distance: `|a - b|` for numeric values, 0/1 mismatch for
/// categorical ones, and 1 whenever either side is missing.
pub fn distance<F: Scalar>(a: &FeatureVector<F>, b: &FeatureVector<F>) -> F {
    let n = a.values.len().min(b.values.len());
    if n == 0 {
        return F::zero();
    }
    let total = a.values.iter().zip(&b.values).fold(F::zero(), |acc, pair| {
        acc + match pair {
            (Some(FeatureValue::Numeric(x)), Some(FeatureValue::Numeric(y))) => (*x - *y).abs(),
            (Some(FeatureValue::Categorical(x)), Some(FeatureValue::Categorical(y))) => {
                if x == y {
                    F::zero()
                } else {
                    F::one()
                }
            }
            _ => F::one(),
        }
    });
    total / F::from_usize(n).expect("feature count fits the scalar")
}

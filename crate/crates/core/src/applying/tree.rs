//! Binary CART with Gini impurity.
//!
//! Numeric features split at midpoints between sorted distinct values and
//! categorical ones split value-vs-rest. Instances missing the split feature
//! follow the branch that received more of the observed training rows (left
//! on a tie), both during training and prediction.

use serde::{Deserialize, Serialize};

use crate::applying::features::{FeatureKind, FeatureSchema, FeatureVector};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_DEPTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split<F> {
    /// Left when `value <= threshold`.
    Numeric { threshold: F },
    /// Left when `value == token`.
    Categorical { token: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node<F> {
    Leaf {
        label: bool,
        purity: F,
        samples: usize,
    },
    Internal {
        feature: usize,
        split: Split<F>,
        missing_left: bool,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<F> {
    /// Node 0 is the root.
    pub nodes: Vec<Node<F>>,
}

struct Candidate<F> {
    gain: f64,
    feature: usize,
    split: Split<F>,
    missing_left: bool,
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

fn leaf<F: Scalar>(rows: &[usize], labels: &[bool]) -> Node<F> {
    let pos = rows.iter().filter(|&&r| labels[r]).count();
    let neg = rows.len() - pos;
    let label = pos > neg;
    let purity = if rows.is_empty() {
        F::one()
    } else {
        F::of(pos.max(neg) as f64 / rows.len() as f64)
    };
    Node::Leaf {
        label,
        purity,
        samples: rows.len(),
    }
}

impl<F: Scalar> DecisionTree<F> {
    pub fn fit(schema: &FeatureSchema, vectors: &[&FeatureVector<F>], labels: &[bool], max_depth: usize) -> Self {
        let mut tree = DecisionTree { nodes: Vec::new() };
        let rows: Vec<usize> = (0..vectors.len()).collect();
        tree.grow(schema, vectors, labels, rows, 0, max_depth);
        tree
    }

    fn grow(
        &mut self,
        schema: &FeatureSchema,
        vectors: &[&FeatureVector<F>],
        labels: &[bool],
        rows: Vec<usize>,
        depth: usize,
        max_depth: usize,
    ) -> usize {
        let id = self.nodes.len();
        let pos = rows.iter().filter(|&&r| labels[r]).count();
        let pure = pos == 0 || pos == rows.len();
        let best = if depth >= max_depth || pure || rows.len() < 2 {
            None
        } else {
            best_split(schema, vectors, labels, &rows)
        };
        let Some(best) = best else {
            self.nodes.push(leaf(&rows, labels));
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| goes_left(vectors[i], best.feature, &best.split, best.missing_left));
        self.nodes.push(Node::Internal {
            feature: best.feature,
            split: best.split,
            missing_left: best.missing_left,
            left: 0,
            right: 0,
        });
        let left = self.grow(schema, vectors, labels, l, depth + 1, max_depth);
        let right = self.grow(schema, vectors, labels, r, depth + 1, max_depth);
        if let Node::Internal {
            left: ref mut a,
            right: ref mut b,
            ..
        } = self.nodes[id]
        {
            *a = left;
            *b = right;
        }
        id
    }

    /// Predicted label and the purity of the reached leaf.
    pub fn predict(&self, v: &FeatureVector<F>) -> (bool, F) {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label, purity, .. } => return (*label, *purity),
                Node::Internal {
                    feature,
                    split,
                    missing_left,
                    left,
                    right,
                } => at = if goes_left(v, *feature, split, *missing_left) { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<F>(nodes: &[Node<F>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }
}

fn goes_left<F: Scalar>(v: &FeatureVector<F>, feature: usize, split: &Split<F>, missing_left: bool) -> bool {
    match split {
        Split::Numeric { threshold } => v.numeric(feature).map_or(missing_left, |x| x <= *threshold),
        Split::Categorical { token } => v.categorical(feature).map_or(missing_left, |t| t == token),
    }
}

fn best_split<F: Scalar>(
    schema: &FeatureSchema,
    vectors: &[&FeatureVector<F>],
    labels: &[bool],
    rows: &[usize],
) -> Option<Candidate<F>> {
    let total = rows.len();
    let total_pos = rows.iter().filter(|&&r| labels[r]).count();
    let parent = gini(total_pos, total);
    let mut best: Option<Candidate<F>> = None;

    // score a split given observed left/right counts and the missing rows' counts
    let score = |lp: usize, ln: usize, rp: usize, rn: usize, mp: usize, mn: usize| -> Option<(f64, bool)> {
        let missing_left = ln + lp >= rn + rp;
        let (lp, ln, rp, rn) = if missing_left {
            (lp + mp, ln + mn, rp, rn)
        } else {
            (lp, ln, rp + mp, rn + mn)
        };
        let (lt, rt) = (lp + ln, rp + rn);
        if lt == 0 || rt == 0 {
            return None;
        }
        let weighted = (lt as f64 * gini(lp, lt) + rt as f64 * gini(rp, rt)) / total as f64;
        Some((parent - weighted, missing_left))
    };

    for (f, spec) in schema.0.iter().enumerate() {
        match spec.kind {
            FeatureKind::Numeric => {
                let mut observed: Vec<(F, bool)> = Vec::new();
                let (mut mp, mut mn) = (0, 0);
                for &r in rows {
                    match vectors[r].numeric(f) {
                        Some(x) => observed.push((x, labels[r])),
                        None if labels[r] => mp += 1,
                        None => mn += 1,
                    }
                }
                observed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
                let op = observed.iter().filter(|o| o.1).count();
                let on = observed.len() - op;
                let (mut lp, mut ln) = (0, 0);
                for i in 0..observed.len().saturating_sub(1) {
                    if observed[i].1 {
                        lp += 1;
                    } else {
                        ln += 1;
                    }
                    let (a, b) = (observed[i].0, observed[i + 1].0);
                    if a == b {
                        continue;
                    }
                    let Some((gain, missing_left)) = score(lp, ln, op - lp, on - ln, mp, mn) else {
                        continue;
                    };
                    if best.as_ref().is_none_or(|c| gain > c.gain) {
                        best = Some(Candidate {
                            gain,
                            feature: f,
                            split: Split::Numeric {
                                threshold: (a + b) / F::of(2.0),
                            },
                            missing_left,
                        });
                    }
                }
            }
            FeatureKind::Categorical => {
                let mut counts: std::collections::BTreeMap<&str, (usize, usize)> = Default::default();
                let (mut mp, mut mn) = (0, 0);
                for &r in rows {
                    match vectors[r].categorical(f) {
                        Some(t) => {
                            let c = counts.entry(t).or_default();
                            if labels[r] {
                                c.0 += 1
                            } else {
                                c.1 += 1
                            }
                        }
                        None if labels[r] => mp += 1,
                        None => mn += 1,
                    }
                }
                let op: usize = counts.values().map(|c| c.0).sum();
                let on: usize = counts.values().map(|c| c.1).sum();
                for (token, &(lp, ln)) in &counts {
                    let Some((gain, missing_left)) = score(lp, ln, op - lp, on - ln, mp, mn) else {
                        continue;
                    };
                    if best.as_ref().is_none_or(|c| gain > c.gain) {
                        best = Some(Candidate {
                            gain,
                            feature: f,
                            split: Split::Categorical {
                                token: token.to_string(),
                            },
                            missing_left,
                        });
                    }
                }
            }
        }
    }
    best.filter(|c| c.gain > 1e-12)
}

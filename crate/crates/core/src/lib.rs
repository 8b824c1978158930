//! Subjective knowledge acquisition for knowledge bases.
//!
//! The pipeline extracts (property, type) pairs from tagged text, connects
//! them through synonym/antonym resemblance, selects the pairs with the most
//! inference potential, collects crowd opinions on sampled instances,
//! generalizes them with per-pair classifiers, and propagates the resulting
//! facts along the graph into an enriched KB.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix it to
//! `f64` (default) or `f32`. Thresholds and prices use the exact
//! [`Fraction`] type.

pub mod applying;
pub mod crowd;
pub mod error;
pub mod extraction;
pub mod inference;
pub mod kb;
pub mod resemble;
pub mod scalar;
pub mod selection;
pub mod synthetic;

pub use error::{Error, Result};
pub use extraction::{RawPair, STPair};
pub use inference::{enrich, infer, infer_fixpoint, FactSource, InferenceReport, SubjectiveFact};
pub use kb::KnowledgeBase;
pub use resemble::{build_graph, Lexicon, Polarity, STGraph};
pub use scalar::{Fraction, Scalar};
pub use selection::{select, Algorithm, SelectionResult};

pub type FeatureVector = applying::FeatureVector<f64>;
pub type FeatureSet = applying::FeatureSet<f64>;
pub type TrainedModel = applying::TrainedModel<f64>;
pub type DecisionTree = applying::DecisionTree<f64>;
pub type KnnModel = applying::KnnModel<f64>;

pub type FeatureVector32 = applying::FeatureVector<f32>;
pub type FeatureSet32 = applying::FeatureSet<f32>;
pub type TrainedModel32 = applying::TrainedModel<f32>;
pub type DecisionTree32 = applying::DecisionTree<f32>;
pub type KnnModel32 = applying::KnnModel<f32>;

/// Exact pricing in rational dollars.
pub type ExactCostModel = crowd::CostModel<Fraction>;
pub type CostModel64 = crowd::CostModel<f64>;

//! Crowd tasks: HIT generation and pricing, answer validation and
//! aggregation, simulated workers, the answer log and dispatch state.

pub mod aggregate;
pub mod dispatch;
pub mod hits;
pub mod answer_log;
pub mod simulate;

pub use aggregate::{
    aggregate_pair, agreement, dominant_opinion, retained_properties, AggregationParams, Opinion, PairAggregate,
    WorkerAnswer,
};
pub use dispatch::{Progress, SubmitError, TaskStore};
pub use hits::{cost, generate_hits, CostModel, Hit, HitInstance};
pub use simulate::{simulate_workers, PairScenario, ScenarioSpec};

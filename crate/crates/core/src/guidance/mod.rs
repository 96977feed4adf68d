//! Anomaly guidance: a GIN encoder mapping ego-graphs to guidance
//! embeddings, curriculum weighting of per-sample losses, and weighted
//! aggregation into the single embedding that conditions generation.

mod curriculum;
mod gin;

pub use curriculum::{
    aggregate_guidance, curriculum_weight, AggregateError, CurriculumConfig, CurriculumSchedule,
    EmaFallback, GuidanceState, RunningMedian,
};
pub use gin::{gin_encode, gin_encode_on_tape, init_gin_params, GinConfig, GinReadout};

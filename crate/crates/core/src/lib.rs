//! Streaming fair classification with an incrementally grown mixture of
//! linear experts: online training under fairness penalties, drift-adaptive
//! expert growth, prequential metrics and fast exact Shapley explanations.

pub mod data;
pub mod error;
pub mod explain;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod persist;
pub mod trainer;

pub use data::{DriftSpec, StreamEvent};
pub use error::{FeamoeError, Result};
pub use explain::{Attribution, Background, ShapGame};
pub use loss::{BurdenState, FairnessSchedule, LossBreakdown, StreamInstance};
pub use metrics::{MetricsReport, MetricsSink, MetricsWindow, PrequentialTracker};
pub use model::{BoundaryDistance, ExpertParams, GateUnit, MixtureModel, ModelOutput};
pub use trainer::{GrowthPolicy, TrainerConfig, TrainerState};

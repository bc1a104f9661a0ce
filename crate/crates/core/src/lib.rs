//! Mini-batch SAM/GSAM with batch-size and learning-rate schedules, noise
//! diagnostics and closed-form convergence bounds on synthetic finite-sum
//! problems.

pub mod checks;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod rng;
pub mod sam;
pub mod schedules;
pub mod theory;
pub mod vector;

pub use ensemble::{
    Batch, Ensemble, EnsembleKind, EnsembleSpec, LossEnsemble, MiniBatch, MlpEnsemble, MlpLoss, MlpSpec,
    QuadraticEnsemble, QuadraticSpec, SamplingMode,
};
pub use error::{Error, Result};
pub use sam::{BaseUpdate, SamConfig};
pub use schedules::{BatchSchedule, BatchStage, LrKind, LrSchedule, ScheduleAggregates};
pub use vector::ParamVector;

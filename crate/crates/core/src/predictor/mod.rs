//! Key-point-conditioned autoregressive motion model: a context-window
//! network predicting normalized velocities, teacher-forced velocity and
//! one-step coordinate losses with analytic gradients, the alternating
//! trainer, kinematic rollout and a constant-velocity baseline.

mod loss;
mod net;
mod rollout;
mod train;

use thiserror::Error;

use crate::ais::AisError;
use crate::geo::GeoError;
use crate::nkp::NkpError;

pub use self::loss::{
    assemble_channels, loss_coord, loss_coord_grad, loss_vol, loss_vol_grad, sample_index,
    TrainingWindow,
};
pub use self::net::{forward_step, forward_step_grad, PredictorParams, DEFAULT_CONTEXT, DEFAULT_WIDTH};
pub use self::rollout::{cvm_baseline, integrated_predict, rollout_predict, IntegratedPrediction, PredictionTask};
pub use self::train::{train_alternating, PredictorTraining, TrainSchedule};

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need at least {0} rows")]
    TooShort(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite parameters")]
    NonFinite,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("kinematic step {index} failed: {source}")]
    Geo { index: usize, source: GeoError },
    #[error(transparent)]
    Ais(#[from] AisError),
    #[error(transparent)]
    Nkp(#[from] NkpError),
}

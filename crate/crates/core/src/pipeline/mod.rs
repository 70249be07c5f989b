//! End-to-end harness: run configuration and synthetic fixtures, dataset
//! preparation, the subcommands that train, predict and evaluate, and the
//! report types they emit.

mod config;
mod data;
mod report;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use self::config::{
    branching_fleet, ring_extension_fleet, ring_fleet, straight_fleet, Fixture, ModelKind, NkpMode, Paths,
    PredictorShape, RunConfig, Seeds, TaskSpec, WindowSpec, BRANCH_POINT,
};
pub use self::data::{Dataset, EvalTask, Split};
pub use self::report::{EvalRecord, EvalReport, NkpWindowEval, Variant};
pub use self::run::{
    artifact, evaluate_variants, nkp_window_accuracy, eval_threads, provenance, run, Command, Outcome, THREADS_ENV,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read {path}: {reason}")]
    Missing { path: PathBuf, reason: String },
    #[error("no evaluation tasks: {0}")]
    NoTasks(String),
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
    #[error(transparent)]
    Ais(#[from] crate::ais::AisError),
    #[error(transparent)]
    Geo(#[from] crate::geo::GeoError),
    #[error(transparent)]
    Nkp(#[from] crate::nkp::NkpError),
    #[error(transparent)]
    Predictor(#[from] crate::predictor::PredictorError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}

impl PipelineError {
    /// Stable identifier for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Missing { .. } => "missing_input",
            PipelineError::NoTasks(_) => "no_tasks",
            PipelineError::Io(crate::io::IoError::VersionMismatch { .. }) => "version_mismatch",
            PipelineError::Io(crate::io::IoError::ShapeMismatch(_)) => "shape_mismatch",
            PipelineError::Io(crate::io::IoError::CorruptFile(_)) => "corrupt_file",
            PipelineError::Io(_) => "io",
            PipelineError::Ais(_) => "ais",
            PipelineError::Geo(_) => "geo",
            PipelineError::Nkp(_) => "nkp",
            PipelineError::Predictor(_) => "predictor",
            PipelineError::Metrics(_) => "metrics",
        }
    }
}

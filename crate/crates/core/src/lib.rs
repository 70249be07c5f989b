//! Intent-conditioned long-horizon vessel trajectory forecasting.
//!
//! The crate is organised bottom-up:
//!
//! - [`geo`]: rhumb-line stepping from speed/course over ground and its inverse.
//! - [`metrics`]: MSEP, smoothed-curvature MSEC and discrete Fréchet distance.
//! - [`ais`]: CSV ingestion, uniform resampling, key-node annotation, windows,
//!   normalization and a synthetic fleet generator.
//! - [`nkp`]: contrastive trajectory encoder, reference database and
//!   threshold-voting Next-Key-Point prediction.
//! - [`predictor`]: key-point-conditioned autoregressive motion model,
//!   its losses and alternating trainer, rollout and a constant-velocity baseline.
//! - [`info`]: brute-force information-theoretic checks on discrete distributions.
//! - [`io`], [`pipeline`], [`verify`]: checkpoints, GeoJSON/report output and
//!   the end-to-end harness driven by the CLI.

pub mod ais;
pub mod geo;
pub mod info;
pub mod io;
pub mod metrics;
pub mod nkp;
pub mod pipeline;
pub mod predictor;
pub mod verify;

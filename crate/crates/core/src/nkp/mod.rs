//! Next-Key-Point inference: a compact trajectory encoder trained with a
//! contrastive verification loss, a flat reference database, top-K
//! retrieval and threshold voting.

mod db;
mod encoder;
mod loss;
mod train;

use thiserror::Error;

use crate::ais::{AisError, NkpLabel};

pub use self::db::{
    build_reference_db, encoder_features, predict_nkp, retrieve_topk, vote, DbEntry, EntryMeta,
    NkpPrediction, ReferenceDb, Retrieved,
};
pub use self::encoder::{
    cosine_similarity, encode, Embedding, EncoderParams, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN,
    ENCODER_INPUTS,
};
pub use self::loss::{pair_loss, tcl_grad, tcl_loss};
pub use self::train::{train_encoder, train_encoder_from, ContrastiveConfig, EncoderTraining};

#[derive(Debug, Error)]
pub enum NkpError {
    #[error("embedding norm below 1e-12")]
    Degenerate,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite values")]
    NonFinite,
    #[error("empty batch")]
    EmptyBatch,
    #[error("reference database is empty")]
    EmptyDb,
    #[error("need at least 2 distinct labels, found {0}")]
    InsufficientLabels(usize),
    #[error("label {0} has no key node")]
    UnknownLabel(NkpLabel),
    #[error("window of mmsi {mmsi} at {start} carries no label")]
    Unlabeled { mmsi: u64, start: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ais(#[from] AisError),
}

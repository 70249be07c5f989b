use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::NkpError;
use crate::ais::Features;

/// Input channels seen by the encoder: normalized position and velocity.
pub const ENCODER_INPUTS: usize = 4;
pub const DEFAULT_HIDDEN: usize = 128;
pub const DEFAULT_EMBED_DIM: usize = 64;

const DEGENERATE_NORM: f64 = 1e-12;

/// Flat encoder weights. Layout, row-major:
/// `w1 [h x 4], b1 [h], w2 [h x h], b2 [h], w3 [d x h], b3 [d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub hidden: usize,
    pub embed_dim: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    end: usize,
}

impl EncoderParams {
    pub fn param_count(hidden: usize, embed_dim: usize) -> usize {
        let h = hidden;
        h * ENCODER_INPUTS + h + h * h + h + embed_dim * h + embed_dim
    }

    pub fn zeros(hidden: usize, embed_dim: usize) -> Self {
        Self {
            hidden,
            embed_dim,
            data: vec![0.0; Self::param_count(hidden, embed_dim)],
        }
    }

    /// Scaled Gaussian initialization (variance `1 / fan_in`), zero biases.
    pub fn init(hidden: usize, embed_dim: usize, seed: u64) -> Self {
        let mut p = Self::zeros(hidden, embed_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = p.offsets();
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, data: &mut [f64]| {
            let n = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("valid std");
            for v in &mut data[range] {
                *v = n.sample(&mut rng);
            }
        };
        fill(o.w1..o.b1, ENCODER_INPUTS, &mut p.data);
        fill(o.w2..o.b2, hidden, &mut p.data);
        fill(o.w3..o.b3, hidden, &mut p.data);
        p
    }

    pub fn validate(&self) -> Result<(), NkpError> {
        let want = Self::param_count(self.hidden, self.embed_dim);
        if self.hidden == 0 || self.embed_dim == 0 || self.data.len() != want {
            return Err(NkpError::ShapeMismatch(format!(
                "encoder h={} d={} expects {} values, found {}",
                self.hidden,
                self.embed_dim,
                want,
                self.data.len()
            )));
        }
        if !self.data.iter().all(|v| v.is_finite()) {
            return Err(NkpError::NonFinite);
        }
        Ok(())
    }

    fn offsets(&self) -> Offsets {
        let h = self.hidden;
        let w1 = 0;
        let b1 = w1 + h * ENCODER_INPUTS;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + self.embed_dim * h;
        Offsets {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            end: b3 + self.embed_dim,
        }
    }
}

/// Unit-norm trajectory embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `v`; fails if its norm is below `1e-12`.
    pub fn from_raw(v: Vec<f64>) -> Result<Self, NkpError> {
        let n = norm(&v);
        if !(n >= DEGENERATE_NORM) {
            return Err(NkpError::Degenerate);
        }
        Ok(Self(v.into_iter().map(|x| x / n).collect()))
    }

    /// Wraps an already unit-norm vector without rescaling, so stored
    /// embeddings reload bit-for-bit.
    pub fn from_unit(v: Vec<f64>) -> Result<Self, NkpError> {
        if !((norm(&v) - 1.0).abs() <= 1e-9) {
            return Err(NkpError::Degenerate);
        }
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dot product of two embeddings clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, NkpError> {
    if a.dim() != b.dim() {
        return Err(NkpError::ShapeMismatch(format!(
            "embedding dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.dim() == 0 {
        return Err(NkpError::Degenerate);
    }
    Ok(dot(&a.0, &b.0).clamp(-1.0, 1.0))
}

/// Intermediate values kept for the backward pass.
pub(crate) struct Trace {
    rows: usize,
    /// Lifted inputs `w1 x + b1`, `rows x h`.
    lift: Vec<f64>,
    /// Hidden activations, `rows x h`.
    act: Vec<f64>,
    pooled: Vec<f64>,
    /// Pre-normalization projection.
    raw: Vec<f64>,
}

fn check_input(features: &Features, params: &EncoderParams) -> Result<(), NkpError> {
    if features.channels != ENCODER_INPUTS {
        return Err(NkpError::ShapeMismatch(format!(
            "encoder takes {ENCODER_INPUTS} channels, got {}",
            features.channels
        )));
    }
    if features.rows == 0 {
        return Err(NkpError::ShapeMismatch("empty feature matrix".into()));
    }
    if features.data.len() != features.rows * features.channels || !features.is_finite() {
        return Err(NkpError::NonFinite);
    }
    if params.data.len() != EncoderParams::param_count(params.hidden, params.embed_dim) {
        return params.validate();
    }
    Ok(())
}

pub(crate) fn forward(features: &Features, params: &EncoderParams) -> Result<Trace, NkpError> {
    check_input(features, params)?;
    let h = params.hidden;
    let d = params.embed_dim;
    let o = params.offsets();
    let p = &params.data;
    let rows = features.rows;
    let mut lift = vec![0.0; rows * h];
    let mut act = vec![0.0; rows * h];
    let mut pooled = vec![0.0; h];
    for t in 0..rows {
        let x = features.row(t);
        let u = &mut lift[t * h..(t + 1) * h];
        for (j, uj) in u.iter_mut().enumerate() {
            *uj = p[o.b1 + j] + dot(&p[o.w1 + j * ENCODER_INPUTS..o.w1 + (j + 1) * ENCODER_INPUTS], x);
        }
        let a = &mut act[t * h..(t + 1) * h];
        for (j, aj) in a.iter_mut().enumerate() {
            *aj = (p[o.b2 + j] + dot(&p[o.w2 + j * h..o.w2 + (j + 1) * h], u)).tanh();
            pooled[j] += *aj;
        }
    }
    let inv = 1.0 / rows as f64;
    pooled.iter_mut().for_each(|v| *v *= inv);
    let raw = (0..d)
        .map(|k| p[o.b3 + k] + dot(&p[o.w3 + k * h..o.w3 + (k + 1) * h], &pooled))
        .collect();
    Ok(Trace {
        rows,
        lift,
        act,
        pooled,
        raw,
    })
}

/// Embeds an `L x 4` feature matrix: position-wise lift and tanh layer,
/// mean pool over time, projection, L2 normalization.
pub fn encode(features: &Features, params: &EncoderParams) -> Result<Embedding, NkpError> {
    Embedding::from_raw(forward(features, params)?.raw)
}

impl Trace {
    pub(crate) fn embedding(&self) -> Result<Embedding, NkpError> {
        Embedding::from_raw(self.raw.clone())
    }
}

/// Accumulates into `grad` the parameter gradient given the gradient `g`
/// with respect to the normalized embedding.
pub(crate) fn backward(
    features: &Features,
    params: &EncoderParams,
    trace: &Trace,
    g: &[f64],
    grad: &mut [f64],
) {
    let h = params.hidden;
    let d = params.embed_dim;
    let o = params.offsets();
    let p = &params.data;
    debug_assert_eq!(grad.len(), o.end);

    // Through z / |z|.
    let n = norm(&trace.raw);
    let e: Vec<f64> = trace.raw.iter().map(|v| v / n).collect();
    let eg = dot(&e, g);
    let gz: Vec<f64> = g.iter().zip(&e).map(|(gi, ei)| (gi - ei * eg) / n).collect();

    let mut gm = vec![0.0; h];
    for k in 0..d {
        grad[o.b3 + k] += gz[k];
        let row = o.w3 + k * h;
        for j in 0..h {
            grad[row + j] += gz[k] * trace.pooled[j];
            gm[j] += gz[k] * p[row + j];
        }
    }
    let inv = 1.0 / trace.rows as f64;
    gm.iter_mut().for_each(|v| *v *= inv);

    let mut ga = vec![0.0; h];
    let mut gu = vec![0.0; h];
    for t in 0..trace.rows {
        let a = &trace.act[t * h..(t + 1) * h];
        let u = &trace.lift[t * h..(t + 1) * h];
        for j in 0..h {
            ga[j] = gm[j] * (1.0 - a[j] * a[j]);
        }
        gu.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..h {
            let gj = ga[j];
            grad[o.b2 + j] += gj;
            let row = o.w2 + j * h;
            for i in 0..h {
                grad[row + i] += gj * u[i];
                gu[i] += gj * p[row + i];
            }
        }
        let x = features.row(t);
        for i in 0..h {
            grad[o.b1 + i] += gu[i];
            let row = o.w1 + i * ENCODER_INPUTS;
            for (c, xc) in x.iter().enumerate() {
                grad[row + c] += gu[i] * xc;
            }
        }
    }
}

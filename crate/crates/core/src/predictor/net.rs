use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::PredictorError;
use crate::ais::Features;

pub const DEFAULT_CONTEXT: usize = 16;
pub const DEFAULT_WIDTH: usize = 128;

/// Context-window network: the last `context` rows of a `channels`-wide
/// feature matrix are flattened, passed through two tanh layers of width
/// `hidden` and mapped to a normalized velocity pair.
///
/// Layout, row-major: `w1 [h x n], b1 [h], w2 [h x h], b2 [h], w3 [2 x h], b3 [2]`
/// with `n = context * channels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorParams {
    pub context: usize,
    pub channels: usize,
    pub hidden: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Offsets {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub w3: usize,
    pub b3: usize,
}

impl PredictorParams {
    pub fn param_count(context: usize, channels: usize, hidden: usize) -> usize {
        let n = context * channels;
        hidden * n + hidden + hidden * hidden + hidden + 2 * hidden + 2
    }

    pub fn zeros(context: usize, channels: usize, hidden: usize) -> Self {
        Self {
            context,
            channels,
            hidden,
            data: vec![0.0; Self::param_count(context, channels, hidden)],
        }
    }

    /// Gaussian weights with variance `1 / fan_in`; the output layer is
    /// scaled down so an untrained model predicts small velocities.
    pub fn init(context: usize, channels: usize, hidden: usize, seed: u64) -> Self {
        let mut p = Self::zeros(context, channels, hidden);
        let o = p.offsets();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_in = context * channels;
        for (range, fan_in, gain) in [
            (o.w1..o.b1, n_in, 1.0),
            (o.w2..o.b2, hidden, 1.0),
            (o.w3..o.b3, hidden, 0.1),
        ] {
            let dist = Normal::new(0.0, gain / (fan_in as f64).sqrt()).expect("valid std");
            for v in &mut p.data[range] {
                *v = dist.sample(&mut rng);
            }
        }
        p
    }

    pub fn input_len(&self) -> usize {
        self.context * self.channels
    }

    pub fn validate(&self) -> Result<(), PredictorError> {
        if !(self.channels == 4 || self.channels == 6) {
            return Err(PredictorError::ShapeMismatch(format!(
                "channel flag must be 4 or 6, got {}",
                self.channels
            )));
        }
        let want = Self::param_count(self.context, self.channels, self.hidden);
        if self.context == 0 || self.hidden == 0 || self.data.len() != want {
            return Err(PredictorError::ShapeMismatch(format!(
                "predictor c={} ch={} h={} expects {want} values, found {}",
                self.context,
                self.channels,
                self.hidden,
                self.data.len()
            )));
        }
        if !self.data.iter().all(|v| v.is_finite()) {
            return Err(PredictorError::NonFinite);
        }
        Ok(())
    }

    pub(crate) fn offsets(&self) -> Offsets {
        let h = self.hidden;
        let w1 = 0;
        let b1 = w1 + h * self.input_len();
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + 2 * h;
        Offsets {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) struct Trace {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub out: [f64; 2],
}

/// Forward pass on a flattened context of `context * channels` values.
pub(crate) fn forward(x: &[f64], params: &PredictorParams) -> Trace {
    debug_assert_eq!(x.len(), params.input_len());
    let h = params.hidden;
    let n = params.input_len();
    let o = params.offsets();
    let p = &params.data;
    let h1: Vec<f64> = (0..h)
        .map(|j| (p[o.b1 + j] + dot(&p[o.w1 + j * n..o.w1 + (j + 1) * n], x)).tanh())
        .collect();
    let h2: Vec<f64> = (0..h)
        .map(|j| (p[o.b2 + j] + dot(&p[o.w2 + j * h..o.w2 + (j + 1) * h], &h1)).tanh())
        .collect();
    let out = [
        p[o.b3] + dot(&p[o.w3..o.w3 + h], &h2),
        p[o.b3 + 1] + dot(&p[o.w3 + h..o.w3 + 2 * h], &h2),
    ];
    Trace { h1, h2, out }
}

/// Accumulates into `grad` the parameter gradient for output gradient `g`.
pub(crate) fn backward(x: &[f64], params: &PredictorParams, trace: &Trace, g: [f64; 2], grad: &mut [f64]) {
    let h = params.hidden;
    let n = params.input_len();
    let o = params.offsets();
    let p = &params.data;

    let mut g2 = vec![0.0; h];
    for (k, gk) in g.iter().enumerate() {
        grad[o.b3 + k] += gk;
        let row = o.w3 + k * h;
        for j in 0..h {
            grad[row + j] += gk * trace.h2[j];
            g2[j] += gk * p[row + j];
        }
    }
    let mut g1 = vec![0.0; h];
    for j in 0..h {
        let a = g2[j] * (1.0 - trace.h2[j] * trace.h2[j]);
        grad[o.b2 + j] += a;
        let row = o.w2 + j * h;
        for i in 0..h {
            grad[row + i] += a * trace.h1[i];
            g1[i] += a * p[row + i];
        }
    }
    for j in 0..h {
        let a = g1[j] * (1.0 - trace.h1[j] * trace.h1[j]);
        grad[o.b1 + j] += a;
        let row = o.w1 + j * n;
        for (i, xi) in x.iter().enumerate() {
            grad[row + i] += a * xi;
        }
    }
}

/// Predicted normalized velocity `(v_lat, v_lon)` for the step following
/// the last row of `context`.
pub fn forward_step(context: &Features, params: &PredictorParams) -> Result<(f64, f64), PredictorError> {
    if context.rows != params.context || context.channels != params.channels {
        return Err(PredictorError::ShapeMismatch(format!(
            "context is {}x{}, model expects {}x{}",
            context.rows, context.channels, params.context, params.channels
        )));
    }
    if params.data.len() != PredictorParams::param_count(params.context, params.channels, params.hidden) {
        params.validate()?;
    }
    let out = forward(&context.data, params).out;
    Ok((out[0], out[1]))
}

/// Gradient of `w . forward_step(context)` with respect to every parameter.
pub fn forward_step_grad(
    context: &Features,
    params: &PredictorParams,
    w: (f64, f64),
) -> Result<Vec<f64>, PredictorError> {
    forward_step(context, params)?;
    let trace = forward(&context.data, params);
    let mut grad = vec![0.0; params.data.len()];
    backward(&context.data, params, &trace, [w.0, w.1], &mut grad);
    Ok(grad)
}

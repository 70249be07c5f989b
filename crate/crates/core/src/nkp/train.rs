use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::tcl_grad;
use super::{EncoderParams, NkpError, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN};
use crate::ais::{Features, NkpLabel};

const PROBE_PAIRS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContrastiveConfig {
    pub margin: f64,
    pub threshold: f64,
    pub top_k: usize,
    pub learning_rate: f64,
    /// Heavy-ball momentum; 0 is plain gradient descent.
    pub momentum: f64,
    pub epochs: usize,
    /// Pairs per mini-batch.
    pub batch_size: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub seed: u64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self {
            margin: 0.5,
            threshold: 0.5,
            top_k: 5,
            learning_rate: 7e-5,
            momentum: 0.0,
            epochs: 20,
            batch_size: 16,
            hidden: DEFAULT_HIDDEN,
            embed_dim: DEFAULT_EMBED_DIM,
            seed: 0,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<(), NkpError> {
        let bad = |m: &str| Err(NkpError::InvalidConfig(m.into()));
        if !(self.margin > 0.0 && self.margin <= 1.0) {
            return bad("margin must lie in (0, 1]");
        }
        if !(self.threshold > -1.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (-1, 1)");
        }
        if self.top_k == 0 || self.batch_size == 0 || self.hidden == 0 || self.embed_dim == 0 {
            return bad("top_k, batch_size, hidden and embed_dim must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderTraining {
    pub params: EncoderParams,
    /// Mean loss on a fixed probe set of pairs: before training, then after
    /// every epoch.
    pub loss_curve: Vec<f64>,
}

struct PairSampler<'a> {
    by_label: Vec<Vec<usize>>,
    samples: &'a [(Features, NkpLabel)],
}

impl<'a> PairSampler<'a> {
    fn new(samples: &'a [(Features, NkpLabel)]) -> Result<Self, NkpError> {
        let mut map: BTreeMap<&NkpLabel, Vec<usize>> = BTreeMap::new();
        for (i, (_, l)) in samples.iter().enumerate() {
            map.entry(l).or_default().push(i);
        }
        if map.len() < 2 {
            return Err(NkpError::InsufficientLabels(map.len()));
        }
        Ok(Self {
            by_label: map.into_values().collect(),
            samples,
        })
    }

    fn same(&self, rng: &mut ChaCha8Rng) -> (usize, usize) {
        let group = self.by_label.choose(rng).expect("labels present");
        let a = *group.choose(rng).expect("nonempty group");
        if group.len() == 1 {
            return (a, a);
        }
        loop {
            let b = *group.choose(rng).expect("nonempty group");
            if b != a {
                return (a, b);
            }
        }
    }

    fn different(&self, rng: &mut ChaCha8Rng) -> (usize, usize) {
        let n = self.by_label.len();
        let ga = rng.random_range(0..n);
        let gb = (ga + rng.random_range(1..n)) % n;
        (
            *self.by_label[ga].choose(rng).expect("nonempty group"),
            *self.by_label[gb].choose(rng).expect("nonempty group"),
        )
    }

    /// `n` pairs, alternating same / different so every batch is balanced.
    fn batch(&self, n: usize, rng: &mut ChaCha8Rng) -> (Vec<(Features, Features)>, Vec<bool>) {
        let mut pairs = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for k in 0..n {
            let same = k % 2 == 0;
            let (a, b) = if same { self.same(rng) } else { self.different(rng) };
            pairs.push((self.samples[a].0.clone(), self.samples[b].0.clone()));
            y.push(same);
        }
        (pairs, y)
    }
}

/// Trains an encoder from scratch with seeded mini-batch gradient descent on
/// the contrastive loss. Each batch holds equal numbers of same-label and
/// different-label pairs; an epoch is enough batches to touch every sample
/// about once.
pub fn train_encoder(
    samples: &[(Features, NkpLabel)],
    config: &ContrastiveConfig,
) -> Result<EncoderTraining, NkpError> {
    config.validate()?;
    let init = EncoderParams::init(config.hidden, config.embed_dim, config.seed);
    train_encoder_from(samples, config, init)
}

/// As [`train_encoder`], starting from `params`.
pub fn train_encoder_from(
    samples: &[(Features, NkpLabel)],
    config: &ContrastiveConfig,
    mut params: EncoderParams,
) -> Result<EncoderTraining, NkpError> {
    config.validate()?;
    params.validate()?;
    let sampler = PairSampler::new(samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_c0de);
    let (probe, probe_y) = sampler.batch(PROBE_PAIRS, &mut ChaCha8Rng::seed_from_u64(config.seed));
    let probe_loss = |p: &EncoderParams| tcl_grad_loss(&probe, &probe_y, p, config.margin);

    let mut curve = vec![probe_loss(&params)?];
    let batches = samples.len().div_ceil(2 * config.batch_size).max(1);
    let mut velocity = vec![0.0; params.data.len()];
    for _ in 0..config.epochs {
        for _ in 0..batches {
            let (pairs, y) = sampler.batch(config.batch_size, &mut rng);
            let (_, g) = tcl_grad(&pairs, &y, &params, config.margin)?;
            for ((p, v), gi) in params.data.iter_mut().zip(&mut velocity).zip(&g) {
                *v = config.momentum * *v - config.learning_rate * gi;
                *p += *v;
            }
        }
        if !params.data.iter().all(|v| v.is_finite()) {
            return Err(NkpError::NonFinite);
        }
        curve.push(probe_loss(&params)?);
    }
    Ok(EncoderTraining {
        params,
        loss_curve: curve,
    })
}

fn tcl_grad_loss(
    pairs: &[(Features, Features)],
    y: &[bool],
    params: &EncoderParams,
    margin: f64,
) -> Result<f64, NkpError> {
    let embs = pairs
        .iter()
        .map(|(a, b)| Ok((super::encode(a, params)?, super::encode(b, params)?)))
        .collect::<Result<Vec<_>, NkpError>>()?;
    super::tcl_loss(&embs, y, margin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(label: &str, center: [f64; 4], n: usize, seed: u64) -> Vec<(Features, NkpLabel)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let data = (0..6 * 4)
                    .map(|i| center[i % 4] + rng.random_range(-0.1..0.1))
                    .collect();
                (
                    Features {
                        rows: 6,
                        channels: 4,
                        data,
                    },
                    NkpLabel::from(label),
                )
            })
            .collect()
    }

    fn config() -> ContrastiveConfig {
        ContrastiveConfig {
            learning_rate: 0.2,
            momentum: 0.5,
            epochs: 10,
            batch_size: 8,
            hidden: 8,
            embed_dim: 4,
            seed: 3,
            ..Default::default()
        }
    }

    fn data() -> Vec<(Features, NkpLabel)> {
        let mut d = blob("A", [0.5, -0.5, 0.3, 0.0], 20, 1);
        d.extend(blob("B", [-0.5, 0.5, 0.0, -0.3], 20, 2));
        d
    }

    #[test]
    fn loss_drops_and_is_deterministic() {
        let a = train_encoder(&data(), &config()).unwrap();
        assert!(a.loss_curve.last().unwrap() < &a.loss_curve[0]);
        assert_eq!(a.loss_curve.len(), 11);
        assert_eq!(a, train_encoder(&data(), &config()).unwrap());
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let cfg = ContrastiveConfig {
            learning_rate: 0.0,
            ..config()
        };
        let out = train_encoder(&data(), &cfg).unwrap();
        assert_eq!(out.params, EncoderParams::init(8, 4, 3));
    }

    #[test]
    fn single_label_is_rejected() {
        let d = blob("A", [0.0; 4], 5, 1);
        assert!(matches!(
            train_encoder(&d, &config()),
            Err(NkpError::InsufficientLabels(1))
        ));
    }

    #[test]
    fn config_bounds() {
        let mut c = ContrastiveConfig::default();
        assert!(c.validate().is_ok());
        c.margin = 0.0;
        assert!(c.validate().is_err());
        c = ContrastiveConfig {
            threshold: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}

//! Brute-force information-theoretic checks on finite joint distributions
//! over `(X, Y, Z)`: conditional-entropy monotonicity, the tower property of
//! conditional probabilities, and monotonicity of the Bayes risk when more
//! is observed. Everything is in nats with `0 ln 0 = 0`; conditioning cells
//! of zero probability are skipped.

use std::ops::BitOr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum InfoError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid loss matrix: {0}")]
    InvalidLoss(String),
}

/// Subset of the variables `X`, `Y`, `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vars(u8);

impl Vars {
    pub const NONE: Vars = Vars(0);
    pub const X: Vars = Vars(1);
    pub const Y: Vars = Vars(2);
    pub const Z: Vars = Vars(4);

    fn has(self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }
}

impl BitOr for Vars {
    type Output = Vars;
    fn bitor(self, rhs: Vars) -> Vars {
        Vars(self.0 | rhs.0)
    }
}

/// Joint probability table, `p[(x * ny + y) * nz + z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub dims: [usize; 3],
    pub p: Vec<f64>,
}

impl JointDistribution {
    pub fn new(dims: [usize; 3], p: Vec<f64>) -> Result<Self, InfoError> {
        let d = Self { dims, p };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), InfoError> {
        let n: usize = self.dims.iter().product();
        if n == 0 || self.p.len() != n {
            return Err(InfoError::InvalidDistribution(format!(
                "dims {:?} need {n} entries, got {}",
                self.dims,
                self.p.len()
            )));
        }
        if let Some(v) = self.p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(InfoError::InvalidDistribution(format!("entry {v} is not a probability")));
        }
        let total: f64 = self.p.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(InfoError::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(())
    }

    /// Random table: uniform weights, each zeroed with probability
    /// `zero_frac`, then normalized.
    pub fn random<R: Rng>(dims: [usize; 3], zero_frac: f64, rng: &mut R) -> Self {
        let n: usize = dims.iter().product();
        loop {
            let w: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random::<f64>() < zero_frac {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                return Self {
                    dims,
                    p: w.into_iter().map(|v| v / total).collect(),
                };
            }
        }
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        let [_, ny, nz] = self.dims;
        self.p[(x * ny + y) * nz + z]
    }

    /// Marginal over `vars`, indexed by [`Self::key`].
    fn marginal(&self, vars: Vars) -> Vec<f64> {
        let size: usize = (0..3).filter(|&a| vars.has(a)).map(|a| self.dims[a]).product();
        let mut m = vec![0.0; size];
        self.for_each(|c, p| m[self.key(vars, c)] += p);
        m
    }

    /// Mixed-radix index of the `vars` coordinates of cell `c`.
    fn key(&self, vars: Vars, c: [usize; 3]) -> usize {
        (0..3)
            .filter(|&a| vars.has(a))
            .fold(0, |k, a| k * self.dims[a] + c[a])
    }

    fn for_each(&self, mut f: impl FnMut([usize; 3], f64)) {
        let [nx, ny, nz] = self.dims;
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    f([x, y, z], self.p[(x * ny + y) * nz + z]);
                }
            }
        }
    }
}

/// `H(vars)`.
pub fn entropy(dist: &JointDistribution, vars: Vars) -> Result<f64, InfoError> {
    dist.validate()?;
    Ok(-dist.marginal(vars).iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>())
}

/// `H(target | given) = -sum p(t, g) ln(p(t, g) / p(g))`.
pub fn cond_entropy(dist: &JointDistribution, target: Vars, given: Vars) -> Result<f64, InfoError> {
    dist.validate()?;
    let joint_vars = target | given;
    let joint = dist.marginal(joint_vars);
    let cond = dist.marginal(given);
    let mut seen = vec![false; joint.len()];
    let mut h = 0.0;
    dist.for_each(|c, _| {
        let j = dist.key(joint_vars, c);
        if seen[j] {
            return;
        }
        seen[j] = true;
        let pj = joint[j];
        if pj > 0.0 {
            h -= pj * (pj / cond[dist.key(given, c)]).ln();
        }
    });
    Ok(h)
}

/// `I(a; b | given) = sum p(a,b,g) ln(p(a,b,g) p(g) / (p(a,g) p(b,g)))`.
pub fn cond_mutual_info(dist: &JointDistribution, a: Vars, b: Vars, given: Vars) -> Result<f64, InfoError> {
    dist.validate()?;
    let abg = a | b | given;
    let (p_abg, p_ag, p_bg, p_g) = (
        dist.marginal(abg),
        dist.marginal(a | given),
        dist.marginal(b | given),
        dist.marginal(given),
    );
    let mut seen = vec![false; p_abg.len()];
    let mut i = 0.0;
    dist.for_each(|c, _| {
        let k = dist.key(abg, c);
        if seen[k] {
            return;
        }
        seen[k] = true;
        let pj = p_abg[k];
        if pj > 0.0 {
            let num = pj * p_g[dist.key(given, c)];
            let den = p_ag[dist.key(a | given, c)] * p_bg[dist.key(b | given, c)];
            i += pj * (num / den).ln();
        }
    });
    Ok(i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCheck {
    pub h_z_given_x: f64,
    pub h_z_given_xy: f64,
    pub i_zy_given_x: f64,
    pub pass: bool,
}

/// Conditioning on more never raises entropy: `H(Z|X,Y) <= H(Z|X)`, and
/// the gap is `I(Z;Y|X)`.
pub fn check_entropy_monotonicity(dist: &JointDistribution) -> Result<EntropyCheck, InfoError> {
    let h_z_given_x = cond_entropy(dist, Vars::Z, Vars::X)?;
    let h_z_given_xy = cond_entropy(dist, Vars::Z, Vars::X | Vars::Y)?;
    let i_zy_given_x = cond_mutual_info(dist, Vars::Z, Vars::Y, Vars::X)?;
    let pass = h_z_given_xy <= h_z_given_x + 1e-12
        && ((h_z_given_x - h_z_given_xy) - i_zy_given_x).abs() <= 1e-10
        && i_zy_given_x >= -1e-12;
    Ok(EntropyCheck {
        h_z_given_x,
        h_z_given_xy,
        i_zy_given_x,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerCheck {
    pub max_error: f64,
    pub cells_checked: usize,
    pub slices_skipped: usize,
    pub pass: bool,
}

/// `sum_y P(y|x) P(z|x,y) = P(z|x)` for every `(x, z)` with `P(x) > 0`.
pub fn check_tower(dist: &JointDistribution) -> Result<TowerCheck, InfoError> {
    dist.validate()?;
    let [nx, ny, nz] = dist.dims;
    let p_x = dist.marginal(Vars::X);
    let p_xy = dist.marginal(Vars::X | Vars::Y);
    let p_xz = dist.marginal(Vars::X | Vars::Z);
    let mut out = TowerCheck {
        max_error: 0.0,
        cells_checked: 0,
        slices_skipped: 0,
        pass: true,
    };
    for x in 0..nx {
        if p_x[x] == 0.0 {
            out.slices_skipped += 1;
            continue;
        }
        for z in 0..nz {
            let mut lhs = 0.0;
            for y in 0..ny {
                let pxy = p_xy[x * ny + y];
                if pxy > 0.0 {
                    lhs += (pxy / p_x[x]) * (dist.get(x, y, z) / pxy);
                }
            }
            let rhs = p_xz[x * nz + z] / p_x[x];
            out.max_error = out.max_error.max((lhs - rhs).abs());
            out.cells_checked += 1;
        }
    }
    out.pass = out.max_error <= 1e-12;
    Ok(out)
}

/// Loss `L(z, z_hat)`, `data[z * n_decisions + z_hat]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    pub n_outcomes: usize,
    pub n_decisions: usize,
    pub data: Vec<f64>,
}

impl LossMatrix {
    pub fn new(n_outcomes: usize, n_decisions: usize, data: Vec<f64>) -> Result<Self, InfoError> {
        if n_outcomes == 0 || n_decisions == 0 || data.len() != n_outcomes * n_decisions {
            return Err(InfoError::InvalidLoss(format!(
                "{n_outcomes}x{n_decisions} needs {} entries, got {}",
                n_outcomes * n_decisions,
                data.len()
            )));
        }
        if data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(InfoError::InvalidLoss("entries must be finite and non-negative".into()));
        }
        Ok(Self {
            n_outcomes,
            n_decisions,
            data,
        })
    }

    pub fn zero_one(n: usize) -> Self {
        let data = (0..n * n).map(|i| if i / n == i % n { 0.0 } else { 1.0 }).collect();
        Self {
            n_outcomes: n,
            n_decisions: n,
            data,
        }
    }

    pub fn random<R: Rng>(n_outcomes: usize, n_decisions: usize, rng: &mut R) -> Self {
        Self {
            n_outcomes,
            n_decisions,
            data: (0..n_outcomes * n_decisions).map(|_| rng.random::<f64>()).collect(),
        }
    }

    fn get(&self, z: usize, d: usize) -> f64 {
        self.data[z * self.n_decisions + d]
    }

    /// Smallest expected loss over decisions for unnormalized weights `w(z)`.
    fn min_risk(&self, w: impl Fn(usize) -> f64) -> f64 {
        (0..self.n_decisions)
            .map(|d| (0..self.n_outcomes).map(|z| w(z) * self.get(z, d)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesRiskCheck {
    pub risk_x: f64,
    pub risk_xy: f64,
    pub pass: bool,
}

/// Bayes risk of predicting `Z` from `X` versus from `(X, Y)`, each with the
/// exhaustively minimized decision per conditioning cell.
pub fn check_bayes_risk(dist: &JointDistribution, loss: &LossMatrix) -> Result<BayesRiskCheck, InfoError> {
    dist.validate()?;
    let [nx, ny, nz] = dist.dims;
    if loss.n_outcomes != nz {
        return Err(InfoError::InvalidLoss(format!(
            "loss has {} outcomes, Z has {nz}",
            loss.n_outcomes
        )));
    }
    let p_xz = dist.marginal(Vars::X | Vars::Z);
    let mut risk_x = 0.0;
    let mut risk_xy = 0.0;
    for x in 0..nx {
        if (0..nz).all(|z| p_xz[x * nz + z] == 0.0) {
            continue;
        }
        risk_x += loss.min_risk(|z| p_xz[x * nz + z]);
        for y in 0..ny {
            if (0..nz).all(|z| dist.get(x, y, z) == 0.0) {
                continue;
            }
            risk_xy += loss.min_risk(|z| dist.get(x, y, z));
        }
    }
    Ok(BayesRiskCheck {
        risk_x,
        risk_xy,
        pass: risk_xy <= risk_x + 1e-12,
    })
}

//! Trajectory error metrics: positional MSE, smoothed-curvature MSE and the
//! discrete Fréchet distance.
//!
//! All metrics treat positions as planar `(lat, lon)` points in degrees.
//! No projection is applied, so values are comparable only within a dataset.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("polyline lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("polyline is empty")]
    EmptyPolyline,
    #[error("batch is empty")]
    EmptyBatch,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<GeoPoint>,
}

impl Polyline {
    pub fn new(points: Vec<GeoPoint>) -> Self {
        Self { points }
    }

    /// Builds a polyline from raw `(lat, lon)` pairs without band checks;
    /// metric inputs are plain planar coordinates.
    pub fn from_latlon(pts: &[(f64, f64)]) -> Self {
        Self {
            points: pts.iter().map(|&(lat, lon)| GeoPoint { lat, lon }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl From<Vec<GeoPoint>> for Polyline {
    fn from(points: Vec<GeoPoint>) -> Self {
        Self { points }
    }
}

#[inline]
fn planar_dist(a: &GeoPoint, b: &GeoPoint) -> f64 {
    (a.lat - b.lat).hypot(a.lon - b.lon)
}

/// Mean squared point-wise position error.
pub fn msep(pred: &Polyline, truth: &Polyline) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptyPolyline);
    }
    let sum: f64 = pred
        .points
        .iter()
        .zip(&truth.points)
        .map(|(p, t)| {
            let (dl, dn) = (p.lat - t.lat, p.lon - t.lon);
            dl * dl + dn * dn
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Per-point curvature in radians per degree of arc. Endpoints are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub kappa: Vec<f64>,
}

fn wrap_pi(a: f64) -> f64 {
    // into (-pi, pi]
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Heading change over mean adjacent segment length at each interior point.
/// A stationary neighbour (zero-length segment) has undefined heading and
/// contributes zero curvature.
pub fn curvature_profile(poly: &Polyline) -> CurvatureProfile {
    let n = poly.len();
    let mut kappa = vec![0.0; n];
    for i in 1..n.saturating_sub(1) {
        let (a, b, c) = (&poly.points[i - 1], &poly.points[i], &poly.points[i + 1]);
        let (d1, d2) = (planar_dist(a, b), planar_dist(b, c));
        if d1 == 0.0 || d2 == 0.0 {
            continue;
        }
        let h1 = (b.lon - a.lon).atan2(b.lat - a.lat);
        let h2 = (c.lon - b.lon).atan2(c.lat - b.lat);
        kappa[i] = wrap_pi(h2 - h1) / (0.5 * (d1 + d2));
    }
    CurvatureProfile { kappa }
}

/// Three-point moving average over interior entries; endpoints stay zero.
pub fn smooth_curvature(profile: &CurvatureProfile) -> CurvatureProfile {
    let k = &profile.kappa;
    let n = k.len();
    let mut out = k.clone();
    for i in 1..n.saturating_sub(1) {
        out[i] = (k[i - 1] + k[i] + k[i + 1]) / 3.0;
    }
    CurvatureProfile { kappa: out }
}

/// Mean squared difference of smoothed curvature profiles.
pub fn msec(pred: &Polyline, truth: &Polyline) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptyPolyline);
    }
    let kp = smooth_curvature(&curvature_profile(pred));
    let kt = smooth_curvature(&curvature_profile(truth));
    let sum: f64 = kp
        .kappa
        .iter()
        .zip(&kt.kappa)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Discrete Fréchet distance, O(n*m) time and O(m) memory.
pub fn discrete_frechet(a: &Polyline, b: &Polyline) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyPolyline);
    }
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, pa) in a.points.iter().enumerate() {
        for (j, pb) in b.points.iter().enumerate() {
            let d = planar_dist(pa, pb);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(cur[j - 1]).min(prev[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// Mean discrete Fréchet distance over a batch of `(pred, truth)` pairs.
pub fn mfd(pairs: &[(Polyline, Polyline)]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let mut sum = 0.0;
    for (p, t) in pairs {
        sum += discrete_frechet(p, t)?;
    }
    Ok(sum / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub msep: f64,
    pub msec: f64,
    pub mfd: f64,
    /// Inference wall time in seconds.
    pub wall_time: f64,
    pub n_samples: usize,
}

impl MetricsReport {
    /// Averages MSEP and MSEC over the batch and computes MFD.
    pub fn from_pairs(pairs: &[(Polyline, Polyline)], wall_time: f64) -> Result<Self, MetricsError> {
        if pairs.is_empty() {
            return Err(MetricsError::EmptyBatch);
        }
        let mut sp = 0.0;
        let mut sc = 0.0;
        for (p, t) in pairs {
            sp += msep(p, t)?;
            sc += msec(p, t)?;
        }
        let b = pairs.len() as f64;
        Ok(Self {
            msep: sp / b,
            msec: sc / b,
            mfd: mfd(pairs)?,
            wall_time,
            n_samples: pairs.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl(p: &[(f64, f64)]) -> Polyline {
        Polyline::from_latlon(p)
    }

    #[test]
    fn msep_examples() {
        let a = pl(&[(0.0, 0.0), (1.0, 1.0), (2.0, 5.0)]);
        assert_eq!(msep(&a, &a).unwrap(), 0.0);
        let shifted = pl(&[(1.0, 0.0), (2.0, 1.0), (3.0, 5.0)]);
        assert_eq!(msep(&shifted, &a).unwrap(), 1.0);
        let p = pl(&[(0.0, 0.0), (0.0, 2.0)]);
        let t = pl(&[(0.0, 0.0), (0.0, 0.0)]);
        assert_eq!(msep(&p, &t).unwrap(), 2.0);
        assert_eq!(msep(&p, &a), Err(MetricsError::LengthMismatch(2, 3)));
    }

    #[test]
    fn curvature_examples() {
        let line = pl(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        assert_eq!(curvature_profile(&line).kappa, vec![0.0; 4]);
        let corner = pl(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]);
        assert_eq!(curvature_profile(&corner).kappa, vec![0.0, PI / 2.0, 0.0]);
        let two = pl(&[(0.0, 0.0), (5.0, 5.0)]);
        assert_eq!(curvature_profile(&two).kappa, vec![0.0, 0.0]);
        let stationary = pl(&[(0.0, 0.0), (0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(curvature_profile(&stationary).kappa, vec![0.0; 3]);
    }

    #[test]
    fn smoothing_examples() {
        let z = CurvatureProfile { kappa: vec![0.0; 5] };
        assert_eq!(smooth_curvature(&z), z);
        let s = smooth_curvature(&CurvatureProfile {
            kappa: vec![0.0, 3.0, 0.0],
        });
        assert_eq!(s.kappa, vec![0.0, 1.0, 0.0]);
        let c = smooth_curvature(&CurvatureProfile {
            kappa: vec![0.0, 2.0, 2.0, 2.0, 2.0, 0.0],
        });
        assert_eq!(&c.kappa[2..4], &[2.0, 2.0]);
        assert_eq!(c.kappa[0], 0.0);
        assert_eq!(c.kappa[5], 0.0);
    }

    #[test]
    fn msec_examples() {
        let corner = pl(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]);
        assert_eq!(msec(&corner, &corner).unwrap(), 0.0);
        let s1 = pl(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        let s2 = pl(&[(5.0, 0.0), (5.0, 3.0), (5.0, 6.0)]);
        assert_eq!(msec(&s1, &s2).unwrap(), 0.0);
        // smoothed corner: [0, pi/6, 0] against zeros
        let straight = pl(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let expected = (PI / 6.0).powi(2) / 3.0;
        assert!((msec(&corner, &straight).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn frechet_examples() {
        let a = pl(&[(0.0, 0.0), (4.0, 0.0)]);
        let b = pl(&[(0.0, 3.0), (4.0, 3.0)]);
        assert_eq!(discrete_frechet(&a, &a).unwrap(), 0.0);
        assert_eq!(discrete_frechet(&a, &b).unwrap(), 3.0);
        assert_eq!(
            discrete_frechet(&a, &Polyline::default()),
            Err(MetricsError::EmptyPolyline)
        );
    }

    #[test]
    fn mfd_examples() {
        let a = pl(&[(0.0, 0.0), (4.0, 0.0)]);
        let b = pl(&[(0.0, 3.0), (4.0, 3.0)]);
        let c = pl(&[(0.0, 1.0), (4.0, 1.0)]);
        assert_eq!(mfd(&[(a.clone(), a.clone()), (b.clone(), b.clone())]).unwrap(), 0.0);
        assert_eq!(mfd(&[(a.clone(), b.clone()), (a.clone(), c)]).unwrap(), 2.0);
        assert_eq!(
            mfd(&[(a.clone(), b.clone())]).unwrap(),
            discrete_frechet(&a, &b).unwrap()
        );
        assert_eq!(mfd(&[]), Err(MetricsError::EmptyBatch));
    }

    #[test]
    fn report_aggregates() {
        let a = pl(&[(0.0, 0.0), (4.0, 0.0)]);
        let b = pl(&[(0.0, 3.0), (4.0, 3.0)]);
        let r = MetricsReport::from_pairs(&[(a, b)], 0.5).unwrap();
        assert_eq!(r.msep, 9.0);
        assert_eq!(r.msec, 0.0);
        assert_eq!(r.mfd, 3.0);
        assert_eq!(r.n_samples, 1);
    }
}

use super::net::{backward, forward};
use super::{PredictorError, PredictorParams};
use crate::ais::{normalize_rows, Features, NormalizationSpec, Window};
use crate::geo::{mean_secant, step, wrap_lon, EarthModel, GeoPoint, VelocityOverGround};

/// Appends the key node's normalized `(lat, lon)` to every row of a
/// 4-channel matrix; without a node the input is returned unchanged.
pub fn assemble_channels(
    features: &Features,
    nkp: Option<&GeoPoint>,
    spec: &NormalizationSpec,
) -> Result<Features, PredictorError> {
    if features.channels != 4 {
        return Err(PredictorError::ShapeMismatch(format!(
            "expected 4 base channels, got {}",
            features.channels
        )));
    }
    let Some(p) = nkp else {
        return Ok(features.clone());
    };
    let (la, lo) = spec.norm_point(p)?;
    let mut out = Features::zeros(features.rows, 6);
    for r in 0..features.rows {
        let row = out.row_mut(r);
        row[..4].copy_from_slice(features.row(r));
        row[4] = la;
        row[5] = lo;
    }
    Ok(out)
}

/// A window prepared for the predictor: its feature matrix (4 or 6
/// channels), raw positions and grid step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    pub features: Features,
    pub positions: Vec<GeoPoint>,
    pub dt: f64,
}

impl TrainingWindow {
    /// `channels == 6` conditions on `nkp`, falling back to the window's own
    /// key node when `nkp` is `None`.
    pub fn new(
        window: &Window,
        spec: &NormalizationSpec,
        channels: usize,
        nkp: Option<GeoPoint>,
        dt: f64,
    ) -> Result<Self, PredictorError> {
        let base = normalize_rows(&window.positions, &window.velocities, None, spec)?;
        let node = match channels {
            4 => None,
            6 => Some(nkp.or(window.nkp).ok_or_else(|| {
                PredictorError::ShapeMismatch("6-channel window needs a key node".into())
            })?),
            c => return Err(PredictorError::ShapeMismatch(format!("unsupported channel count {c}"))),
        };
        Ok(Self {
            features: assemble_channels(&base, node.as_ref(), spec)?,
            positions: window.positions.clone(),
            dt,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows == 0
    }
}

/// Every `(window, t)` pair whose context ends at row `t` and has a next
/// row, taking every `stride`-th `t`.
pub fn sample_index(windows: &[TrainingWindow], context: usize, stride: usize) -> Vec<(usize, usize)> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    for (w, win) in windows.iter().enumerate() {
        if win.len() <= context {
            continue;
        }
        out.extend((context - 1..win.len() - 1).step_by(stride).map(|t| (w, t)));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LossKind {
    Vol,
    Coord,
}

/// `d q / d lat1` for `q = mean_secant(lat0, lat1)`.
fn mean_secant_dlat1(lat0: f64, lat1: f64) -> f64 {
    let d = lat1 - lat0;
    if d.abs() < 1e-4 {
        let (s, t) = (1.0 / lat0.cos(), lat0.tan());
        let f1 = s * t;
        let f2 = s * (t * t + s * s);
        let f3 = s * t * (t * t + 5.0 * s * s);
        f1 / 2.0 + f2 * d / 3.0 + f3 * d * d / 8.0
    } else {
        (1.0 / lat1.cos() - mean_secant(lat0, lat1)) / d
    }
}

pub(crate) struct Ctx<'a> {
    pub spec: &'a NormalizationSpec,
    pub earth: &'a EarthModel,
}

/// Loss at one sample and, when `grad` is given, its parameter gradient
/// scaled by `scale`.
pub(crate) fn sample_term(
    kind: LossKind,
    win: &TrainingWindow,
    t: usize,
    params: &PredictorParams,
    ctx: &Ctx<'_>,
    grad: Option<(&mut [f64], f64)>,
) -> Result<f64, PredictorError> {
    let c = params.context;
    let x = win.features.rows_slice(t + 1 - c, c);
    let trace = forward(x, params);
    let [a, b] = trace.out;
    let next = win.features.row(t + 1);
    let (loss, g) = match kind {
        LossKind::Vol => {
            let (ra, rb) = (a - next[2], b - next[3]);
            (ra * ra + rb * rb, [2.0 * ra, 2.0 * rb])
        }
        LossKind::Coord => {
            let spec = ctx.spec;
            let p0 = win.positions[t];
            let (n, e) = spec.channel_components(a, b);
            let v = VelocityOverGround::from_components(n, e);
            let p1 = step(p0, v, win.dt, ctx.earth).map_err(|source| PredictorError::Geo { index: t, source })?;
            let lon1 = p0.lon + wrap_lon(p1.lon - p0.lon);
            let r_lat = spec.norm_lat(p1.lat) - next[0];
            let r_lon = spec.norm_lon(lon1) - next[1];

            let k = spec.channel_components(1.0, 0.0).0;
            let s = win.dt / ctx.earth.radius;
            let phi0 = p0.lat_rad();
            let phi1 = phi0 + n * s;
            let deg = 180.0 / std::f64::consts::PI;
            let dlat_dn = s * deg;
            let dlon_dn = e * s * mean_secant_dlat1(phi0, phi1) * s * deg;
            let dlon_de = s * mean_secant(phi0, phi1) * deg;
            let gl = 2.0 * r_lat / spec.lat_span();
            let go = 2.0 * r_lon / spec.lon_span();
            let gn = gl * dlat_dn + go * dlon_dn;
            let ge = go * dlon_de;
            (r_lat * r_lat + r_lon * r_lon, [gn * k, ge * k])
        }
    };
    if let Some((grad, scale)) = grad {
        backward(x, params, &trace, [g[0] * scale, g[1] * scale], grad);
    }
    Ok(loss)
}

fn check(windows: &[TrainingWindow], params: &PredictorParams) -> Result<Vec<(usize, usize)>, PredictorError> {
    params.validate()?;
    for w in windows {
        if w.features.channels != params.channels {
            return Err(PredictorError::ShapeMismatch(format!(
                "window has {} channels, model expects {}",
                w.features.channels, params.channels
            )));
        }
    }
    let idx = sample_index(windows, params.context, 1);
    if idx.is_empty() {
        return Err(PredictorError::TooShort(params.context + 1));
    }
    Ok(idx)
}

pub(crate) fn mean_loss(
    kind: LossKind,
    windows: &[TrainingWindow],
    idx: &[(usize, usize)],
    params: &PredictorParams,
    ctx: &Ctx<'_>,
    mut grad: Option<&mut [f64]>,
) -> Result<f64, PredictorError> {
    let scale = 1.0 / idx.len() as f64;
    let mut acc = 0.0;
    for &(w, t) in idx {
        let g = grad.as_deref_mut().map(|g| (g, scale));
        acc += sample_term(kind, &windows[w], t, params, ctx, g)?;
    }
    Ok(acc * scale)
}

/// Teacher-forced velocity loss: mean over every valid step of the squared
/// distance between predicted and true normalized velocity pairs.
pub fn loss_vol(windows: &[TrainingWindow], params: &PredictorParams) -> Result<f64, PredictorError> {
    let idx = check(windows, params)?;
    let spec = NormalizationSpec::new(-1.0, 1.0, -1.0, 1.0)?;
    let ctx = Ctx {
        spec: &spec,
        earth: &EarthModel::default(),
    };
    mean_loss(LossKind::Vol, windows, &idx, params, &ctx, None)
}

/// [`loss_vol`] and its parameter gradient.
pub fn loss_vol_grad(
    windows: &[TrainingWindow],
    params: &PredictorParams,
) -> Result<(f64, Vec<f64>), PredictorError> {
    let idx = check(windows, params)?;
    let spec = NormalizationSpec::new(-1.0, 1.0, -1.0, 1.0)?;
    let ctx = Ctx {
        spec: &spec,
        earth: &EarthModel::default(),
    };
    let mut g = vec![0.0; params.data.len()];
    let l = mean_loss(LossKind::Vol, windows, &idx, params, &ctx, Some(&mut g))?;
    Ok((l, g))
}

/// One-step coordinate loss: each predicted velocity is applied to the true
/// current position with the kinematic step; the result is compared with
/// the true next position in normalized coordinates.
pub fn loss_coord(
    windows: &[TrainingWindow],
    params: &PredictorParams,
    spec: &NormalizationSpec,
    earth: &EarthModel,
) -> Result<f64, PredictorError> {
    let idx = check(windows, params)?;
    mean_loss(LossKind::Coord, windows, &idx, params, &Ctx { spec, earth }, None)
}

/// [`loss_coord`] and its parameter gradient.
pub fn loss_coord_grad(
    windows: &[TrainingWindow],
    params: &PredictorParams,
    spec: &NormalizationSpec,
    earth: &EarthModel,
) -> Result<(f64, Vec<f64>), PredictorError> {
    let idx = check(windows, params)?;
    let mut g = vec![0.0; params.data.len()];
    let l = mean_loss(LossKind::Coord, windows, &idx, params, &Ctx { spec, earth }, Some(&mut g))?;
    Ok((l, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::UniformTrack;
    use crate::geo::velocity_from_displacement;

    pub(crate) fn spec() -> NormalizationSpec {
        NormalizationSpec::new(0.0, 20.0, -60.0, -30.0).unwrap()
    }

    /// Uniform track following fixed north/east speeds, with velocities
    /// recomputed from consecutive positions.
    pub(crate) fn track(n: usize, north: f64, east: f64) -> UniformTrack {
        let e = EarthModel::default();
        let v = VelocityOverGround::from_components(north, east);
        let mut pts = vec![GeoPoint::new(10.0, -45.0).unwrap()];
        for _ in 1..n {
            pts.push(step(*pts.last().unwrap(), v, 300.0, &e).unwrap());
        }
        let mut samples: Vec<_> = pts
            .windows(2)
            .map(|w| (w[0], velocity_from_displacement(w[0], w[1], 300.0, &e).unwrap()))
            .collect();
        let last = samples.last().unwrap().1;
        samples.push((*pts.last().unwrap(), last));
        UniformTrack {
            mmsi: 1,
            track_id: None,
            t0: 0.0,
            dt: 300.0,
            samples,
        }
    }

    fn tw(track: &UniformTrack, channels: usize) -> TrainingWindow {
        let w = Window::from_track(track, 0, track.len())
            .unwrap()
            .with_label("K".into(), GeoPoint::new(15.0, -40.0).unwrap());
        TrainingWindow::new(&w, &spec(), channels, None, 300.0).unwrap()
    }

    #[test]
    fn assemble_identity_and_broadcast() {
        let f = tw(&track(5, 5.0, 5.0), 4).features;
        let s = spec();
        assert_eq!(assemble_channels(&f, None, &s).unwrap(), f);
        let a = assemble_channels(&f, Some(&GeoPoint::new(15.0, -40.0).unwrap()), &s).unwrap();
        let b = assemble_channels(&f, Some(&GeoPoint::new(5.0, -50.0).unwrap()), &s).unwrap();
        for r in 0..f.rows {
            assert_eq!(&a.row(r)[..4], f.row(r));
            assert_eq!(&a.row(r)[..4], &b.row(r)[..4]);
            assert_eq!(&a.row(r)[4..], &[s.norm_lat(15.0), s.norm_lon(-40.0)]);
            assert_ne!(&a.row(r)[4..], &b.row(r)[4..]);
        }
        let far = GeoPoint::new(40.0, -40.0).unwrap();
        assert!(assemble_channels(&f, Some(&far), &s).is_err());
    }

    #[test]
    fn zero_params_on_stationary_track() {
        let w = vec![tw(&track(20, 0.0, 0.0), 4)];
        let p = PredictorParams::zeros(4, 4, 3);
        assert_eq!(loss_vol(&w, &p).unwrap(), 0.0);
        assert_eq!(loss_coord(&w, &p, &spec(), &EarthModel::default()).unwrap(), 0.0);
    }

    fn memorizing(target: (f64, f64), channels: usize) -> PredictorParams {
        let mut p = PredictorParams::zeros(4, channels, 3);
        let o = p.offsets();
        p.data[o.b3] = target.0;
        p.data[o.b3 + 1] = target.1;
        p
    }

    #[test]
    fn memorized_constant_velocity() {
        let tr = track(30, 4.0, 6.0);
        let w = vec![tw(&tr, 6)];
        let s = spec();
        let (a, b) = s.velocity_channels(&tr.samples[0].1);
        let p = memorizing((a, b), 6);
        assert!(loss_vol(&w, &p).unwrap() < 1e-12);
        assert!(loss_coord(&w, &p, &s, &EarthModel::default()).unwrap() < 1e-12);
    }

    #[test]
    fn zero_prediction_costs_squared_displacement() {
        let tr = track(12, 4.0, 6.0);
        let w = vec![tw(&tr, 4)];
        let s = spec();
        let p = PredictorParams::zeros(4, 4, 3);
        let f = &w[0].features;
        let mut acc = 0.0;
        let mut n = 0;
        for t in 3..f.rows - 1 {
            let dl = f.get(t + 1, 0) - f.get(t, 0);
            let dn = f.get(t + 1, 1) - f.get(t, 1);
            acc += dl * dl + dn * dn;
            n += 1;
        }
        let got = loss_coord(&w, &p, &s, &EarthModel::default()).unwrap();
        assert!((got - acc / n as f64).abs() < 1e-15);
    }

    #[test]
    fn duplicated_batch_same_loss() {
        let w = vec![tw(&track(20, 3.0, -2.0), 4)];
        let p = PredictorParams::init(4, 4, 3, 1);
        let two = vec![w[0].clone(), w[0].clone()];
        assert!((loss_vol(&w, &p).unwrap() - loss_vol(&two, &p).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn too_short_and_channel_mismatch() {
        let w = vec![tw(&track(4, 3.0, 0.0), 4)];
        assert!(matches!(
            loss_vol(&w, &PredictorParams::zeros(4, 4, 3)),
            Err(PredictorError::TooShort(_))
        ));
        let w = vec![tw(&track(10, 3.0, 0.0), 4)];
        assert!(loss_vol(&w, &PredictorParams::zeros(4, 6, 3)).is_err());
    }

    #[test]
    fn secant_derivative_branches_meet() {
        let lat0 = 0.7;
        for d in [0.9e-4, 1.1e-4, 3e-3] {
            let h = 1e-7;
            let fd = (mean_secant(lat0, lat0 + d + h) - mean_secant(lat0, lat0 + d - h)) / (2.0 * h);
            let got = mean_secant_dlat1(lat0, lat0 + d);
            assert!((got - fd).abs() < 1e-6 * fd.abs(), "d={d}: {got} vs {fd}");
        }
    }

    fn fd_check(kind: LossKind, channels: usize, seed: u64) {
        let tr = track(14, 5.0 + seed as f64, -3.0);
        let mut w = vec![tw(&tr, channels)];
        // Perturb targets so the loss is not at a minimum.
        for (i, v) in w[0].features.data.iter_mut().enumerate() {
            *v += 0.01 * ((i as f64 * 1.7 + seed as f64).sin());
        }
        let p = PredictorParams::init(4, channels, 5, seed);
        let s = spec();
        let e = EarthModel::default();
        let loss = |q: &PredictorParams| match kind {
            LossKind::Vol => loss_vol(&w, q).unwrap(),
            LossKind::Coord => loss_coord(&w, q, &s, &e).unwrap(),
        };
        let g = match kind {
            LossKind::Vol => loss_vol_grad(&w, &p).unwrap().1,
            LossKind::Coord => loss_coord_grad(&w, &p, &s, &e).unwrap().1,
        };
        let h = 1e-5;
        for i in 0..p.data.len() {
            let mut plus = p.clone();
            plus.data[i] += h;
            let mut minus = p.clone();
            minus.data[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!(
                (g[i] - fd).abs() <= 1e-4 * g[i].abs().max(fd.abs()) + 1e-8,
                "{kind:?} param {i}: {} vs {fd}",
                g[i]
            );
        }
    }

    #[test]
    fn vol_gradient_matches_central_differences() {
        fd_check(LossKind::Vol, 4, 1);
        fd_check(LossKind::Vol, 6, 2);
    }

    #[test]
    fn coord_gradient_matches_central_differences() {
        fd_check(LossKind::Coord, 4, 3);
        fd_check(LossKind::Coord, 6, 4);
    }
}

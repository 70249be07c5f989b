use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::net::forward;
use super::{assemble_channels, PredictorError, PredictorParams};
use crate::ais::{normalize_rows, NormalizationSpec, Window};
use crate::geo::{step, velocity_from_displacement, wrap_lon, EarthModel, GeoPoint};
use crate::metrics::Polyline;
use crate::nkp::{encoder_features, predict_nkp, EncoderParams, NkpPrediction, ReferenceDb};

/// Observed history, how far to forecast and the optional key node to
/// condition on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTask {
    pub history: Window,
    pub horizon: usize,
    pub nkp: Option<GeoPoint>,
    pub dt: f64,
}

/// Autoregressive forecast: predict a velocity from the rolling context,
/// advance with the kinematic step, append the new row, repeat. Returns the
/// `horizon` forecast positions (the history's last point excluded).
pub fn rollout_predict(
    task: &PredictionTask,
    params: &PredictorParams,
    spec: &NormalizationSpec,
    earth: &EarthModel,
) -> Result<Polyline, PredictorError> {
    params.validate()?;
    let want = if task.nkp.is_some() { 6 } else { 4 };
    if params.channels != want {
        return Err(PredictorError::ShapeMismatch(format!(
            "{}-channel model given a {want}-channel task",
            params.channels
        )));
    }
    let c = params.context;
    let hist = &task.history;
    if hist.len() < c {
        return Err(PredictorError::TooShort(c));
    }
    if task.horizon == 0 {
        return Err(PredictorError::InvalidConfig("horizon must be at least 1".into()));
    }
    let base = normalize_rows(&hist.positions, &hist.velocities, None, spec)?;
    let feats = assemble_channels(&base, task.nkp.as_ref(), spec)?;
    let node_cols: Vec<f64> = feats.row(0)[4..].to_vec();

    let mut ctx: VecDeque<f64> = feats.rows_slice(hist.len() - c, c).iter().copied().collect();
    let mut x = vec![0.0; c * want];
    let mut p = *hist.positions.last().expect("nonempty history");
    let mut lon_unwrapped = p.lon;
    let mut out = Vec::with_capacity(task.horizon);
    for index in 0..task.horizon {
        for (dst, src) in x.iter_mut().zip(ctx.iter()) {
            *dst = *src;
        }
        let [a, b] = forward(&x, params).out;
        let v = spec.velocity_from_channels(a, b);
        let next = step(p, v, task.dt, earth).map_err(|source| PredictorError::Geo { index, source })?;
        lon_unwrapped += wrap_lon(next.lon - p.lon);
        p = next;
        out.push(p);
        ctx.drain(..want);
        ctx.extend([spec.norm_lat(p.lat), spec.norm_lon(lon_unwrapped), a, b]);
        ctx.extend(node_cols.iter().copied());
    }
    Ok(Polyline::new(out))
}

/// Holds the last observed velocity (from the final two history points)
/// for the whole horizon.
pub fn cvm_baseline(task: &PredictionTask, earth: &EarthModel) -> Result<Polyline, PredictorError> {
    let pts = &task.history.positions;
    if pts.len() < 2 {
        return Err(PredictorError::TooShort(2));
    }
    let last = pts[pts.len() - 1];
    let v = velocity_from_displacement(pts[pts.len() - 2], last, task.dt, earth)
        .map_err(|source| PredictorError::Geo { index: 0, source })?;
    let mut out = Vec::with_capacity(task.horizon);
    let mut p = last;
    for index in 0..task.horizon {
        p = step(p, v, task.dt, earth).map_err(|source| PredictorError::Geo { index, source })?;
        out.push(p);
    }
    Ok(Polyline::new(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratedPrediction {
    pub polyline: Polyline,
    pub nkp: NkpPrediction,
    pub node: GeoPoint,
}

/// Infers the key node from the history by threshold voting, then rolls
/// the 6-channel predictor out conditioned on it. `task.nkp` is ignored.
#[allow(clippy::too_many_arguments)]
pub fn integrated_predict(
    task: &PredictionTask,
    db: &ReferenceDb,
    encoder: &EncoderParams,
    predictor: &PredictorParams,
    tau: f64,
    spec: &NormalizationSpec,
    earth: &EarthModel,
) -> Result<IntegratedPrediction, PredictorError> {
    if predictor.channels != 6 {
        return Err(PredictorError::ShapeMismatch("integrated inference needs a 6-channel predictor".into()));
    }
    let feats = encoder_features(&task.history, spec)?;
    let nkp = predict_nkp(&feats, db, encoder, tau)?;
    let node = *db
        .nodes
        .get(&nkp.label)
        .ok_or_else(|| crate::nkp::NkpError::UnknownLabel(nkp.label.clone()))?;
    let conditioned = PredictionTask {
        nkp: Some(node),
        ..task.clone()
    };
    let polyline = rollout_predict(&conditioned, predictor, spec, earth)?;
    Ok(IntegratedPrediction { polyline, nkp, node })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::VelocityOverGround;
    use crate::metrics::msep;
    use crate::nkp::{Embedding, EntryMeta};

    fn spec() -> NormalizationSpec {
        NormalizationSpec::new(0.0, 20.0, -60.0, -30.0).unwrap()
    }

    fn straight(n: usize, v: VelocityOverGround) -> Vec<GeoPoint> {
        let e = EarthModel::default();
        let mut pts = vec![GeoPoint::new(10.0, -45.0).unwrap()];
        for _ in 1..n {
            pts.push(step(*pts.last().unwrap(), v, 300.0, &e).unwrap());
        }
        pts
    }

    fn task(n: usize, horizon: usize, v: VelocityOverGround, nkp: Option<GeoPoint>) -> (PredictionTask, Vec<GeoPoint>) {
        let pts = straight(n + horizon, v);
        let history = Window {
            mmsi: 1,
            track_t0: 0.0,
            start: 0,
            positions: pts[..n].to_vec(),
            velocities: vec![v; n],
            label: None,
            nkp: None,
        };
        (
            PredictionTask {
                history,
                horizon,
                nkp,
                dt: 300.0,
            },
            pts[n..].to_vec(),
        )
    }

    #[test]
    fn zero_params_stay_put() {
        let v = VelocityOverGround::from_components(5.0, 5.0);
        let (t, _) = task(8, 5, v, None);
        let p = PredictorParams::zeros(4, 4, 3);
        let out = rollout_predict(&t, &p, &spec(), &EarthModel::default()).unwrap();
        assert_eq!(out.len(), 5);
        let last = *t.history.positions.last().unwrap();
        assert!(out.points.iter().all(|q| *q == last));
    }

    fn memorizing(v: VelocityOverGround, channels: usize) -> PredictorParams {
        let mut p = PredictorParams::zeros(4, channels, 3);
        let o = p.offsets();
        let (a, b) = spec().velocity_channels(&v);
        p.data[o.b3] = a;
        p.data[o.b3 + 1] = b;
        p
    }

    #[test]
    fn horizon_one_is_single_step() {
        let v = VelocityOverGround::from_components(3.0, -4.0);
        let (t, _) = task(8, 1, v, None);
        let p = memorizing(v, 4);
        let e = EarthModel::default();
        let out = rollout_predict(&t, &p, &spec(), &e).unwrap();
        let last = *t.history.positions.last().unwrap();
        let want = step(last, spec().velocity_from_channels(p.data[p.offsets().b3], p.data[p.offsets().b3 + 1]), 300.0, &e).unwrap();
        assert_eq!(out.points, vec![want]);
    }

    #[test]
    fn memorized_velocity_tracks_truth() {
        let v = VelocityOverGround::from_components(6.0, 2.0);
        let (t, truth) = task(20, 50, v, Some(GeoPoint::new(15.0, -40.0).unwrap()));
        let p = memorizing(v, 6);
        let out = rollout_predict(&t, &p, &spec(), &EarthModel::default()).unwrap();
        assert!(msep(&out, &Polyline::new(truth)).unwrap() < 1e-6);
    }

    #[test]
    fn channel_flag_must_match_task() {
        let v = VelocityOverGround::from_components(6.0, 2.0);
        let (t, _) = task(20, 5, v, None);
        let p = memorizing(v, 6);
        assert!(matches!(
            rollout_predict(&t, &p, &spec(), &EarthModel::default()),
            Err(PredictorError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn cvm_on_straight_and_stationary() {
        let e = EarthModel::default();
        let v = VelocityOverGround::from_components(6.0, 2.0);
        let (t, truth) = task(20, 30, v, None);
        let out = cvm_baseline(&t, &e).unwrap();
        assert!(msep(&out, &Polyline::new(truth)).unwrap() < 1e-16);
        let (t, _) = task(5, 4, VelocityOverGround::ZERO, None);
        let out = cvm_baseline(&t, &e).unwrap();
        assert!(out.points.iter().all(|q| *q == t.history.positions[0]));
        let mut short = t.clone();
        short.history.positions.truncate(1);
        assert!(cvm_baseline(&short, &e).is_err());
    }

    #[test]
    fn integrated_uses_voted_node() {
        let e = EarthModel::default();
        let s = spec();
        let v = VelocityOverGround::from_components(6.0, 2.0);
        let (t, _) = task(20, 10, v, None);
        let enc = EncoderParams::init(8, 4, 1);
        let query = crate::nkp::encode(&encoder_features(&t.history, &s).unwrap(), &enc).unwrap();
        let node = GeoPoint::new(15.0, -40.0).unwrap();
        let mut db = ReferenceDb::default();
        db.append(query, "K".into(), Some(node), EntryMeta::default()).unwrap();
        let far = Embedding::from_raw(vec![1.0; 4]).unwrap();
        db.append(far, "W".into(), Some(GeoPoint::new(5.0, -50.0).unwrap()), EntryMeta::default())
            .unwrap();
        let pred = PredictorParams::init(4, 6, 5, 2);
        let got = integrated_predict(&t, &db, &enc, &pred, 0.99, &s, &e).unwrap();
        assert_eq!(got.nkp.label.as_str(), "K");
        let direct = rollout_predict(&PredictionTask { nkp: Some(node), ..t.clone() }, &pred, &s, &e).unwrap();
        assert_eq!(got.polyline, direct);
        assert!(integrated_predict(&t, &db, &enc, &PredictorParams::init(4, 4, 5, 2), 0.5, &s, &e).is_err());
    }
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{mean_loss, sample_index, Ctx, LossKind, TrainingWindow};
use super::{PredictorError, PredictorParams};
use crate::ais::NormalizationSpec;
use crate::geo::EarthModel;

/// Alternating schedule: each cycle runs `vol_epochs` of velocity-loss
/// descent followed by `bc_epochs` of coordinate-loss descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub vol_epochs: usize,
    pub bc_epochs: usize,
    pub cycles: usize,
    pub learning_rate: f64,
    /// Heavy-ball momentum; 0 is plain gradient descent.
    pub momentum: f64,
    pub batch_size: usize,
    /// Use every `sample_stride`-th context of each window.
    pub sample_stride: usize,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            vol_epochs: 50,
            bc_epochs: 10,
            cycles: 1,
            learning_rate: 7e-5,
            momentum: 0.0,
            batch_size: 32,
            sample_stride: 1,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<(), PredictorError> {
        let bad = |m: &str| Err(PredictorError::InvalidConfig(m.into()));
        if self.batch_size == 0 || self.sample_stride == 0 {
            return bad("batch_size and sample_stride must be positive");
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
pub struct PredictorTraining {
    pub params: PredictorParams,
    /// Mean mini-batch velocity loss of every velocity epoch, in order.
    pub vol_curve: Vec<f64>,
    /// Mean mini-batch coordinate loss of every coordinate epoch.
    pub coord_curve: Vec<f64>,
}

/// Seeded mini-batch gradient descent alternating between the velocity and
/// coordinate losses.
pub fn train_alternating(
    windows: &[TrainingWindow],
    schedule: &TrainSchedule,
    params0: PredictorParams,
    spec: &NormalizationSpec,
    earth: &EarthModel,
) -> Result<PredictorTraining, PredictorError> {
    schedule.validate()?;
    params0.validate()?;
    if windows.is_empty() {
        return Err(PredictorError::EmptyDataset);
    }
    if let Some(w) = windows.iter().find(|w| w.features.channels != params0.channels) {
        return Err(PredictorError::ShapeMismatch(format!(
            "window has {} channels, model expects {}",
            w.features.channels, params0.channels
        )));
    }
    let mut idx = sample_index(windows, params0.context, schedule.sample_stride);
    if idx.is_empty() {
        return Err(PredictorError::TooShort(params0.context + 1));
    }
    let ctx = Ctx { spec, earth };
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut params = params0;
    let mut velocity = vec![0.0; params.data.len()];
    let mut grad = vec![0.0; params.data.len()];
    let mut out = PredictorTraining {
        params: params.clone(),
        vol_curve: Vec::new(),
        coord_curve: Vec::new(),
    };
    for _ in 0..schedule.cycles {
        let phases = [
            (LossKind::Vol, schedule.vol_epochs),
            (LossKind::Coord, schedule.bc_epochs),
        ];
        for (kind, epochs) in phases {
            for _ in 0..epochs {
                idx.shuffle(&mut rng);
                let mut total = 0.0;
                for batch in idx.chunks(schedule.batch_size) {
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let l = mean_loss(kind, windows, batch, &params, &ctx, Some(&mut grad))?;
                    total += l * batch.len() as f64;
                    for ((p, v), g) in params.data.iter_mut().zip(&mut velocity).zip(&grad) {
                        *v = schedule.momentum * *v - schedule.learning_rate * g;
                        *p += *v;
                    }
                }
                if !params.data.iter().all(|v| v.is_finite()) {
                    return Err(PredictorError::NonFinite);
                }
                let mean = total / idx.len() as f64;
                match kind {
                    LossKind::Vol => out.vol_curve.push(mean),
                    LossKind::Coord => out.coord_curve.push(mean),
                }
            }
        }
    }
    out.params = params;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::Window;
    use crate::geo::{step, GeoPoint, VelocityOverGround};
    use crate::predictor::loss_vol;

    fn spec() -> NormalizationSpec {
        NormalizationSpec::new(0.0, 20.0, -60.0, -30.0).unwrap()
    }

    fn windows(channels: usize) -> Vec<TrainingWindow> {
        let e = EarthModel::default();
        let v = VelocityOverGround::from_components(6.0, 3.0);
        let mut positions = vec![GeoPoint::new(10.0, -45.0).unwrap()];
        for _ in 0..40 {
            positions.push(step(*positions.last().unwrap(), v, 300.0, &e).unwrap());
        }
        let w = Window {
            mmsi: 1,
            track_t0: 0.0,
            start: 0,
            velocities: vec![v; positions.len()],
            positions,
            label: Some("K".into()),
            nkp: Some(GeoPoint::new(15.0, -40.0).unwrap()),
        };
        vec![TrainingWindow::new(&w, &spec(), channels, None, 300.0).unwrap()]
    }

    fn schedule() -> TrainSchedule {
        TrainSchedule {
            vol_epochs: 5,
            bc_epochs: 2,
            cycles: 2,
            learning_rate: 0.05,
            batch_size: 8,
            seed: 4,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_and_curves_sized() {
        let w = windows(6);
        let p0 = PredictorParams::init(4, 6, 8, 1);
        let e = EarthModel::default();
        let a = train_alternating(&w, &schedule(), p0.clone(), &spec(), &e).unwrap();
        let b = train_alternating(&w, &schedule(), p0, &spec(), &e).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.vol_curve.len(), 10);
        assert_eq!(a.coord_curve.len(), 4);
    }

    #[test]
    fn zero_cycles_returns_initial_params() {
        let w = windows(4);
        let p0 = PredictorParams::init(4, 4, 8, 1);
        let s = TrainSchedule {
            cycles: 0,
            ..schedule()
        };
        let out = train_alternating(&w, &s, p0.clone(), &spec(), &EarthModel::default()).unwrap();
        assert_eq!(out.params, p0);
    }

    #[test]
    fn first_cycle_lowers_velocity_loss() {
        let w = windows(4);
        let p0 = PredictorParams::init(4, 4, 8, 1);
        let before = loss_vol(&w, &p0).unwrap();
        let s = TrainSchedule {
            cycles: 1,
            ..schedule()
        };
        let out = train_alternating(&w, &s, p0, &spec(), &EarthModel::default()).unwrap();
        assert!(loss_vol(&w, &out.params).unwrap() < before);
    }

    #[test]
    fn empty_dataset_rejected() {
        let p0 = PredictorParams::init(4, 4, 8, 1);
        assert!(matches!(
            train_alternating(&[], &schedule(), p0, &spec(), &EarthModel::default()),
            Err(PredictorError::EmptyDataset)
        ));
    }
}

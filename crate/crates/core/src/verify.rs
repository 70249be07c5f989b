//! Invariant suite: independent oracles (RK4 integration of the constant
//! course velocity field, exhaustive Fréchet coupling enumeration, central
//! finite differences) and the checks built on them.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ais::{Features, NormalizationSpec, UniformTrack, Window};
use crate::geo::{
    delta_lon_general, delta_lon_limit, one_step_consistency, rollout, step, velocity_from_displacement,
    wrap_lon, EarthModel, GeoPoint, VelocityOverGround,
};
use crate::info::{check_bayes_risk, check_entropy_monotonicity, check_tower, JointDistribution, LossMatrix};
use crate::metrics::{curvature_profile, discrete_frechet, msec, Polyline};
use crate::nkp::{tcl_grad, EncoderParams};
use crate::predictor::{forward_step, forward_step_grad, loss_coord_grad, loss_vol_grad, PredictorParams, TrainingWindow};

/// Outcome of one check. `worst` is the check's own figure of merit (an
/// error, a ratio, or a failure count) and `limit` the bound it must meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub instances: usize,
    pub worst: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, instances: usize, worst: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            instances,
            worst,
            limit,
            pass: worst <= limit,
        }
    }
}

/// Fourth-order Runge-Kutta integration of `dlat/dt = v cos(c) / R`,
/// `dlon/dt = v sin(c) / (R cos lat)`. Returns `(lat, lon)` in degrees,
/// longitude unwrapped.
pub fn rk4_rhumb(p: GeoPoint, v: VelocityOverGround, dt: f64, substep: f64, earth: &EarthModel) -> (f64, f64) {
    let (vn, ve) = (v.sog * v.cog.cos() / earth.radius, v.sog * v.cog.sin() / earth.radius);
    let f = |lat: f64| ve / lat.cos();
    let n = (dt / substep).round().max(1.0) as usize;
    let h = dt / n as f64;
    let (mut lat, mut lon) = (p.lat.to_radians(), p.lon.to_radians());
    for _ in 0..n {
        let k1 = f(lat);
        let k2 = f(lat + 0.5 * h * vn);
        let k4 = f(lat + h * vn);
        lon += h / 6.0 * (k1 + 4.0 * k2 + k4);
        lat += h * vn;
    }
    (lat.to_degrees(), lon.to_degrees())
}

fn random_point<R: Rng>(rng: &mut R, max_lat: f64) -> GeoPoint {
    GeoPoint::new(rng.random_range(-max_lat..max_lat), rng.random_range(-180.0..180.0)).expect("in range")
}

fn random_velocity<R: Rng>(rng: &mut R, max_sog: f64) -> VelocityOverGround {
    VelocityOverGround::new(rng.random_range(0.0..max_sog), rng.random_range(0.0..TAU)).expect("valid")
}

/// Largest per-coordinate gap (degrees) between `step` and the RK4 oracle
/// over `n` random general-heading fixtures.
pub fn rk4_agreement(n: usize, substep: f64, seed: u64) -> Check {
    let earth = EarthModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let p = random_point(&mut rng, 60.0);
        let mut v = random_velocity(&mut rng, 15.0);
        if v.cog.cos().abs() < 1e-3 {
            v = VelocityOverGround::new(v.sog, v.cog + 0.01).expect("valid");
        }
        let dt = rng.random_range(60.0..600.0);
        let q = step(p, v, dt, &earth).expect("inside band");
        let (lat, lon) = rk4_rhumb(p, v, dt, substep, &earth);
        worst = worst.max((q.lat - lat).abs()).max(wrap_lon(q.lon - lon).abs());
    }
    Check::at_most("step matches RK4 oracle (deg)", n, worst, 1e-9)
}

/// Largest `one_step_consistency` over random tracks whose velocities come
/// from `velocity_from_displacement`.
pub fn kinematic_consistency(n_tracks: usize, len: usize, seed: u64) -> Check {
    let earth = EarthModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n_tracks {
        let mut pts = vec![random_point(&mut rng, 60.0)];
        while pts.len() < len {
            let last = *pts.last().expect("nonempty");
            let next = GeoPoint::new(
                last.lat + rng.random_range(-0.03..0.03),
                wrap_lon(last.lon + rng.random_range(-0.03..0.03)),
            )
            .expect("in range");
            pts.push(next);
        }
        let mut samples: Vec<(GeoPoint, VelocityOverGround)> = pts
            .windows(2)
            .map(|w| (w[0], velocity_from_displacement(w[0], w[1], 300.0, &earth).expect("valid dt")))
            .collect();
        let last_v = samples.last().map(|s| s.1).unwrap_or(VelocityOverGround::ZERO);
        samples.push((*pts.last().expect("nonempty"), last_v));
        let track = UniformTrack {
            mmsi: 1,
            track_id: None,
            t0: 0.0,
            dt: 300.0,
            samples,
        };
        worst = worst.max(one_step_consistency(&track, &earth).expect("long enough"));
    }
    Check::at_most("one-step consistency (deg^2)", n_tracks, worst, 1e-12)
}

/// General versus limit longitude formula at `|cos(course)| = 1e-4`.
pub fn limit_continuity(n: usize, seed: u64) -> Check {
    let earth = EarthModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let delta = 1e-4f64.acos();
    for i in 0..n {
        let lat0 = rng.random_range(-60.0f64..60.0).to_radians();
        let sog = rng.random_range(1.0..15.0);
        let dt = rng.random_range(60.0..600.0);
        let cog = [delta, PI - delta, PI + delta, TAU - delta][i % 4];
        let lat1 = lat0 + sog * cog.cos() * dt / earth.radius;
        // Both branches must describe the step actually taken after `lat1` rounds.
        let dt = (lat1 - lat0) * earth.radius / (sog * cog.cos());
        let g = delta_lon_general(lat0, lat1, cog);
        let l = delta_lon_limit(lat0, lat1, sog, cog, dt, earth.radius);
        worst = worst.max((g - l).abs().to_degrees());
    }
    Check::at_most("limit branch continuity (deg)", n, worst, 1e-10)
}

/// Ratio of final to initial deviation after perturbing the start of a
/// random rollout by `1e-6` degrees.
pub fn rollout_stability(n: usize, steps: usize, seed: u64) -> Check {
    let earth = EarthModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let eps = 1e-6;
    for _ in 0..n {
        let start = GeoPoint::new(rng.random_range(-45.0..45.0), rng.random_range(-180.0..180.0)).expect("in range");
        let dir = rng.random_range(0.0..TAU);
        let moved = GeoPoint::new(start.lat + eps * dir.cos(), start.lon + eps * dir.sin()).expect("in range");
        let vels: Vec<_> = (0..steps).map(|_| random_velocity(&mut rng, 15.0)).collect();
        let a = rollout(start, &vels, 300.0, &earth).expect("inside band");
        let b = rollout(moved, &vels, 300.0, &earth).expect("inside band");
        let (pa, pb) = (a.last().expect("nonempty"), b.last().expect("nonempty"));
        let dev = (pa.lat - pb.lat).hypot(wrap_lon(pa.lon - pb.lon));
        worst = worst.max(dev / eps);
    }
    Check::at_most("rollout perturbation growth (x)", n, worst, 10.0)
}

/// Minimum over every monotone coupling of the maximum matched distance,
/// by explicit path enumeration.
pub fn frechet_exhaustive(a: &Polyline, b: &Polyline) -> f64 {
    fn walk(a: &[GeoPoint], b: &[GeoPoint], i: usize, j: usize, sofar: f64, best: &mut f64) {
        let d = (a[i].lat - b[j].lat).hypot(a[i].lon - b[j].lon);
        let m = sofar.max(d);
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(m);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, m, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, m, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, m, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(&a.points, &b.points, 0, 0, 0.0, &mut best);
    best
}

fn random_polyline<R: Rng>(rng: &mut R, max_points: usize) -> Polyline {
    let n = rng.random_range(1..=max_points);
    Polyline::new(
        (0..n)
            .map(|_| GeoPoint::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)).expect("in range"))
            .collect(),
    )
}

/// Number of random pairs on which the dynamic program and the exhaustive
/// oracle disagree (bitwise).
pub fn frechet_oracle(n: usize, max_points: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<_> = (0..n)
        .map(|_| (random_polyline(&mut rng, max_points), random_polyline(&mut rng, max_points)))
        .collect();
    let mismatches = pairs
        .par_iter()
        .filter(|(a, b)| discrete_frechet(a, b).expect("nonempty").to_bits() != frechet_exhaustive(a, b).to_bits())
        .count();
    Check::at_most("Frechet equals exhaustive coupling (mismatches)", n, mismatches as f64, 0.0)
}

/// Circle sampling, straight-line and interpolated-straight degeneracy.
pub fn curvature_checks() -> Vec<Check> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for r in [0.05, 0.5, 2.0, 5.0] {
        for dphi in [0.05, 0.02, 0.005] {
            let pts: Vec<GeoPoint> = (0..60)
                .map(|k| {
                    let a = k as f64 * dphi;
                    GeoPoint::new(10.0 + r * a.cos(), -40.0 + r * a.sin()).expect("in range")
                })
                .collect();
            let prof = curvature_profile(&Polyline::new(pts));
            for k in &prof.kappa[1..prof.kappa.len() - 1] {
                worst = worst.max((k.abs() * r - 1.0).abs());
            }
            count += 1;
        }
    }
    let circle = Check::at_most("circle curvature relative error", count, worst, 0.05);

    let line = |a: (f64, f64), d: (f64, f64), n: usize| {
        Polyline::new(
            (0..n)
                .map(|k| GeoPoint::new(a.0 + k as f64 * d.0, a.1 + k as f64 * d.1).expect("in range"))
                .collect(),
        )
    };
    let straight = msec(&line((1.0, 2.0), (0.25, 0.125), 40), &line((-5.0, 7.0), (0.0625, -0.5), 40)).expect("same length");
    let straight = Check::at_most("msec of two straight lines", 1, straight, 0.0);

    // exactly representable steps keep segment headings bit-identical;
    // the last case is evenly interpolated output between two waypoints
    let interp = line((10.0, -45.0), (0.015625, 0.0078125), 64);
    let prof = curvature_profile(&interp);
    let max_k = prof.kappa.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let interp = Check::at_most("interpolated straight output curvature", 1, max_k, 0.0);
    vec![circle, straight, interp]
}

fn grad_ratio(g: f64, fd: f64) -> f64 {
    (g - fd).abs() / (1e-4 * g.abs().max(fd.abs()) + 1e-8)
}

fn fd_audit(params: &[f64], grad: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let h = 1e-5;
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = f(&p);
        p[i] = orig - h;
        let dn = f(&p);
        p[i] = orig;
        worst = worst.max(grad_ratio(grad[i], (up - dn) / (2.0 * h)));
    }
    worst
}

fn random_features<R: Rng>(rng: &mut R, rows: usize, channels: usize) -> Features {
    let mut f = Features::zeros(rows, channels);
    f.data.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    f
}

fn random_window<R: Rng>(rng: &mut R, len: usize, earth: &EarthModel) -> Window {
    let v0 = VelocityOverGround::new(rng.random_range(3.0..12.0), rng.random_range(0.0..TAU)).expect("valid");
    let mut pos = vec![GeoPoint::new(rng.random_range(-30.0..30.0), rng.random_range(-170.0..170.0)).expect("in range")];
    let mut vel = vec![v0];
    let mut v = v0;
    for _ in 1..len {
        v = VelocityOverGround::new(v.sog, v.cog + rng.random_range(-0.2..0.2)).expect("valid");
        pos.push(step(*pos.last().expect("nonempty"), v, 300.0, earth).expect("inside band"));
        vel.push(v);
    }
    let node = GeoPoint::new(pos[0].lat + rng.random_range(-2.0..2.0), pos[0].lon + rng.random_range(-2.0..2.0))
        .expect("in range");
    Window {
        mmsi: 1,
        track_t0: 0.0,
        start: 0,
        positions: pos,
        velocities: vel,
        label: Some("K".into()),
        nkp: Some(node),
    }
}

/// Analytic gradients against central finite differences (step `1e-5`,
/// tolerance `1e-4` relative plus `1e-8` absolute). `worst` is the largest
/// error as a fraction of the tolerance.
pub fn gradient_audit(n: usize, seed: u64) -> Vec<Check> {
    let earth = EarthModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut tcl = 0.0f64;
    for i in 0..n {
        let params = EncoderParams::init(5, 3, seed + i as u64);
        let pairs: Vec<_> = (0..4)
            .map(|_| {
                let (ra, rb) = (rng.random_range(2..6), rng.random_range(2..6));
                (random_features(&mut rng, ra, 4), random_features(&mut rng, rb, 4))
            })
            .collect();
        let y: Vec<bool> = (0..4).map(|k| k % 2 == 0).collect();
        let margin = rng.random_range(0.5..1.5);
        let (_, g) = tcl_grad(&pairs, &y, &params, margin).expect("valid batch");
        tcl = tcl.max(fd_audit(&params.data, &g, |p| {
            let q = EncoderParams { data: p.to_vec(), ..params.clone() };
            tcl_grad(&pairs, &y, &q, margin).expect("valid batch").0
        }));
    }

    let mut vol = 0.0f64;
    let mut coord = 0.0f64;
    let mut head = 0.0f64;
    for i in 0..n {
        let channels = if i % 2 == 0 { 4 } else { 6 };
        let wins: Vec<Window> = (0..2).map(|_| random_window(&mut rng, 7, &earth)).collect();
        let spec = NormalizationSpec::fit(
            wins.iter().flat_map(|w| w.positions.iter().copied().chain(w.nkp)),
            0.5,
        )
        .expect("finite points");
        let tws: Vec<TrainingWindow> = wins
            .iter()
            .map(|w| TrainingWindow::new(w, &spec, channels, None, 300.0).expect("in bounds"))
            .collect();
        let params = PredictorParams::init(3, channels, 4, seed + 100 + i as u64);
        let with = |p: &[f64]| PredictorParams { data: p.to_vec(), ..params.clone() };

        let (_, g) = loss_vol_grad(&tws, &params).expect("valid windows");
        vol = vol.max(fd_audit(&params.data, &g, |p| loss_vol_grad(&tws, &with(p)).expect("valid").0));

        let (_, g) = loss_coord_grad(&tws, &params, &spec, &earth).expect("valid windows");
        coord = coord.max(fd_audit(&params.data, &g, |p| {
            loss_coord_grad(&tws, &with(p), &spec, &earth).expect("valid").0
        }));

        let ctx = tws[0].features.slice_rows(0, 3);
        let w = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let g = forward_step_grad(&ctx, &params, w).expect("valid context");
        head = head.max(fd_audit(&params.data, &g, |p| {
            let (a, b) = forward_step(&ctx, &with(p)).expect("valid");
            w.0 * a + w.1 * b
        }));
    }
    vec![
        Check::at_most("contrastive loss gradient", n, tcl, 1.0),
        Check::at_most("velocity loss gradient", n, vol, 1.0),
        Check::at_most("coordinate loss gradient", n, coord, 1.0),
        Check::at_most("network output gradient", n, head, 1.0),
    ]
}

/// Entropy monotonicity, tower property and Bayes-risk monotonicity on `n`
/// random tables each (instance `i` seeded with `seed + i`).
pub fn info_suite(n: usize, seed: u64) -> Vec<Check> {
    let run = |f: &(dyn Fn(&mut ChaCha8Rng) -> bool + Sync)| {
        (0..n)
            .into_par_iter()
            .filter(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(*i as u64));
                !f(&mut rng)
            })
            .count() as f64
    };
    let table = |rng: &mut ChaCha8Rng| {
        let zero_frac = if rng.random::<bool>() { 0.0 } else { 0.3 };
        JointDistribution::random([3, 3, 3], zero_frac, rng)
    };
    let entropy = run(&|rng| check_entropy_monotonicity(&table(rng)).expect("valid").pass);
    let tower = run(&|rng| check_tower(&table(rng)).expect("valid").pass);
    let bayes = run(&|rng| {
        let d = table(rng);
        let loss = if rng.random_range(0..4) == 0 {
            LossMatrix::zero_one(3)
        } else {
            let k = rng.random_range(2..5);
            LossMatrix::random(3, k, rng)
        };
        check_bayes_risk(&d, &loss).expect("valid").pass
    });
    vec![
        Check::at_most("conditional entropy monotonicity (failures)", n, entropy, 0.0),
        Check::at_most("tower property (failures)", n, tower, 0.0),
        Check::at_most("Bayes risk monotonicity (failures)", n, bayes, 0.0),
    ]
}

/// Every check at its standard size.
pub fn run_suite(seed: u64) -> Vec<Check> {
    let earth = EarthModel::default();
    let p = GeoPoint::new(30.0, 10.0).expect("in range");
    let v = VelocityOverGround::new(10.0, FRAC_PI_2 / 2.0).expect("valid");
    let q = step(p, v, 300.0, &earth).expect("inside band");
    let (lat, lon) = rk4_rhumb(p, v, 300.0, 1e-3, &earth);
    let fixture = (q.lat - lat).abs().max((q.lon - lon).abs());

    let mut out = vec![
        Check::at_most("step matches fine RK4 at 30N 45deg (deg)", 1, fixture, 1e-9),
        rk4_agreement(50, 0.05, seed),
        kinematic_consistency(20, 100, seed),
        limit_continuity(100, seed),
        rollout_stability(100, 288, seed),
        frechet_oracle(500, 8, seed),
    ];
    out.extend(curvature_checks());
    out.extend(gradient_audit(20, seed));
    out.extend(info_suite(1000, seed));
    out
}

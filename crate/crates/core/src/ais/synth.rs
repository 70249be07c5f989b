use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AisError, AisRecord, KeyNode, NkpLabel, UniformTrack};
use crate::geo::{course_delta, rhumb_course, step, EarthModel, GeoPoint, VelocityOverGround};

/// Route between two key nodes, optionally bending through intermediate
/// (non-key) waypoints given as `[lat, lon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub via: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmitMode {
    /// Report intervals drawn uniformly from `[min_s, max_s]`.
    Irregular { min_s: f64, max_s: f64 },
    /// Fixed report interval.
    Regular { interval_s: f64 },
}

impl Default for EmitMode {
    fn default() -> Self {
        EmitMode::Irregular {
            min_s: 60.0,
            max_s: 600.0,
        }
    }
}

fn default_legs() -> usize {
    2
}
fn default_dt() -> f64 {
    300.0
}
fn default_turn() -> f64 {
    5.0
}
fn default_epoch() -> f64 {
    1_700_000_100.0
}
fn default_mmsi_base() -> u64 {
    200_000_000
}

/// Synthetic fleet description; also the on-disk JSON shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetConfig {
    pub nodes: Vec<KeyNode>,
    pub edges: Vec<EdgeSpec>,
    pub n_vessels: usize,
    pub sigma_pos_deg: f64,
    /// Cruise speed range in m/s.
    pub speed_min: f64,
    pub speed_max: f64,
    pub seed: u64,
    #[serde(default = "default_legs")]
    pub legs_per_vessel: usize,
    /// Simulation step in seconds.
    #[serde(default = "default_dt")]
    pub dt_sim: f64,
    /// Maximum course change per simulation step, degrees.
    #[serde(default = "default_turn")]
    pub max_turn_deg: f64,
    #[serde(default)]
    pub emit: EmitMode,
    /// Start time of every vessel, epoch seconds.
    #[serde(default = "default_epoch")]
    pub start_epoch: f64,
    #[serde(default = "default_mmsi_base")]
    pub mmsi_base: u64,
    /// Edges are one-way when set; otherwise each edge is also traversed in
    /// reverse with its waypoints reversed.
    #[serde(default)]
    pub directed: bool,
}

/// Generator output: AIS records with their ground-truth NKP, and the
/// noise-free generating track of each vessel on the simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFleet {
    pub records: Vec<AisRecord>,
    pub labels: Vec<Option<NkpLabel>>,
    pub tracks: Vec<UniformTrack>,
    /// Per generating-track sample: the node the current leg is heading to.
    pub track_labels: Vec<Vec<NkpLabel>>,
}

struct Route {
    to: usize,
    via: Vec<GeoPoint>,
}

impl FleetConfig {
    /// Validates nodes, edges and ranges without generating anything.
    pub fn check(&self) -> Result<(), AisError> {
        self.validate().map(|_| ())
    }

    fn validate(&self) -> Result<BTreeMap<usize, Vec<Route>>, AisError> {
        let bad = |m: String| Err(AisError::InvalidConfig(m));
        if self.nodes.is_empty() {
            return bad("no key nodes".into());
        }
        if !(2.0..=15.0).contains(&self.speed_min)
            || !(2.0..=15.0).contains(&self.speed_max)
            || self.speed_min > self.speed_max
        {
            return bad(format!(
                "speed range [{}, {}] must lie within [2, 15] m/s",
                self.speed_min, self.speed_max
            ));
        }
        if !(self.sigma_pos_deg >= 0.0 && self.sigma_pos_deg.is_finite()) {
            return bad("sigma_pos_deg must be non-negative".into());
        }
        if !(self.dt_sim > 0.0 && self.dt_sim.is_finite()) {
            return bad("dt_sim must be positive".into());
        }
        if !(self.max_turn_deg > 0.0) {
            return bad("max_turn_deg must be positive".into());
        }
        if self.legs_per_vessel == 0 {
            return bad("legs_per_vessel must be at least 1".into());
        }
        match self.emit {
            EmitMode::Irregular { min_s, max_s } if !(min_s > 0.0 && min_s <= max_s) => {
                return bad("irregular emission needs 0 < min_s <= max_s".into())
            }
            EmitMode::Regular { interval_s } if !(interval_s > 0.0) => {
                return bad("regular emission interval must be positive".into())
            }
            _ => {}
        }
        let index: BTreeMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        if index.len() != self.nodes.len() {
            return bad("duplicate node id".into());
        }
        let mut routes: BTreeMap<usize, Vec<Route>> = BTreeMap::new();
        for e in &self.edges {
            let (Some(&a), Some(&b)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) else {
                return bad(format!("edge {} -> {} references an unknown node", e.from, e.to));
            };
            if a == b {
                return bad(format!("self-loop at {}", e.from));
            }
            let via = e
                .via
                .iter()
                .map(|[lat, lon]| GeoPoint::new(*lat, *lon))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|err| AisError::InvalidConfig(format!("waypoint: {err}")))?;
            if !self.directed {
                routes.entry(b).or_default().push(Route {
                    to: a,
                    via: via.iter().rev().copied().collect(),
                });
            }
            routes.entry(a).or_default().push(Route { to: b, via });
        }
        // connectivity over the undirected skeleton
        if self.n_vessels > 0 {
            let mut seen = BTreeSet::from([0usize]);
            let mut stack = vec![0usize];
            while let Some(u) = stack.pop() {
                for e in &self.edges {
                    let (a, b) = (index[e.from.as_str()], index[e.to.as_str()]);
                    for (x, y) in [(a, b), (b, a)] {
                        if x == u && seen.insert(y) {
                            stack.push(y);
                        }
                    }
                }
            }
            if seen.len() != self.nodes.len() {
                return bad("route graph is not connected".into());
            }
        }
        Ok(routes)
    }
}

/// Simulates one leg from `p` toward `route`, appending grid samples.
#[allow(clippy::too_many_arguments)]
fn sail_leg(
    p: &mut GeoPoint,
    cog: &mut f64,
    speed: f64,
    route: &Route,
    dest: &KeyNode,
    cfg: &FleetConfig,
    earth: &EarthModel,
    out: &mut Vec<(GeoPoint, VelocityOverGround)>,
    labels: &mut Vec<NkpLabel>,
    first: bool,
) -> Result<(), AisError> {
    let max_turn = cfg.max_turn_deg.to_radians();
    let step_len = speed * cfg.dt_sim;
    // waypoint capture radius leaves room for the turn-rate limit
    let capture = (2.0 * step_len / max_turn).max(3.0 * step_len);
    let mut targets: Vec<GeoPoint> = route.via.clone();
    targets.push(dest.center);
    let mut ti = 0;
    let mut aligned = first;
    let limit = 50_000;
    for _ in 0..limit {
        while ti < route.via.len() && p.haversine(&targets[ti], earth) < capture {
            ti += 1;
        }
        if ti == route.via.len() && p.haversine(&dest.center, earth) <= 0.5 * dest.radius_m {
            return Ok(());
        }
        let want = rhumb_course(*p, targets[ti], earth);
        if aligned {
            *cog = want;
            aligned = false;
        } else {
            *cog += course_delta(*cog, want).clamp(-max_turn, max_turn);
        }
        let v = VelocityOverGround::new(speed, *cog)?;
        out.push((*p, v));
        labels.push(dest.id.clone());
        *p = step(*p, v, cfg.dt_sim, earth)?;
    }
    Err(AisError::InvalidConfig(format!(
        "vessel failed to reach {} within {limit} steps",
        dest.id
    )))
}

/// Generates a seeded synthetic fleet following rhumb-line legs between key
/// nodes, with turn-rate-limited course changes, Gaussian position jitter
/// and (by default) irregular reporting.
pub fn synth_fleet(cfg: &FleetConfig, earth: &EarthModel) -> Result<SynthFleet, AisError> {
    let routes = cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(0.0, cfg.sigma_pos_deg.max(f64::MIN_POSITIVE))
        .map_err(|e| AisError::InvalidConfig(e.to_string()))?;
    let starts: Vec<usize> = routes.keys().copied().collect();
    let mut fleet = SynthFleet {
        records: Vec::new(),
        labels: Vec::new(),
        tracks: Vec::new(),
        track_labels: Vec::new(),
    };
    if starts.is_empty() && cfg.n_vessels > 0 {
        return Err(AisError::InvalidConfig("no edges".into()));
    }
    for v in 0..cfg.n_vessels {
        let mmsi = cfg.mmsi_base + v as u64;
        let speed = rng.random_range(cfg.speed_min..=cfg.speed_max);
        let mut node = starts[rng.random_range(0..starts.len())];
        let mut prev: Option<usize> = None;
        let mut p = cfg.nodes[node].center;
        let mut cog = 0.0;
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for leg in 0..cfg.legs_per_vessel {
            let Some(options) = routes.get(&node) else { break };
            // avoid immediately sailing back when another route exists
            let fwd: Vec<&Route> = options.iter().filter(|r| Some(r.to) != prev).collect();
            let pool: Vec<&Route> = if fwd.is_empty() { options.iter().collect() } else { fwd };
            let route = pool[rng.random_range(0..pool.len())];
            sail_leg(
                &mut p,
                &mut cog,
                speed,
                route,
                &cfg.nodes[route.to],
                cfg,
                earth,
                &mut samples,
                &mut labels,
                leg == 0,
            )?;
            prev = Some(node);
            node = route.to;
        }
        let last_label = labels.last().cloned();
        samples.push((p, VelocityOverGround::new(speed, cog)?));
        if let Some(l) = last_label {
            labels.push(l);
        }
        let offset = rng.random_range(0..288u32) as f64 * cfg.dt_sim;
        let t0 = cfg.start_epoch + offset;
        let t_end = (samples.len() - 1) as f64 * cfg.dt_sim;

        let mut t = 0.0;
        while t <= t_end {
            let k = ((t / cfg.dt_sim).floor() as usize).min(samples.len() - 1);
            let (pk, vk) = samples[k];
            let frac = t - k as f64 * cfg.dt_sim;
            let exact = if frac > 0.0 { step(pk, vk, frac, earth)? } else { pk };
            let pos = if cfg.sigma_pos_deg > 0.0 {
                GeoPoint::new(
                    exact.lat + jitter.sample(&mut rng),
                    exact.lon + jitter.sample(&mut rng),
                )?
            } else {
                exact
            };
            fleet.records.push(AisRecord {
                mmsi,
                timestamp: t0 + t,
                pos,
                sog_knots: vk.sog_knots(),
                cog_deg: vk.cog_deg(),
                vessel_type: 70 + (v % 10) as u32,
                track_id: None,
            });
            fleet.labels.push(labels.get(k).cloned());
            t += match cfg.emit {
                EmitMode::Regular { interval_s } => interval_s,
                EmitMode::Irregular { min_s, max_s } => rng.random_range(min_s..=max_s).round(),
            };
        }
        fleet.tracks.push(UniformTrack {
            mmsi,
            track_id: None,
            t0,
            dt: cfg.dt_sim,
            samples,
        });
        fleet.track_labels.push(labels);
    }
    Ok(fleet)
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::ais::{EdgeSpec, EmitMode, FleetConfig, KeyNode, DEFAULT_DT, DEFAULT_L_SEQ, DEFAULT_MAX_GAP, DEFAULT_STRIDE};
use crate::geo::EarthModel;
use crate::nkp::ContrastiveConfig;
use crate::predictor::{TrainSchedule, DEFAULT_CONTEXT, DEFAULT_WIDTH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// AIS CSV.
    pub data: PathBuf,
    /// Key-node JSON.
    pub key_nodes: PathBuf,
    pub checkpoints: PathBuf,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self::under(Path::new("run"))
    }
}

impl Paths {
    /// Standard layout below `root`.
    pub fn under(root: &Path) -> Self {
        Self {
            data: root.join("data/ais.csv"),
            key_nodes: root.join("data/key_nodes.json"),
            checkpoints: root.join("checkpoints"),
            output: root.join("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub l_seq: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorShape {
    pub context: usize,
    pub hidden: usize,
}

impl Default for PredictorShape {
    fn default() -> Self {
        Self {
            context: DEFAULT_CONTEXT,
            hidden: DEFAULT_WIDTH,
        }
    }
}

/// How evaluation tasks are cut from held-out tracks. With `anchor` set,
/// each labeled leg yields one task per radius, its history ending at the
/// first sample within that distance of the anchor; otherwise histories
/// end every `stride` samples along the leg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskSpec {
    pub history: usize,
    pub horizon: usize,
    pub stride: usize,
    /// `[lat, lon]`.
    pub anchor: Option<[f64; 2]>,
    pub anchor_radii_m: Vec<f64>,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            history: 96,
            horizon: 192,
            stride: 96,
            anchor: None,
            anchor_radii_m: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NkpMode {
    #[default]
    Predicted,
    Oracle,
    Wrong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Ours,
    Cvm,
}

/// Built-in synthetic scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fixture {
    /// Four ports on a rectangle, traffic along every side both ways.
    Ring,
    /// One origin whose traffic splits at a shared waypoint toward two
    /// destinations.
    Branching,
    /// A single straight route sailed at constant speed.
    Straight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: Paths,
    pub fleet: FleetConfig,
    pub earth_radius: f64,
    pub seed: u64,
    pub dt: f64,
    pub max_gap: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    /// Padding around the data when fitting the normalization bounds.
    pub spec_margin_deg: f64,
    pub encoder_windows: WindowSpec,
    pub predictor_windows: WindowSpec,
    pub quota: usize,
    pub tau: f64,
    pub contrastive: ContrastiveConfig,
    pub schedule: TrainSchedule,
    pub predictor: PredictorShape,
    pub tasks: TaskSpec,
    pub channels: usize,
    pub nkp: NkpMode,
    pub model: ModelKind,
    /// Fixed timestamps and zeroed wall times, for byte-identical reports.
    pub fixed_clock: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            fleet: ring_fleet(),
            earth_radius: EarthModel::default().radius,
            seed: 0,
            dt: DEFAULT_DT,
            max_gap: DEFAULT_MAX_GAP,
            val_frac: 0.0,
            test_frac: 0.25,
            spec_margin_deg: 0.5,
            encoder_windows: WindowSpec {
                l_seq: DEFAULT_L_SEQ,
                stride: DEFAULT_STRIDE,
            },
            predictor_windows: WindowSpec { l_seq: 64, stride: 16 },
            quota: 20,
            tau: 0.5,
            contrastive: ContrastiveConfig::default(),
            schedule: TrainSchedule::default(),
            predictor: PredictorShape::default(),
            tasks: TaskSpec::default(),
            channels: 6,
            nkp: NkpMode::default(),
            model: ModelKind::default(),
            fixed_clock: false,
        }
    }
}

/// Seeds of every stochastic stage, derived from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub run: u64,
    pub fleet: u64,
    pub split: u64,
    pub encoder: u64,
    pub reference: u64,
    pub predictor_init: u64,
    pub schedule: u64,
    pub wrong_nkp: u64,
}

impl RunConfig {
    /// Desk-scale settings for a fixture, rooted at `root`.
    pub fn preset(fixture: Fixture, root: &Path) -> Self {
        let base = Self {
            paths: Paths::under(root),
            contrastive: ContrastiveConfig {
                learning_rate: 0.1,
                epochs: 20,
                batch_size: 16,
                hidden: 32,
                embed_dim: 16,
                ..ContrastiveConfig::default()
            },
            schedule: TrainSchedule {
                vol_epochs: 10,
                bc_epochs: 3,
                cycles: 2,
                learning_rate: 0.05,
                batch_size: 32,
                sample_stride: 2,
                ..TrainSchedule::default()
            },
            predictor: PredictorShape {
                context: DEFAULT_CONTEXT,
                hidden: 64,
            },
            ..Self::default()
        };
        match fixture {
            Fixture::Ring => Self {
                fleet: ring_fleet(),
                ..base
            },
            Fixture::Branching => Self {
                fleet: branching_fleet(),
                test_frac: 0.4,
                tasks: TaskSpec {
                    anchor: Some(BRANCH_POINT),
                    anchor_radii_m: vec![100_000.0, 150_000.0],
                    ..TaskSpec::default()
                },
                ..base
            },
            Fixture::Straight => Self {
                fleet: straight_fleet(),
                ..base
            },
        }
    }

    pub fn earth(&self) -> Result<EarthModel, PipelineError> {
        Ok(EarthModel::new(self.earth_radius)?)
    }

    pub fn seeds(&self) -> Seeds {
        let s = self.seed;
        Seeds {
            run: s,
            fleet: self.fleet.seed,
            split: s ^ 0x5917,
            encoder: s ^ 0xe4c0,
            reference: s ^ 0x4ef5,
            predictor_init: s ^ 0x9ed1,
            schedule: s ^ 0x5c4e,
            wrong_nkp: s ^ 0x3bad,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.into()));
        if self.channels != 4 && self.channels != 6 {
            return bad("channels must be 4 or 6");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(0.0..1.0).contains(&self.test_frac) || !(0.0..1.0).contains(&self.val_frac) || self.val_frac + self.test_frac >= 1.0 {
            return bad("val_frac and test_frac must leave a training share");
        }
        if self.encoder_windows.l_seq < 2 || self.predictor_windows.l_seq < 2 {
            return bad("window length must be at least 2");
        }
        if self.encoder_windows.stride == 0 || self.predictor_windows.stride == 0 || self.tasks.stride == 0 {
            return bad("strides must be positive");
        }
        if self.predictor_windows.l_seq <= self.predictor.context {
            return bad("predictor windows must be longer than the context");
        }
        if self.tasks.history < self.predictor.context.max(2) || self.tasks.horizon == 0 {
            return bad("task history must cover the context and horizon must be positive");
        }
        if self.quota == 0 {
            return bad("quota must be positive");
        }
        if !(self.tau.is_finite() && (-1.0..=1.0).contains(&self.tau)) {
            return bad("tau must lie in [-1, 1]");
        }
        self.contrastive.validate()?;
        self.schedule.validate()?;
        self.earth()?;
        Ok(())
    }
}

/// Shared waypoint of the branching fixture, `[lat, lon]`.
pub const BRANCH_POINT: [f64; 2] = [10.0, -44.0];

fn node(id: &str, lat: f64, lon: f64) -> KeyNode {
    KeyNode::new(id, id, lat, lon, 30_000.0).expect("valid preset node")
}

fn edge(from: &str, to: &str, via: Vec<[f64; 2]>) -> EdgeSpec {
    EdgeSpec {
        from: from.into(),
        to: to.into(),
        via,
    }
}

fn base_fleet(nodes: Vec<KeyNode>, edges: Vec<EdgeSpec>) -> FleetConfig {
    FleetConfig {
        nodes,
        edges,
        n_vessels: 40,
        sigma_pos_deg: 0.0,
        speed_min: 8.0,
        speed_max: 12.0,
        seed: 7,
        legs_per_vessel: 2,
        dt_sim: 300.0,
        max_turn_deg: 5.0,
        emit: EmitMode::default(),
        start_epoch: 1_700_000_100.0,
        mmsi_base: 200_000_000,
        directed: false,
    }
}

pub fn ring_fleet() -> FleetConfig {
    let nodes = vec![
        node("P1", 10.0, -50.0),
        node("P2", 20.0, -50.0),
        node("P3", 20.0, -40.0),
        node("P4", 10.0, -40.0),
    ];
    let edges = vec![
        edge("P1", "P2", vec![]),
        edge("P2", "P3", vec![]),
        edge("P3", "P4", vec![]),
        edge("P4", "P1", vec![]),
    ];
    base_fleet(nodes, edges)
}

/// A new destination reachable from two ring ports; its traffic is unseen
/// by an encoder trained on [`ring_fleet`].
pub fn ring_extension_fleet() -> FleetConfig {
    let nodes = vec![node("P1", 10.0, -50.0), node("P4", 10.0, -40.0), node("P6", 0.0, -45.0)];
    let edges = vec![edge("P1", "P6", vec![]), edge("P4", "P6", vec![])];
    FleetConfig {
        n_vessels: 16,
        seed: 8,
        legs_per_vessel: 1,
        mmsi_base: 300_000_000,
        directed: true,
        ..base_fleet(nodes, edges)
    }
}

pub fn branching_fleet() -> FleetConfig {
    let nodes = vec![node("A", 10.0, -50.0), node("B", 14.0, -40.0), node("C", 6.0, -40.0)];
    let edges = vec![edge("A", "B", vec![BRANCH_POINT]), edge("A", "C", vec![BRANCH_POINT])];
    FleetConfig {
        n_vessels: 60,
        sigma_pos_deg: 0.002,
        seed: 21,
        legs_per_vessel: 1,
        mmsi_base: 400_000_000,
        directed: true,
        ..base_fleet(nodes, edges)
    }
}

pub fn straight_fleet() -> FleetConfig {
    let nodes = vec![node("S", 0.0, -30.0), node("T", 8.0, -20.0)];
    FleetConfig {
        n_vessels: 8,
        seed: 3,
        legs_per_vessel: 1,
        emit: EmitMode::Regular { interval_s: 300.0 },
        mmsi_base: 500_000_000,
        directed: true,
        ..base_fleet(nodes, vec![edge("S", "T", vec![])])
    }
}

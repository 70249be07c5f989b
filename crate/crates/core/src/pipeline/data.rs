use std::fs;

use serde::{Deserialize, Serialize};

use super::{PipelineError, RunConfig};
use crate::ais::{
    annotate_nkp, build_tracks, filter_cargo, parse_ais_csv, parse_key_nodes, slide_windows, KeyNode, MmsiSplit,
    NkpLabel, NormalizationSpec, UniformTrack, Window,
};
use crate::geo::{EarthModel, GeoPoint};
use crate::metrics::Polyline;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

fn in_split(split: &MmsiSplit, which: Split, mmsi: u64) -> bool {
    match which {
        Split::Train => split.train.contains(&mmsi),
        Split::Val => split.val.contains(&mmsi),
        Split::Test => split.test.contains(&mmsi),
    }
}

/// Parsed and resampled input shared by every stage after ingestion.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub nodes: Vec<KeyNode>,
    pub tracks: Vec<UniformTrack>,
    pub warnings: usize,
}

impl Dataset {
    pub fn load(cfg: &RunConfig) -> Result<Self, PipelineError> {
        let earth = cfg.earth()?;
        let nodes = parse_key_nodes(&read(&cfg.paths.key_nodes)?)?;
        let parsed = parse_ais_csv(read(&cfg.paths.data)?.as_slice())?;
        let tracks = build_tracks(&filter_cargo(parsed.records), cfg.dt, cfg.max_gap, &earth)?;
        Ok(Self {
            nodes,
            tracks,
            warnings: parsed.skipped.len(),
        })
    }

    /// Bounds over the training tracks and every key-node center.
    pub fn fit_spec(&self, split: &MmsiSplit, margin_deg: f64) -> Result<NormalizationSpec, PipelineError> {
        let pts = self
            .split_tracks(split, Split::Train)
            .flat_map(|t| t.positions())
            .chain(self.nodes.iter().map(|n| n.center));
        Ok(NormalizationSpec::fit(pts, margin_deg)?)
    }

    pub fn node(&self, label: &NkpLabel) -> Option<&KeyNode> {
        self.nodes.iter().find(|n| &n.id == label)
    }

    fn split_tracks<'a>(&'a self, split: &'a MmsiSplit, which: Split) -> impl Iterator<Item = &'a UniformTrack> + 'a {
        self.tracks.iter().filter(move |t| in_split(split, which, t.mmsi))
    }

    /// Labeled windows from the tracks of one split.
    pub fn windows(
        &self,
        split: &MmsiSplit,
        which: Split,
        l_seq: usize,
        stride: usize,
        earth: &EarthModel,
    ) -> Vec<Window> {
        self.split_tracks(split, which)
            .flat_map(|t| {
                let ranges = annotate_nkp(t, &self.nodes, earth);
                slide_windows(t, &ranges, &self.nodes, l_seq, stride)
            })
            .collect()
    }

    /// Evaluation tasks from the tracks of one split, in track order.
    pub fn tasks(&self, split: &MmsiSplit, which: Split, cfg: &RunConfig) -> Result<Vec<EvalTask>, PipelineError> {
        let earth = cfg.earth()?;
        let spec = &cfg.tasks;
        let (h, z) = (spec.history, spec.horizon);
        let anchor = spec
            .anchor
            .map(|[lat, lon]| GeoPoint::new(lat, lon))
            .transpose()?;
        let mut out = Vec::new();
        for t in self.split_tracks(split, which) {
            for r in annotate_nkp(t, &self.nodes, &earth) {
                let Some(node) = self.node(&r.label) else { continue };
                let ends: Vec<usize> = match anchor {
                    Some(a) => spec
                        .anchor_radii_m
                        .iter()
                        .filter_map(|rad| (r.start..r.end).find(|&k| t.samples[k].0.haversine(&a, &earth) < *rad))
                        .filter(|&end| end + z < t.len())
                        .collect(),
                    None => (r.start + h - 1..r.end.saturating_sub(z))
                        .step_by(spec.stride)
                        .collect(),
                };
                for end in ends {
                    if end + 1 < h {
                        continue;
                    }
                    let history = Window::from_track(t, end + 1 - h, h).expect("inside track");
                    let truth = Polyline::new(t.samples[end + 1..=end + z].iter().map(|s| s.0).collect());
                    out.push(EvalTask {
                        mmsi: t.mmsi,
                        end,
                        label: r.label.clone(),
                        node: node.center,
                        history,
                        truth,
                    });
                }
            }
        }
        Ok(out)
    }
}

fn read(path: &std::path::Path) -> Result<Vec<u8>, PipelineError> {
    fs::read(path).map_err(|e| PipelineError::Missing {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Held-out history with its continuation and true next key point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTask {
    pub mmsi: u64,
    /// Track index of the last history sample.
    pub end: usize,
    pub label: NkpLabel,
    pub node: GeoPoint,
    pub history: Window,
    pub truth: Polyline,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::{split_by_mmsi, synth_fleet};
    use crate::pipeline::Fixture;

    fn straight() -> (RunConfig, Dataset, MmsiSplit) {
        let cfg = RunConfig::preset(Fixture::Straight, std::path::Path::new("x"));
        let earth = cfg.earth().unwrap();
        let fleet = synth_fleet(&cfg.fleet, &earth).unwrap();
        let tracks = build_tracks(&filter_cargo(fleet.records), cfg.dt, cfg.max_gap, &earth).unwrap();
        let ds = Dataset {
            nodes: cfg.fleet.nodes.clone(),
            tracks,
            warnings: 0,
        };
        let split = split_by_mmsi(ds.tracks.iter().map(|t| t.mmsi), 0.0, 0.5, 1);
        (cfg, ds, split)
    }

    #[test]
    fn sliding_tasks_have_configured_lengths() {
        let (cfg, ds, split) = straight();
        let tasks = ds.tasks(&split, Split::Test, &cfg).unwrap();
        assert!(!tasks.is_empty());
        for t in &tasks {
            assert!(split.test.contains(&t.mmsi));
            assert_eq!(t.history.len(), cfg.tasks.history);
            assert_eq!(t.truth.len(), cfg.tasks.horizon);
            assert_eq!(t.label.as_str(), "T");
            assert_eq!(t.history.start + t.history.len(), t.end + 1);
        }
    }

    #[test]
    fn spec_covers_nodes_and_training_tracks() {
        let (_, ds, split) = straight();
        let spec = ds.fit_spec(&split, 0.5).unwrap();
        for n in &ds.nodes {
            spec.norm_point(&n.center).unwrap();
        }
        for t in ds.tracks.iter().filter(|t| split.train.contains(&t.mmsi)) {
            for p in t.positions() {
                spec.norm_point(&p).unwrap();
            }
        }
    }

    #[test]
    fn windows_stay_in_their_split() {
        let (cfg, ds, split) = straight();
        let earth = cfg.earth().unwrap();
        let w = ds.windows(&split, Split::Train, 48, 12, &earth);
        assert!(!w.is_empty());
        assert!(w.iter().all(|w| split.train.contains(&w.mmsi) && w.len() == 48));
    }
}

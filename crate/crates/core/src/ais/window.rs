use serde::{Deserialize, Serialize};

use super::{KeyNode, LabeledRange, NkpLabel, UniformTrack};
use crate::geo::{GeoPoint, VelocityOverGround};

/// 288 steps of 5 minutes (24 hours).
pub const DEFAULT_L_SEQ: usize = 288;
/// One window per hour on the 5-minute grid.
pub const DEFAULT_STRIDE: usize = 12;

/// Fixed-length slice of a uniform track.
///
/// `velocities[i]` is the velocity over the interval ending at
/// `positions[i]` (how the vessel arrived there), so a window never carries
/// information about motion after its last position. The first row, with
/// no earlier interval on the track, reuses its own outgoing velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub mmsi: u64,
    pub track_t0: f64,
    /// Index of the first row within the source track.
    pub start: usize,
    pub positions: Vec<GeoPoint>,
    pub velocities: Vec<VelocityOverGround>,
    pub label: Option<NkpLabel>,
    pub nkp: Option<GeoPoint>,
}

impl Window {
    /// Unlabeled slice `[start, start + len)` of `track`.
    pub fn from_track(track: &UniformTrack, start: usize, len: usize) -> Option<Self> {
        if len == 0 || start + len > track.len() {
            return None;
        }
        let positions = track.samples[start..start + len].iter().map(|s| s.0).collect();
        let velocities = (start..start + len)
            .map(|k| track.samples[k.saturating_sub(1)].1)
            .collect();
        Some(Self {
            mmsi: track.mmsi,
            track_t0: track.t0,
            start,
            positions,
            velocities,
            label: None,
            nkp: None,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn with_label(mut self, label: NkpLabel, nkp: GeoPoint) -> Self {
        self.label = Some(label);
        self.nkp = Some(nkp);
        self
    }
}

/// Slides a window of `l_seq` samples with stride `stride` across every
/// labeled range; each window lies entirely inside one range and inherits
/// its label and key-node coordinates. Ranges whose label does not resolve
/// to a node in `nodes` are skipped.
pub fn slide_windows(
    track: &UniformTrack,
    ranges: &[LabeledRange],
    nodes: &[KeyNode],
    l_seq: usize,
    stride: usize,
) -> Vec<Window> {
    assert!(l_seq >= 2, "window length must be at least 2");
    assert!(stride >= 1, "stride must be at least 1");
    let mut out = Vec::new();
    for r in ranges {
        let Some(node) = nodes.iter().find(|n| n.id == r.label) else {
            continue;
        };
        if r.len() < l_seq || r.end > track.len() {
            continue;
        }
        let count = (r.len() - l_seq) / stride + 1;
        for k in 0..count {
            let start = r.start + k * stride;
            if let Some(w) = Window::from_track(track, start, l_seq) {
                out.push(w.with_label(r.label.clone(), node.center));
            }
        }
    }
    out
}

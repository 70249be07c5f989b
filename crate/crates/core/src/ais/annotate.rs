use serde::{Deserialize, Serialize};

use super::{KeyNode, NkpLabel, UniformTrack};
use crate::geo::{EarthModel, GeoPoint};

/// Half-open sample range `[start, end)` of a track labeled with the key
/// node the vessel reaches next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledRange {
    pub start: usize,
    pub end: usize,
    pub label: NkpLabel,
}

impl LabeledRange {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Index of the key node whose geofence contains `p` (nearest center wins
/// when geofences overlap).
pub fn node_membership(p: &GeoPoint, nodes: &[KeyNode], earth: &EarthModel) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, n) in nodes.iter().enumerate() {
        let d = p.haversine(&n.center, earth);
        if d <= n.radius_m && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Labels every sample strictly between two consecutive geofence visits
/// with the node of the later visit. Samples inside a geofence, before the
/// first visit, or after the last visit stay unlabeled.
pub fn annotate_nkp(track: &UniformTrack, nodes: &[KeyNode], earth: &EarthModel) -> Vec<LabeledRange> {
    // visits: maximal runs of samples inside the same node
    let mut visits: Vec<(usize, usize, usize)> = Vec::new();
    for (i, (p, _)) in track.samples.iter().enumerate() {
        let Some(node) = node_membership(p, nodes, earth) else {
            continue;
        };
        match visits.last_mut() {
            Some((_, end, n)) if *n == node && *end == i => *end = i + 1,
            _ => visits.push((i, i + 1, node)),
        }
    }
    visits
        .windows(2)
        .filter_map(|w| {
            let (gap_start, gap_end) = (w[0].1, w[1].0);
            (gap_end > gap_start).then(|| LabeledRange {
                start: gap_start,
                end: gap_end,
                label: nodes[w[1].2].id.clone(),
            })
        })
        .collect()
}

//! AIS ingestion: CSV parsing, cargo filtering, uniform resampling, key-node
//! annotation, windowing, feature normalization, reference sampling and a
//! synthetic fleet generator.

mod annotate;
mod csv;
mod normalize;
mod sample;
mod synth;
mod track;
mod window;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoError, GeoPoint, VelocityOverGround};

pub use self::annotate::{annotate_nkp, node_membership, LabeledRange};
pub use self::csv::{format_timestamp, parse_ais_csv, parse_timestamp, write_ais_csv, ParseOutcome, RowWarning};
pub use self::normalize::{
    denormalize, normalize, normalize_rows, Features, NormalizationSpec, DEFAULT_VELOCITY_SCALE,
};
pub use self::sample::{sample_reference_set, split_by_mmsi, MmsiSplit};
pub use self::synth::{synth_fleet, EdgeSpec, EmitMode, FleetConfig, SynthFleet};
pub use self::track::{build_tracks, interpolate_uniform, DEFAULT_DT, DEFAULT_MAX_GAP};
pub use self::window::{slide_windows, Window, DEFAULT_L_SEQ, DEFAULT_STRIDE};

#[derive(Debug, Error)]
pub enum AisError {
    #[error("required column {0} missing from header")]
    MissingColumn(&'static str),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("need at least 2 records, got {0}")]
    TooFewRecords(usize),
    #[error("invalid key node: {0}")]
    InvalidNode(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("coordinate ({lat}, {lon}) outside normalization bounds")]
    OutOfBounds { lat: f64, lon: f64 },
    #[error("invalid normalization spec: {0}")]
    InvalidSpec(String),
    #[error("invalid fleet config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Semantic Next-Key-Point label: the id of the key node a vessel is
/// heading to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NkpLabel(pub String);

impl NkpLabel {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NkpLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NkpLabel {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AisRecord {
    pub mmsi: u64,
    /// Epoch seconds, UTC.
    pub timestamp: f64,
    pub pos: GeoPoint,
    pub sog_knots: f64,
    pub cog_deg: f64,
    pub vessel_type: u32,
    pub track_id: Option<String>,
}

/// Keeps cargo vessels (ship-type codes 70 through 79).
pub fn filter_cargo(records: Vec<AisRecord>) -> Vec<AisRecord> {
    records
        .into_iter()
        .filter(|r| (70..=79).contains(&r.vessel_type))
        .collect()
}

/// A track resampled onto a fixed time grid. Sample `k` is at `t0 + k*dt`
/// and carries the velocity that moves it to sample `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformTrack {
    pub mmsi: u64,
    #[serde(default)]
    pub track_id: Option<String>,
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<(GeoPoint, VelocityOverGround)>,
}

impl UniformTrack {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = GeoPoint> + '_ {
        self.samples.iter().map(|s| s.0)
    }
}

/// Circular geofence around a port or strait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KeyNodeRecord", into = "KeyNodeRecord")]
pub struct KeyNode {
    pub id: NkpLabel,
    pub name: String,
    pub center: GeoPoint,
    pub radius_m: f64,
}

impl KeyNode {
    pub fn new(id: &str, name: &str, lat: f64, lon: f64, radius_m: f64) -> Result<Self, AisError> {
        KeyNode::try_from(KeyNodeRecord {
            id: id.to_owned(),
            name: name.to_owned(),
            lat,
            lon,
            radius_m,
        })
    }
}

/// On-disk key-node shape: `{id, name, lat, lon, radius_m}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyNodeRecord {
    pub id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub radius_m: f64,
}

impl TryFrom<KeyNodeRecord> for KeyNode {
    type Error = AisError;

    fn try_from(r: KeyNodeRecord) -> Result<Self, AisError> {
        if !(r.radius_m.is_finite() && r.radius_m > 0.0) {
            return Err(AisError::InvalidNode(format!(
                "{}: radius_m must be positive",
                r.id
            )));
        }
        if r.id.is_empty() {
            return Err(AisError::InvalidNode("empty id".into()));
        }
        let center = GeoPoint::new(r.lat, r.lon)
            .map_err(|e| AisError::InvalidNode(format!("{}: {e}", r.id)))?;
        Ok(Self {
            id: NkpLabel(r.id),
            name: r.name,
            center,
            radius_m: r.radius_m,
        })
    }
}

impl From<KeyNode> for KeyNodeRecord {
    fn from(n: KeyNode) -> Self {
        Self {
            id: n.id.0,
            name: n.name,
            lat: n.center.lat,
            lon: n.center.lon,
            radius_m: n.radius_m,
        }
    }
}

/// Parses a key-node JSON array. Duplicate ids are rejected.
pub fn parse_key_nodes(bytes: &[u8]) -> Result<Vec<KeyNode>, AisError> {
    let raw: Vec<KeyNodeRecord> = serde_json::from_slice(bytes)?;
    let nodes = raw
        .into_iter()
        .map(KeyNode::try_from)
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for n in &nodes {
        if !seen.insert(n.id.clone()) {
            return Err(AisError::InvalidNode(format!("duplicate id {}", n.id)));
        }
    }
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(vessel_type: u32) -> AisRecord {
        AisRecord {
            mmsi: 1,
            timestamp: 0.0,
            pos: GeoPoint::new(0.0, 0.0).unwrap(),
            sog_knots: 0.0,
            cog_deg: 0.0,
            vessel_type,
            track_id: None,
        }
    }

    #[test]
    fn cargo_filter_bounds() {
        let kept = filter_cargo(vec![rec(70), rec(79), rec(60), rec(80), rec(75)]);
        let types: Vec<u32> = kept.iter().map(|r| r.vessel_type).collect();
        assert_eq!(types, vec![70, 79, 75]);
        assert!(filter_cargo(vec![]).is_empty());
    }

    #[test]
    fn key_nodes_parse_and_validate() {
        let ok = br#"[{"id":"SGP","name":"Singapore","lat":1.26,"lon":103.8,"radius_m":20000}]"#;
        let nodes = parse_key_nodes(ok).unwrap();
        assert_eq!(nodes[0].id.as_str(), "SGP");
        assert_eq!(nodes[0].center.lon, 103.8);

        let bad = br#"[{"id":"X","name":"x","lat":1.0,"lon":2.0,"radius_m":0}]"#;
        assert!(matches!(parse_key_nodes(bad), Err(AisError::InvalidNode(_))));
        let dup = br#"[{"id":"X","name":"x","lat":1,"lon":2,"radius_m":5},{"id":"X","name":"y","lat":1,"lon":2,"radius_m":5}]"#;
        assert!(parse_key_nodes(dup).is_err());
        assert!(parse_key_nodes(b"{").is_err());
    }

    #[test]
    fn key_node_json_round_trip() {
        let n = KeyNode::new("A", "Alpha", 10.0, 20.0, 1000.0).unwrap();
        let s = serde_json::to_string(&n).unwrap();
        assert_eq!(serde_json::from_str::<KeyNode>(&s).unwrap(), n);
    }
}

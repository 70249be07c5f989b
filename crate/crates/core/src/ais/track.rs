use std::collections::BTreeMap;

use super::{AisError, AisRecord, UniformTrack};
use crate::geo::{velocity_from_displacement, wrap_lon, EarthModel, GeoPoint, VelocityOverGround};

/// Five-minute resampling grid.
pub const DEFAULT_DT: f64 = 300.0;

/// Reporting gaps longer than this split a vessel's stream into separate
/// tracks.
pub const DEFAULT_MAX_GAP: f64 = 6.0 * 3600.0;

/// Linearly resamples one vessel's records onto a `dt` grid anchored at the
/// first timestamp rounded up to a multiple of `dt`.
///
/// Velocities are recomputed from consecutive grid positions, so the
/// resulting track is one-step consistent under rhumb-line stepping. The last
/// sample repeats the previous velocity.
pub fn interpolate_uniform(
    records: &[AisRecord],
    dt: f64,
    earth: &EarthModel,
) -> Result<UniformTrack, AisError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(crate::geo::GeoError::InvalidDt(dt).into());
    }
    let mut recs: Vec<&AisRecord> = records.iter().collect();
    recs.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    recs.dedup_by(|b, a| a.timestamp == b.timestamp);
    if recs.len() < 2 {
        return Err(AisError::TooFewRecords(recs.len()));
    }
    let first = recs[0].timestamp;
    let last = recs[recs.len() - 1].timestamp;
    let t0 = (first / dt).ceil() * dt;

    let mut positions = Vec::new();
    let mut seg = 0;
    let mut k = 0u64;
    loop {
        let t = t0 + k as f64 * dt;
        if t > last {
            break;
        }
        while seg + 2 < recs.len() && recs[seg + 1].timestamp < t {
            seg += 1;
        }
        let (a, b) = (recs[seg], recs[seg + 1]);
        let w = ((t - a.timestamp) / (b.timestamp - a.timestamp)).clamp(0.0, 1.0);
        let lat = a.pos.lat + w * (b.pos.lat - a.pos.lat);
        let lon = a.pos.lon + w * wrap_lon(b.pos.lon - a.pos.lon);
        positions.push(GeoPoint::new(lat, lon)?);
        k += 1;
    }
    if positions.len() < 2 {
        return Err(AisError::TooFewRecords(positions.len()));
    }

    let mut samples = Vec::with_capacity(positions.len());
    for w in positions.windows(2) {
        samples.push((w[0], velocity_from_displacement(w[0], w[1], dt, earth)?));
    }
    let last_vel = samples.last().map_or(VelocityOverGround::ZERO, |s| s.1);
    samples.push((positions[positions.len() - 1], last_vel));

    Ok(UniformTrack {
        mmsi: recs[0].mmsi,
        track_id: recs[0].track_id.clone(),
        t0,
        dt,
        samples,
    })
}

/// Groups records by `(mmsi, track_id)`, splits each group wherever the
/// reporting gap exceeds `max_gap`, and resamples every piece. Pieces too
/// short to produce two grid samples are dropped. Output is ordered by
/// `(mmsi, track_id, t0)`.
pub fn build_tracks(
    records: &[AisRecord],
    dt: f64,
    max_gap: f64,
    earth: &EarthModel,
) -> Result<Vec<UniformTrack>, AisError> {
    let mut groups: BTreeMap<(u64, Option<&str>), Vec<&AisRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.mmsi, r.track_id.as_deref()))
            .or_default()
            .push(r);
    }
    let mut tracks = Vec::new();
    for (_, mut group) in groups {
        group.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let mut start = 0;
        for i in 1..=group.len() {
            let split = i == group.len() || group[i].timestamp - group[i - 1].timestamp > max_gap;
            if split {
                let piece: Vec<AisRecord> = group[start..i].iter().map(|r| (*r).clone()).collect();
                match interpolate_uniform(&piece, dt, earth) {
                    Ok(t) => tracks.push(t),
                    Err(AisError::TooFewRecords(_)) => {}
                    Err(e) => return Err(e),
                }
                start = i;
            }
        }
    }
    Ok(tracks)
}

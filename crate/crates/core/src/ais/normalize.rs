use serde::{Deserialize, Serialize};

use super::{AisError, Window};
use crate::geo::{GeoPoint, VelocityOverGround, KNOT_MS};

/// Maps speeds in knots onto roughly unit-scale velocity components.
pub const DEFAULT_VELOCITY_SCALE: f64 = 1.0 / 25.0;

/// Row-major feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub rows: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Features {
    pub fn zeros(rows: usize, channels: usize) -> Self {
        Self {
            rows,
            channels,
            data: vec![0.0; rows * channels],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.channels..(r + 1) * self.channels]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.channels..(r + 1) * self.channels]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.channels + c]
    }

    /// Contiguous block of rows `[start, start + len)`.
    pub fn rows_slice(&self, start: usize, len: usize) -> &[f64] {
        &self.data[start * self.channels..(start + len) * self.channels]
    }

    /// Copy keeping only the first `channels` columns.
    pub fn take_channels(&self, channels: usize) -> Features {
        let channels = channels.min(self.channels);
        let mut out = Features::zeros(self.rows, channels);
        for r in 0..self.rows {
            out.row_mut(r).copy_from_slice(&self.row(r)[..channels]);
        }
        out
    }

    /// Copy of rows `[start, start + len)`.
    pub fn slice_rows(&self, start: usize, len: usize) -> Features {
        Features {
            rows: len,
            channels: self.channels,
            data: self.rows_slice(start, len).to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Affine bounds mapping positions into `[-1, 1]` and the scale applied to
/// velocity components (in knots).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub velocity_scale: f64,
}

impl NormalizationSpec {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self, AisError> {
        let s = Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            velocity_scale: DEFAULT_VELOCITY_SCALE,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), AisError> {
        let finite = [self.lat_min, self.lat_max, self.lon_min, self.lon_max, self.velocity_scale]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(AisError::InvalidSpec("non-finite field".into()));
        }
        if !(self.lat_min < self.lat_max && self.lon_min < self.lon_max) {
            return Err(AisError::InvalidSpec("min must be below max".into()));
        }
        if self.velocity_scale <= 0.0 {
            return Err(AisError::InvalidSpec("velocity_scale must be positive".into()));
        }
        Ok(())
    }

    /// Bounding box of `points`, padded by `margin_deg` on every side and
    /// clipped to the latitude band.
    pub fn fit<I: IntoIterator<Item = GeoPoint>>(points: I, margin_deg: f64) -> Result<Self, AisError> {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for p in points {
            b[0] = b[0].min(p.lat);
            b[1] = b[1].max(p.lat);
            b[2] = b[2].min(p.lon);
            b[3] = b[3].max(p.lon);
        }
        if !b[0].is_finite() {
            return Err(AisError::InvalidSpec("no points to fit".into()));
        }
        let band = crate::geo::MAX_ABS_LAT;
        Self::new(
            (b[0] - margin_deg).max(-band),
            (b[1] + margin_deg).min(band),
            (b[2] - margin_deg).max(-180.0),
            (b[3] + margin_deg).min(180.0),
        )
    }

    fn check(&self, p: &GeoPoint) -> Result<(), AisError> {
        if (self.lat_min..=self.lat_max).contains(&p.lat) && (self.lon_min..=self.lon_max).contains(&p.lon) {
            Ok(())
        } else {
            Err(AisError::OutOfBounds { lat: p.lat, lon: p.lon })
        }
    }

    pub fn norm_lat(&self, lat: f64) -> f64 {
        2.0 * (lat - self.lat_min) / (self.lat_max - self.lat_min) - 1.0
    }

    pub fn norm_lon(&self, lon: f64) -> f64 {
        2.0 * (lon - self.lon_min) / (self.lon_max - self.lon_min) - 1.0
    }

    pub fn denorm_lat(&self, x: f64) -> f64 {
        self.lat_min + (x + 1.0) * 0.5 * (self.lat_max - self.lat_min)
    }

    pub fn denorm_lon(&self, x: f64) -> f64 {
        self.lon_min + (x + 1.0) * 0.5 * (self.lon_max - self.lon_min)
    }

    /// Degrees of latitude per normalized unit.
    pub fn lat_span(&self) -> f64 {
        0.5 * (self.lat_max - self.lat_min)
    }

    pub fn lon_span(&self) -> f64 {
        0.5 * (self.lon_max - self.lon_min)
    }

    /// Normalized `(lat, lon)` of a point, bounds-checked.
    pub fn norm_point(&self, p: &GeoPoint) -> Result<(f64, f64), AisError> {
        self.check(p)?;
        Ok((self.norm_lat(p.lat), self.norm_lon(p.lon)))
    }

    /// North/east velocity components in knots times the velocity scale.
    pub fn velocity_channels(&self, v: &VelocityOverGround) -> (f64, f64) {
        let k = self.velocity_scale / KNOT_MS;
        (v.north() * k, v.east() * k)
    }

    /// Inverse of [`Self::velocity_channels`], returning north/east in m/s.
    pub fn channel_components(&self, a: f64, b: f64) -> (f64, f64) {
        let k = KNOT_MS / self.velocity_scale;
        (a * k, b * k)
    }

    pub fn velocity_from_channels(&self, a: f64, b: f64) -> VelocityOverGround {
        let (n, e) = self.channel_components(a, b);
        VelocityOverGround::from_components(n, e)
    }
}

/// Feature rows from positions, arrival velocities and an optional key-node
/// position broadcast into two extra channels.
pub fn normalize_rows(
    positions: &[GeoPoint],
    velocities: &[VelocityOverGround],
    nkp: Option<&GeoPoint>,
    spec: &NormalizationSpec,
) -> Result<Features, AisError> {
    assert_eq!(positions.len(), velocities.len(), "positions and velocities must align");
    let channels = if nkp.is_some() { 6 } else { 4 };
    let nkp_norm = nkp.map(|p| spec.norm_point(p)).transpose()?;
    let mut f = Features::zeros(positions.len(), channels);
    for (r, (p, v)) in positions.iter().zip(velocities).enumerate() {
        let (la, lo) = spec.norm_point(p)?;
        let (vn, ve) = spec.velocity_channels(v);
        let row = f.row_mut(r);
        row[..4].copy_from_slice(&[la, lo, vn, ve]);
        if let Some((na, no)) = nkp_norm {
            row[4] = na;
            row[5] = no;
        }
    }
    Ok(f)
}

/// Window features: 4 channels, or 6 when the window carries key-node
/// coordinates.
pub fn normalize(window: &Window, spec: &NormalizationSpec) -> Result<Features, AisError> {
    normalize_rows(&window.positions, &window.velocities, window.nkp.as_ref(), spec)
}

/// Positions and velocities recovered from the first four channels.
pub fn denormalize(
    features: &Features,
    spec: &NormalizationSpec,
) -> Result<Vec<(GeoPoint, VelocityOverGround)>, AisError> {
    if features.channels < 4 {
        return Err(AisError::InvalidSpec(format!(
            "need at least 4 channels, got {}",
            features.channels
        )));
    }
    (0..features.rows)
        .map(|r| {
            let row = features.row(r);
            let p = GeoPoint::new(spec.denorm_lat(row[0]), spec.denorm_lon(row[1]))?;
            Ok((p, spec.velocity_from_channels(row[2], row[3])))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> NormalizationSpec {
        NormalizationSpec::new(10.0, 30.0, -60.0, -20.0).unwrap()
    }

    fn window(positions: Vec<GeoPoint>, vel: VelocityOverGround) -> Window {
        Window {
            mmsi: 1,
            track_t0: 0.0,
            start: 0,
            velocities: vec![vel; positions.len()],
            positions,
            label: None,
            nkp: None,
        }
    }

    #[test]
    fn affine_endpoints() {
        let s = spec();
        let w = window(
            vec![GeoPoint::new(10.0, -60.0).unwrap(), GeoPoint::new(30.0, -20.0).unwrap()],
            VelocityOverGround::ZERO,
        );
        let f = normalize(&w, &s).unwrap();
        assert_eq!(f.channels, 4);
        assert_eq!(f.row(0), &[-1.0, -1.0, 0.0, 0.0]);
        assert_eq!(f.row(1), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(s.denorm_lat(0.0), 20.0);
        assert_eq!(s.denorm_lon(-1.0), -60.0);
    }

    #[test]
    fn velocity_scaling_and_nkp_channels() {
        let s = spec();
        let v = VelocityOverGround::from_ais(25.0, 0.0).unwrap();
        let mut w = window(vec![GeoPoint::new(20.0, -40.0).unwrap(); 3], v);
        w.nkp = Some(GeoPoint::new(30.0, -60.0).unwrap());
        let f = normalize(&w, &s).unwrap();
        assert_eq!(f.channels, 6);
        for r in 0..3 {
            assert!((f.get(r, 2) - 1.0).abs() < 1e-12);
            assert!(f.get(r, 3).abs() < 1e-12);
            assert_eq!(&f.row(r)[4..], &[1.0, -1.0]);
        }
    }

    #[test]
    fn out_of_bounds_rejected() {
        let w = window(vec![GeoPoint::new(31.0, -40.0).unwrap()], VelocityOverGround::ZERO);
        assert!(matches!(normalize(&w, &spec()), Err(AisError::OutOfBounds { .. })));
    }

    #[test]
    fn invalid_specs() {
        assert!(NormalizationSpec::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(NormalizationSpec::new(0.0, 1.0, 2.0, 1.0).is_err());
        let mut s = spec();
        s.velocity_scale = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn fit_pads_and_clips() {
        let pts = [GeoPoint::new(84.0, 0.0).unwrap(), GeoPoint::new(80.0, 10.0).unwrap()];
        let s = NormalizationSpec::fit(pts, 2.0).unwrap();
        assert_eq!(s.lat_max, 85.0);
        assert_eq!(s.lat_min, 78.0);
        assert_eq!((s.lon_min, s.lon_max), (-2.0, 12.0));
    }
}

//! Rhumb-line kinematics on a spherical Earth.
//!
//! A vessel holding a constant speed and course over ground for `dt` seconds
//! travels along a loxodrome. Latitude advances linearly in time and the
//! longitude change follows from integrating `v sin(cog) / (R cos(lat))`,
//! which has the closed form `tan(cog) * (psi(lat1) - psi(lat0))` where
//! `psi` is the Mercator ordinate `ln|sec + tan|`.
//!
//! Positions are in degrees at the API boundary; everything internal is SI
//! (meters, seconds, radians).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ais::UniformTrack;

/// Operational latitude band in degrees. `sec`/`tan` diverge at the poles.
pub const MAX_ABS_LAT: f64 = 85.0;

/// Below this `|cos(cog)|` the longitude update switches to its analytic
/// east-west limit.
pub const EPS_COURSE: f64 = 1e-6;

/// Meters per second in one knot.
pub const KNOT_MS: f64 = 0.514444;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("latitude {lat} leaves the operational band of +/-{MAX_ABS_LAT} degrees")]
    PoleProximity { lat: f64 },
    #[error("time step must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("invalid coordinate ({lat}, {lon})")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("invalid velocity (sog {sog}, cog {cog})")]
    InvalidVelocity { sog: f64, cog: f64 },
    #[error("earth radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("track has {0} samples, need at least 2")]
    TooShort(usize),
    #[error("rollout failed at step {index}: {source}")]
    Rollout {
        index: usize,
        #[source]
        source: Box<GeoError>,
    },
}

/// Wraps a longitude in degrees into `[-180, 180)`.
pub fn wrap_lon(lon: f64) -> f64 {
    if (-180.0..180.0).contains(&lon) {
        return lon;
    }
    let w = (lon + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Wraps an angle in radians into `[0, 2pi)`.
pub fn wrap_course(cog: f64) -> f64 {
    let w = cog.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Position in degrees. Latitude is confined to the operational band and
/// longitude is kept wrapped into `[-180, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(GeoError::InvalidCoordinate { lat, lon });
        }
        if lat.abs() > MAX_ABS_LAT {
            return Err(GeoError::PoleProximity { lat });
        }
        Ok(Self {
            lat,
            lon: wrap_lon(lon),
        })
    }

    pub fn lat_rad(&self) -> f64 {
        self.lat.to_radians()
    }

    /// Great-circle distance in meters.
    pub fn haversine(&self, other: &GeoPoint, earth: &EarthModel) -> f64 {
        let (p0, p1) = (self.lat_rad(), other.lat_rad());
        let dphi = p1 - p0;
        let dlam = wrap_lon(other.lon - self.lon).to_radians();
        let a = (dphi / 2.0).sin().powi(2) + p0.cos() * p1.cos() * (dlam / 2.0).sin().powi(2);
        2.0 * earth.radius * a.sqrt().min(1.0).asin()
    }
}

/// Speed over ground (m/s) and course over ground (radians, clockwise from
/// true north).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityOverGround {
    pub sog: f64,
    pub cog: f64,
}

impl VelocityOverGround {
    pub const ZERO: Self = Self { sog: 0.0, cog: 0.0 };

    pub fn new(sog: f64, cog: f64) -> Result<Self, GeoError> {
        if !sog.is_finite() || !cog.is_finite() || sog < 0.0 {
            return Err(GeoError::InvalidVelocity { sog, cog });
        }
        Ok(Self {
            sog,
            cog: wrap_course(cog),
        })
    }

    /// From AIS units: knots and degrees.
    pub fn from_ais(sog_knots: f64, cog_deg: f64) -> Result<Self, GeoError> {
        Self::new(sog_knots * KNOT_MS, cog_deg.to_radians())
    }

    /// From north/east components in m/s.
    pub fn from_components(north: f64, east: f64) -> Self {
        let sog = north.hypot(east);
        if sog == 0.0 {
            return Self::ZERO;
        }
        Self {
            sog,
            cog: wrap_course(east.atan2(north)),
        }
    }

    pub fn north(&self) -> f64 {
        self.sog * self.cog.cos()
    }

    pub fn east(&self) -> f64 {
        self.sog * self.cog.sin()
    }

    pub fn sog_knots(&self) -> f64 {
        self.sog / KNOT_MS
    }

    pub fn cog_deg(&self) -> f64 {
        let d = self.cog.to_degrees();
        if d >= 360.0 {
            0.0
        } else {
            d
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    /// Radius in meters.
    pub radius: f64,
}

impl EarthModel {
    pub const MEAN_RADIUS: f64 = 6_371_000.0;

    pub fn new(radius: f64) -> Result<Self, GeoError> {
        if radius.is_finite() && radius > 0.0 {
            Ok(Self { radius })
        } else {
            Err(GeoError::InvalidRadius(radius))
        }
    }
}

impl Default for EarthModel {
    fn default() -> Self {
        Self {
            radius: Self::MEAN_RADIUS,
        }
    }
}

/// `psi(lat1) - psi(lat0)` with `psi(x) = ln|sec x + tan x| = atanh(sin x)`.
///
/// Evaluated as `atanh((sin lat1 - sin lat0) / (1 - sin lat0 sin lat1))` with
/// the sine difference formed by a product identity, so short steps keep full
/// relative precision instead of cancelling two O(1) logarithms.
pub fn mercator_diff(lat0: f64, lat1: f64) -> f64 {
    let dsin = 2.0 * ((lat1 + lat0) / 2.0).cos() * ((lat1 - lat0) / 2.0).sin();
    let denom = 1.0 - lat0.sin() * lat1.sin();
    (dsin / denom).atanh()
}

/// Mean of `sec` over `[lat0, lat1]` (radians): `(psi(lat1) - psi(lat0)) / (lat1 - lat0)`,
/// continuous through `lat1 == lat0`.
pub fn mean_secant(lat0: f64, lat1: f64) -> f64 {
    let d = lat1 - lat0;
    if d == 0.0 {
        1.0 / lat0.cos()
    } else {
        mercator_diff(lat0, lat1) / d
    }
}

/// General-branch longitude change (radians) for a course whose cosine is
/// not vanishing: `tan(cog) * (psi(lat1) - psi(lat0))`.
pub fn delta_lon_general(lat0: f64, lat1: f64, cog: f64) -> f64 {
    cog.tan() * mercator_diff(lat0, lat1)
}

/// East-west limit of the longitude change (radians): the secant is taken at
/// the mid-latitude of the step, which keeps the limit within O(cos(cog)^2)
/// of the general branch.
pub fn delta_lon_limit(lat0: f64, lat1: f64, sog: f64, cog: f64, dt: f64, radius: f64) -> f64 {
    let mid = 0.5 * (lat0 + lat1);
    sog * cog.sin() * dt / (radius * mid.cos())
}

/// Advances `p` for `dt` seconds at constant speed and course.
///
/// Latitude is updated first and the longitude update uses the new latitude.
pub fn step(
    p: GeoPoint,
    vel: VelocityOverGround,
    dt: f64,
    earth: &EarthModel,
) -> Result<GeoPoint, GeoError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GeoError::InvalidDt(dt));
    }
    if vel.sog == 0.0 {
        return Ok(p);
    }
    let lat0 = p.lat_rad();
    let cos_c = vel.cog.cos();
    let dlat = vel.sog * cos_c * dt / earth.radius;
    let lat1_deg = p.lat + dlat.to_degrees();
    if !(lat1_deg.abs() <= MAX_ABS_LAT) {
        return Err(GeoError::PoleProximity { lat: lat1_deg });
    }
    let lat1 = lat0 + dlat;
    let dlon = if cos_c.abs() < EPS_COURSE {
        delta_lon_limit(lat0, lat1, vel.sog, vel.cog, dt, earth.radius)
    } else {
        delta_lon_general(lat0, lat1, vel.cog)
    };
    Ok(GeoPoint {
        lat: lat1_deg,
        lon: wrap_lon(p.lon + dlon.to_degrees()),
    })
}

/// Applies `step` once per control, returning the start followed by every
/// stepped position.
pub fn rollout(
    start: GeoPoint,
    vels: &[VelocityOverGround],
    dt: f64,
    earth: &EarthModel,
) -> Result<Vec<GeoPoint>, GeoError> {
    let mut out = Vec::with_capacity(vels.len() + 1);
    out.push(start);
    let mut p = start;
    for (index, v) in vels.iter().enumerate() {
        p = step(p, *v, dt, earth).map_err(|e| GeoError::Rollout {
            index,
            source: Box::new(e),
        })?;
        out.push(p);
    }
    Ok(out)
}

/// Inverse of [`step`]: the constant velocity that carries `p0` to `p1` in
/// `dt` seconds along a rhumb line. Zero displacement yields the zero
/// velocity (course 0 by convention).
pub fn velocity_from_displacement(
    p0: GeoPoint,
    p1: GeoPoint,
    dt: f64,
    earth: &EarthModel,
) -> Result<VelocityOverGround, GeoError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GeoError::InvalidDt(dt));
    }
    let dlat = (p1.lat - p0.lat).to_radians();
    let dlon = wrap_lon(p1.lon - p0.lon).to_radians();
    if dlat == 0.0 && dlon == 0.0 {
        return Ok(VelocityOverGround::ZERO);
    }
    let lat0 = p0.lat_rad();
    let north = dlat * earth.radius / dt;
    let east = dlon * earth.radius / (dt * mean_secant(lat0, lat0 + dlat));
    Ok(VelocityOverGround::from_components(north, east))
}

/// Mean squared one-step residual (squared degrees) between the recorded
/// next position and `step` applied to the current position and velocity.
pub fn one_step_consistency(track: &UniformTrack, earth: &EarthModel) -> Result<f64, GeoError> {
    let n = track.samples.len();
    if n < 2 {
        return Err(GeoError::TooShort(n));
    }
    let mut acc = 0.0;
    for (t, w) in track.samples.windows(2).enumerate() {
        let (p, v) = w[0];
        let next = w[1].0;
        let pred = step(p, v, track.dt, earth).map_err(|e| GeoError::Rollout {
            index: t,
            source: Box::new(e),
        })?;
        let dlat = pred.lat - next.lat;
        let dlon = wrap_lon(pred.lon - next.lon);
        acc += dlat * dlat + dlon * dlon;
    }
    Ok(acc / (n - 1) as f64)
}

/// Rhumb-line course (radians) from `a` toward `b`.
pub fn rhumb_course(a: GeoPoint, b: GeoPoint, earth: &EarthModel) -> f64 {
    velocity_from_displacement(a, b, 1.0, earth)
        .map(|v| v.cog)
        .unwrap_or(0.0)
}

/// Signed smallest difference `b - a` between two courses, in `(-pi, pi]`.
pub fn course_delta(a: f64, b: f64) -> f64 {
    let mut d = (b - a).rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn earth() -> EarthModel {
        EarthModel::default()
    }

    #[test]
    fn zero_speed_fixes_position() {
        let p = GeoPoint::new(12.3, 45.6).unwrap();
        let v = VelocityOverGround::new(0.0, 1.234).unwrap();
        assert_eq!(step(p, v, 300.0, &earth()).unwrap(), p);
    }

    #[test]
    fn due_north_from_origin() {
        // 3000 m / 6371000 m in degrees, 40-digit evaluation
        let expected = 0.026_979_648_177_561_915_339_882_979_821_427_6;
        let p = GeoPoint::new(0.0, 0.0).unwrap();
        let v = VelocityOverGround::new(10.0, 0.0).unwrap();
        let q = step(p, v, 300.0, &earth()).unwrap();
        assert!((q.lat - expected).abs() < 1e-15);
        assert_eq!(q.lon, 0.0);
    }

    #[test]
    fn due_east_uses_limit_branch() {
        let expected = 0.026_979_648_177_561_915_339_882_979_821_427_6;
        let p = GeoPoint::new(0.0, 0.0).unwrap();
        let v = VelocityOverGround::new(10.0, PI / 2.0).unwrap();
        assert!(v.cog.cos().abs() < EPS_COURSE);
        let q = step(p, v, 300.0, &earth()).unwrap();
        assert!(q.lat.abs() < 1e-15);
        assert!((q.lon - expected).abs() < 1e-15);
    }

    #[test]
    fn step_rejects_bad_dt_and_poles() {
        let p = GeoPoint::new(84.99, 0.0).unwrap();
        let v = VelocityOverGround::new(15.0, 0.0).unwrap();
        assert!(matches!(step(p, v, 0.0, &earth()), Err(GeoError::InvalidDt(_))));
        assert!(matches!(step(p, v, -1.0, &earth()), Err(GeoError::InvalidDt(_))));
        assert!(matches!(
            step(p, v, 3000.0, &earth()),
            Err(GeoError::PoleProximity { .. })
        ));
    }

    #[test]
    fn geopoint_validation_and_wrapping() {
        assert!(GeoPoint::new(85.5, 0.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert_eq!(GeoPoint::new(0.0, 180.0).unwrap().lon, -180.0);
        assert_eq!(GeoPoint::new(0.0, -190.0).unwrap().lon, 170.0);
        assert_eq!(wrap_lon(-1e-18), -1e-18);
    }

    #[test]
    fn longitude_wraps_across_antimeridian() {
        let p = GeoPoint::new(0.0, 179.99).unwrap();
        let v = VelocityOverGround::new(10.0, PI / 2.0).unwrap();
        let q = step(p, v, 300.0, &earth()).unwrap();
        assert!(q.lon < -179.9);
        let back = velocity_from_displacement(p, q, 300.0, &earth()).unwrap();
        assert!((back.sog - 10.0).abs() < 1e-9);
    }

    #[test]
    fn rollout_empty_and_along_equator() {
        let p = GeoPoint::new(0.0, 10.0).unwrap();
        assert_eq!(rollout(p, &[], 300.0, &earth()).unwrap(), vec![p]);
        let east = VelocityOverGround::new(8.0, PI / 2.0).unwrap();
        let pts = rollout(p, &[east; 10], 300.0, &earth()).unwrap();
        assert_eq!(pts.len(), 11);
        let d0 = pts[1].lon - pts[0].lon;
        for w in pts.windows(2) {
            assert!(w[1].lat.abs() < 1e-15);
            assert!((w[1].lon - w[0].lon - d0).abs() < 1e-12);
        }
    }

    #[test]
    fn rollout_reports_failing_index() {
        let p = GeoPoint::new(84.0, 0.0).unwrap();
        let north = VelocityOverGround::new(15.0, 0.0).unwrap();
        let err = rollout(p, &[north; 100], 300.0, &earth()).unwrap_err();
        match err {
            GeoError::Rollout { index, .. } => assert!(index > 0 && index < 100),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverse_of_due_north_step() {
        let p0 = GeoPoint::new(0.0, 0.0).unwrap();
        let p1 = GeoPoint::new(0.026_979_648_177_561_915, 0.0).unwrap();
        let v = velocity_from_displacement(p0, p1, 300.0, &earth()).unwrap();
        assert!((v.sog - 10.0).abs() < 1e-9);
        assert!(v.cog.abs() < 1e-12);
    }

    #[test]
    fn zero_displacement_is_zero_velocity() {
        let p = GeoPoint::new(33.0, -20.0).unwrap();
        let v = velocity_from_displacement(p, p, 300.0, &earth()).unwrap();
        assert_eq!(v, VelocityOverGround::ZERO);
    }

    #[test]
    fn mean_secant_is_continuous_at_zero_width() {
        let lat = 0.7;
        let exact = 1.0 / f64::cos(lat);
        assert_eq!(mean_secant(lat, lat), exact);
        let near = mean_secant(lat, lat + 1e-12);
        assert!((near - exact).abs() < 1e-10);
    }

    #[test]
    fn course_delta_wraps() {
        assert!((course_delta(0.1, TAU - 0.1) + 0.2).abs() < 1e-12);
        assert!((course_delta(TAU - 0.1, 0.1) - 0.2).abs() < 1e-12);
        assert_eq!(course_delta(0.0, PI), PI);
    }

    #[test]
    fn consistency_needs_two_samples() {
        let track = UniformTrack {
            mmsi: 1,
            track_id: None,
            t0: 0.0,
            dt: 300.0,
            samples: vec![(GeoPoint::new(0.0, 0.0).unwrap(), VelocityOverGround::ZERO)],
        };
        assert_eq!(one_step_consistency(&track, &earth()), Err(GeoError::TooShort(1)));
    }
}

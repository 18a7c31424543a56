//! Shared domain types, tumbling time windows, and geodesic utilities.
//!
//! Everything here is an immutable value type; records and windows can be
//! shared or sent between pipeline stages without synchronization.

mod geo;

pub use geo::{destination_point, haversine_m, interpolate_at, EARTH_RADIUS_M};

use serde::Serialize;
use thiserror::Error;

/// Highest valid Maritime Mobile Service Identity (nine decimal digits).
pub const MAX_MMSI: u32 = 999_999_999;

/// AIS "speed unavailable" boundary: valid speeds are strictly below this.
pub const MAX_SOG_KN: f64 = 102.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("mmsi {0} exceeds nine digits")]
    InvalidMmsi(u32),
    #[error("latitude {0} outside [-90, 90]")]
    InvalidLatitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    InvalidLongitude(f64),
    #[error("speed over ground {0} outside [0, 102.3)")]
    InvalidSog(f64),
    #[error("course over ground {0} outside [0, 360)")]
    InvalidCog(f64),
    #[error("heading {0} outside [0, 360)")]
    InvalidHeading(f64),
    #[error("window duration must be positive")]
    InvalidDuration,
    #[error("time {t} outside segment [{start}, {end}]")]
    TimeOutsideSegment { t: i64, start: i64, end: i64 },
    #[error("trajectory timestamps must be strictly increasing")]
    NonMonotonicTrajectory,
    #[error("trajectory mixes records of different vessels")]
    MixedVessels,
}

/// Nine-digit MMSI vessel identity. Fits in 30 bits by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VesselId(u32);

impl VesselId {
    pub fn new(mmsi: u32) -> Result<Self, CoreError> {
        if mmsi > MAX_MMSI {
            return Err(CoreError::InvalidMmsi(mmsi));
        }
        Ok(Self(mmsi))
    }

    pub fn mmsi(self) -> u32 {
        self.0
    }
}

impl std::fmt::Display for VesselId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:09}", self.0)
    }
}

/// A WGS84 position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, CoreError> {
        if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
            return Err(CoreError::InvalidLatitude(lat));
        }
        if !(-180.0..=180.0).contains(&lon) || !lon.is_finite() {
            return Err(CoreError::InvalidLongitude(lon));
        }
        Ok(Self { lat, lon })
    }
}

/// One decoded, cleaned vessel position report.
///
/// Fields are public plain data; [`AisRecord::new`] enforces the invariants
/// (coordinates in range, sog below the unavailability sentinel, courses in
/// [0, 360)) and [`AisRecord::validate`] re-checks them for records built
/// piecemeal. `anomaly` is false at ingestion and set by the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AisRecord {
    pub vessel: VesselId,
    /// UTC seconds since the Unix epoch.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    /// Speed over ground, knots.
    pub sog: f64,
    /// Course over ground, degrees.
    pub cog: f64,
    /// True heading, degrees; `None` when the sensor reports unavailable.
    pub heading: Option<f64>,
    pub anomaly: bool,
}

impl AisRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        vessel: VesselId,
        timestamp: i64,
        lat: f64,
        lon: f64,
        sog: f64,
        cog: f64,
        heading: Option<f64>,
    ) -> Result<Self, CoreError> {
        let rec = Self {
            vessel,
            timestamp,
            lat,
            lon,
            sog,
            cog,
            heading,
            anomaly: false,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        GeoPoint::new(self.lat, self.lon)?;
        if !self.sog.is_finite() || self.sog < 0.0 || self.sog >= MAX_SOG_KN {
            return Err(CoreError::InvalidSog(self.sog));
        }
        if !self.cog.is_finite() || !(0.0..360.0).contains(&self.cog) {
            return Err(CoreError::InvalidCog(self.cog));
        }
        if let Some(h) = self.heading {
            if !h.is_finite() || !(0.0..360.0).contains(&h) {
                return Err(CoreError::InvalidHeading(h));
            }
        }
        Ok(())
    }

    pub fn position(&self) -> GeoPoint {
        GeoPoint {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

/// Time-ordered positions of a single vessel.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    vessel: VesselId,
    points: Vec<AisRecord>,
}

impl Trajectory {
    pub fn new(vessel: VesselId) -> Self {
        Self {
            vessel,
            points: Vec::new(),
        }
    }

    /// Builds a trajectory from records of one vessel, enforcing strictly
    /// increasing timestamps. Duplicates are deduplicated upstream.
    pub fn from_points(points: Vec<AisRecord>) -> Result<Self, CoreError> {
        let vessel = match points.first() {
            Some(p) => p.vessel,
            None => return Err(CoreError::NonMonotonicTrajectory),
        };
        let mut traj = Self::new(vessel);
        for p in points {
            traj.push(p)?;
        }
        Ok(traj)
    }

    pub fn push(&mut self, rec: AisRecord) -> Result<(), CoreError> {
        if rec.vessel != self.vessel {
            return Err(CoreError::MixedVessels);
        }
        if let Some(last) = self.points.last() {
            if rec.timestamp <= last.timestamp {
                return Err(CoreError::NonMonotonicTrajectory);
            }
        }
        self.points.push(rec);
        Ok(())
    }

    pub fn vessel(&self) -> VesselId {
        self.vessel
    }

    pub fn points(&self) -> &[AisRecord] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One epoch-aligned tumbling window: `start = index * duration`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TimeWindow {
    pub index: i64,
    pub start: i64,
    pub duration_s: u32,
}

impl TimeWindow {
    pub fn from_index(index: i64, duration_s: u32) -> Result<Self, CoreError> {
        if duration_s == 0 {
            return Err(CoreError::InvalidDuration);
        }
        Ok(Self {
            index,
            start: index * duration_s as i64,
            duration_s,
        })
    }

    pub fn end(&self) -> i64 {
        self.start + self.duration_s as i64
    }

    /// Half-open containment: `start <= t < end`.
    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.end()
    }
}

/// Maps a timestamp to its tumbling window. Windows tile time without gaps
/// or overlaps; the boundary instant belongs to the next window.
pub fn window_of(timestamp: i64, duration_s: u32) -> Result<TimeWindow, CoreError> {
    if duration_s == 0 {
        return Err(CoreError::InvalidDuration);
    }
    let d = duration_s as i64;
    let index = timestamp.div_euclid(d);
    Ok(TimeWindow {
        index,
        start: index * d,
        duration_s,
    })
}

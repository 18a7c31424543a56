//! Spherical-earth geodesics. Distortions downstream are tens of meters, so
//! the sub-half-percent ellipsoidal error does not matter here.

use super::{AisRecord, CoreError, GeoPoint};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Great-circle distance in meters between two positions.
///
/// Symmetric, non-negative, and zero for identical coordinates.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> Result<f64, CoreError> {
    GeoPoint::new(a.lat, a.lon)?;
    GeoPoint::new(b.lat, b.lon)?;

    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();

    let s = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    let c = 2.0 * s.sqrt().clamp(-1.0, 1.0).asin();
    Ok(EARTH_RADIUS_M * c)
}

/// Position of `p1`'s vessel at time `t`, linearly interpolated per
/// coordinate between `p1` and `p2`. Endpoints map to themselves.
///
/// Longitudes are interpolated in raw degrees; trajectories crossing the
/// antimeridian must be split upstream.
pub fn interpolate_at(p1: &AisRecord, p2: &AisRecord, t: i64) -> Result<GeoPoint, CoreError> {
    if p1.timestamp >= p2.timestamp {
        return Err(CoreError::NonMonotonicTrajectory);
    }
    if t < p1.timestamp || t > p2.timestamp {
        return Err(CoreError::TimeOutsideSegment {
            t,
            start: p1.timestamp,
            end: p2.timestamp,
        });
    }
    let frac = (t - p1.timestamp) as f64 / (p2.timestamp - p1.timestamp) as f64;
    Ok(GeoPoint {
        lat: p1.lat + frac * (p2.lat - p1.lat),
        lon: p1.lon + frac * (p2.lon - p1.lon),
    })
}

/// Destination after travelling `distance_m` from `origin` on the initial
/// bearing `bearing_deg`, on the spherical earth.
pub fn destination_point(origin: GeoPoint, bearing_deg: f64, distance_m: f64) -> GeoPoint {
    let delta = distance_m / EARTH_RADIUS_M;
    let theta = bearing_deg.to_radians();
    let phi1 = origin.lat.to_radians();
    let lambda1 = origin.lon.to_radians();

    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos())
        .clamp(-1.0, 1.0)
        .asin();
    let lambda2 = lambda1
        + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());

    let mut lon = lambda2.to_degrees();
    // normalize to [-180, 180)
    lon = (lon + 540.0).rem_euclid(360.0) - 180.0;
    GeoPoint {
        lat: phi2.to_degrees(),
        lon,
    }
}

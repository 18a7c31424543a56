//! Synchronized-deviation distortion: how far the reconstruction drifts
//! from the original track, averaged over every original point.

use super::CompressError;
use crate::core_model::{haversine_m, interpolate_at, AisRecord, Trajectory};

/// Sum and count of per-point deviations of `original` against `kept`.
///
/// Every original point measures to the time-synchronized interpolation
/// between the nearest kept points bracketing it. A point whose timestamp
/// matches a kept point measures to that point directly (zero when the kept
/// copy is bit-identical, the quantization error when it travelled the
/// wire). Points before the first or after the last kept point measure to
/// that endpoint.
pub fn distortion_sum(
    original: &Trajectory,
    kept: &Trajectory,
) -> Result<(f64, usize), CompressError> {
    if original.is_empty() {
        return Ok((0.0, 0));
    }
    let kept_pts = kept.points();
    if kept_pts.is_empty() {
        return Err(CompressError::KeptEmpty);
    }
    let mut sum = 0.0;
    for p in original.points() {
        sum += point_deviation(p, kept_pts)?;
    }
    Ok((sum, original.len()))
}

fn point_deviation(p: &AisRecord, kept: &[AisRecord]) -> Result<f64, CompressError> {
    // index of the first kept point with timestamp >= p
    let idx = kept.partition_point(|k| k.timestamp < p.timestamp);
    if idx < kept.len() && kept[idx].timestamp == p.timestamp {
        return Ok(haversine_m(p.position(), kept[idx].position())?);
    }
    if idx == 0 {
        return Ok(haversine_m(p.position(), kept[0].position())?);
    }
    if idx == kept.len() {
        return Ok(haversine_m(p.position(), kept[kept.len() - 1].position())?);
    }
    let interp = interpolate_at(&kept[idx - 1], &kept[idx], p.timestamp)?;
    Ok(haversine_m(p.position(), interp)?)
}

/// Mean deviation of one vessel's reconstruction, meters.
pub fn distortion_m(original: &Trajectory, kept: &Trajectory) -> Result<f64, CompressError> {
    let (sum, count) = distortion_sum(original, kept)?;
    if count == 0 {
        return Ok(0.0);
    }
    Ok(sum / count as f64)
}

/// Mean deviation over all vessels of a corpus: total deviation over total
/// original points, so every point weighs the same regardless of vessel.
pub fn corpus_distortion_m<'a>(
    pairs: impl IntoIterator<Item = (&'a Trajectory, &'a Trajectory)>,
) -> Result<f64, CompressError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (original, kept) in pairs {
        let (s, c) = distortion_sum(original, kept)?;
        sum += s;
        count += c;
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(sum / count as f64)
}

//! Classic threshold-based dead-reckoning simplification: the baseline the
//! bandwidth-constrained variants are measured against.

use std::collections::BTreeMap;

use super::{CompressError, SelectionResult};
use crate::core_model::{destination_point, haversine_m, AisRecord, Trajectory};

const KNOTS_TO_MPS: f64 = 1852.0 / 3600.0;

/// Dead-reckoned position of `from`'s vessel at `t`: travel along the
/// course over ground at the speed over ground.
pub(crate) fn dead_reckon(from: &AisRecord, t: i64) -> crate::core_model::GeoPoint {
    let dt = (t - from.timestamp) as f64;
    destination_point(from.position(), from.cog, from.sog * KNOTS_TO_MPS * dt)
}

/// Greedy streaming simplification: keep the first point; keep every
/// subsequent point whose actual position deviates from the dead-reckoned
/// prediction (from the last kept point) by more than `threshold_m`; always
/// keep the final point. An empty trajectory yields an empty result.
pub fn dr_simplify(traj: &Trajectory, threshold_m: f64) -> Result<SelectionResult, CompressError> {
    if threshold_m.is_nan() || threshold_m <= 0.0 {
        return Err(CompressError::InvalidThreshold(threshold_m));
    }
    let points = traj.points();
    let mut kept: Vec<AisRecord> = Vec::new();
    if let Some(first) = points.first() {
        kept.push(*first);
        let mut anchor = *first;
        for p in &points[1..] {
            let predicted = dead_reckon(&anchor, p.timestamp);
            let deviation = haversine_m(predicted, p.position())?;
            if deviation > threshold_m {
                kept.push(*p);
                anchor = *p;
            }
        }
        let last = points.last().unwrap();
        if kept.last().map(|k| k.timestamp) != Some(last.timestamp) {
            kept.push(*last);
        }
    }

    let mut map = BTreeMap::new();
    if !kept.is_empty() {
        map.insert(traj.vessel(), kept);
    }
    Ok(SelectionResult::from_kept(map, points.len()))
}

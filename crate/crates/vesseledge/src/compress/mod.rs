//! Bandwidth-constrained point selection over tumbling windows.
//!
//! The classic dead-reckoning simplifier keeps points whose position a
//! receiver could not predict within a distance threshold. The
//! bandwidth-constrained variant inverts the contract: instead of a
//! threshold it takes a per-window point budget shared by every vessel in
//! the window, and greedily drops the points whose removal distorts the
//! reconstruction least. The anomaly-aware variant multiplies the drop
//! priorities of recently flagged vessels so their tracks survive
//! compression preferentially.

mod bwc;
mod distortion;
mod dr;

pub use bwc::{bwc_dr, bwc_dr_a, bwc_dr_with_boost, DEFAULT_BOOST_FACTOR};
pub use distortion::{corpus_distortion_m, distortion_m, distortion_sum};
pub use dr::dr_simplify;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::core_model::{haversine_m, interpolate_at, AisRecord, CoreError, TimeWindow, VesselId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompressError {
    #[error("budget fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("deviation threshold {0} must be positive")]
    InvalidThreshold(f64),
    #[error("record at {timestamp} outside window [{start}, {end})")]
    RecordOutsideWindow {
        timestamp: i64,
        start: i64,
        end: i64,
    },
    #[error("kept trajectory is empty while the original is not")]
    KeptEmpty,
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// All records of one window, grouped per vessel and time-ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    window: TimeWindow,
    vessels: BTreeMap<VesselId, Vec<AisRecord>>,
    point_count: usize,
}

impl WindowBatch {
    /// Groups the records per vessel, sorting by timestamp. Every record
    /// must fall inside the window; duplicate timestamps per vessel must be
    /// deduplicated upstream.
    pub fn new(
        window: TimeWindow,
        records: impl IntoIterator<Item = AisRecord>,
    ) -> Result<Self, CompressError> {
        let mut vessels: BTreeMap<VesselId, Vec<AisRecord>> = BTreeMap::new();
        let mut point_count = 0;
        for rec in records {
            if !window.contains(rec.timestamp) {
                return Err(CompressError::RecordOutsideWindow {
                    timestamp: rec.timestamp,
                    start: window.start,
                    end: window.end(),
                });
            }
            vessels.entry(rec.vessel).or_default().push(rec);
            point_count += 1;
        }
        for points in vessels.values_mut() {
            points.sort_by_key(|r| r.timestamp);
        }
        Ok(Self {
            window,
            vessels,
            point_count,
        })
    }

    pub fn window(&self) -> &TimeWindow {
        &self.window
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    pub fn vessel_count(&self) -> usize {
        self.vessels.len()
    }

    pub fn vessels(&self) -> impl Iterator<Item = (&VesselId, &Vec<AisRecord>)> {
        self.vessels.iter()
    }

    /// Vessels with at least one detector-flagged record in this window.
    pub fn flagged_vessels(&self) -> std::collections::BTreeSet<VesselId> {
        self.vessels
            .iter()
            .filter(|(_, pts)| pts.iter().any(|p| p.anomaly))
            .map(|(v, _)| *v)
            .collect()
    }
}

/// Per-window budget: keep `fraction` of the input points, but at least
/// `floor` points per present vessel, never more than the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetSpec {
    pub fraction: f64,
    pub floor: usize,
}

impl BudgetSpec {
    pub fn new(fraction: f64) -> Result<Self, CompressError> {
        Self::with_floor(fraction, 1)
    }

    pub fn with_floor(fraction: f64, floor: usize) -> Result<Self, CompressError> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(CompressError::InvalidFraction(fraction));
        }
        Ok(Self { fraction, floor })
    }

    /// Kept-point target for a window:
    /// `min(count, max(round(fraction * count), vessels * floor))`.
    pub fn target(&self, point_count: usize, vessel_count: usize) -> usize {
        let by_fraction = (self.fraction * point_count as f64).round() as usize;
        by_fraction.max(vessel_count * self.floor).min(point_count)
    }
}

/// A record with the distortion its removal would introduce, in meters.
/// Protected points (window endpoints of a vessel) carry infinite priority.
#[derive(Debug, Clone, PartialEq)]
pub struct PrioritizedPoint {
    pub record: AisRecord,
    pub priority: f64,
    pub boosted: bool,
}

/// Outcome of one window selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Kept subset, per vessel and time-ordered. Points are bit-identical
    /// to the input: simplification never synthesizes positions.
    pub kept: BTreeMap<VesselId, Vec<AisRecord>>,
    pub dropped_count: usize,
    pub realized_fraction: f64,
}

impl SelectionResult {
    pub fn kept_count(&self) -> usize {
        self.kept.values().map(|v| v.len()).sum()
    }

    /// Kept records flattened in (vessel, timestamp) order.
    pub fn kept_flat(&self) -> impl Iterator<Item = &AisRecord> {
        self.kept.values().flatten()
    }

    /// Builds a result from an explicit kept map; `total` is the window's
    /// input point count.
    pub fn from_kept(kept: BTreeMap<VesselId, Vec<AisRecord>>, total: usize) -> Self {
        let kept_count: usize = kept.values().map(|v| v.len()).sum();
        Self {
            kept,
            dropped_count: total - kept_count,
            realized_fraction: if total == 0 {
                1.0
            } else {
                kept_count as f64 / total as f64
            },
        }
    }
}

/// Synchronized deviation a point's removal would introduce: the distance
/// from the point to the time-interpolated position between its retained
/// neighbors. Endpoints (and singletons) are protected with `+inf`.
pub fn base_priority(points: &[AisRecord]) -> Vec<PrioritizedPoint> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let priority = if i == 0 || i + 1 == points.len() {
                f64::INFINITY
            } else {
                sed_m(&points[i - 1], p, &points[i + 1])
            };
            PrioritizedPoint {
                record: *p,
                priority,
                boosted: false,
            }
        })
        .collect()
}

/// Time-synchronized deviation of `p` against the segment `a`..`b`.
pub(crate) fn sed_m(a: &AisRecord, p: &AisRecord, b: &AisRecord) -> f64 {
    match interpolate_at(a, b, p.timestamp) {
        Ok(pos) => haversine_m(p.position(), pos).unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::rec;
    use super::*;

    #[test]
    fn batch_groups_and_sorts() {
        let w = TimeWindow::from_index(0, 30).unwrap();
        let batch = WindowBatch::new(
            w,
            vec![
                rec(2, 20, 57.0, 10.1),
                rec(1, 10, 57.0, 10.0),
                rec(1, 5, 57.0, 10.0),
            ],
        )
        .unwrap();
        assert_eq!(batch.point_count(), 3);
        assert_eq!(batch.vessel_count(), 2);
        let first = batch.vessels().next().unwrap();
        assert_eq!(first.1[0].timestamp, 5);
    }

    #[test]
    fn batch_rejects_out_of_window_record() {
        let w = TimeWindow::from_index(0, 30).unwrap();
        assert!(matches!(
            WindowBatch::new(w, vec![rec(1, 30, 57.0, 10.0)]),
            Err(CompressError::RecordOutsideWindow { .. })
        ));
    }

    #[test]
    fn budget_target_rules() {
        let b = BudgetSpec::new(0.1).unwrap();
        assert_eq!(b.target(100, 3), 10);
        assert_eq!(b.target(100, 20), 20, "floor dominates");
        assert_eq!(b.target(5, 20), 5, "capped at input size");
        assert_eq!(BudgetSpec::new(1.0).unwrap().target(7, 2), 7);
        assert!(BudgetSpec::new(0.0).is_err());
        assert!(BudgetSpec::new(1.1).is_err());
    }

    #[test]
    fn priorities_protect_endpoints() {
        let pts = vec![
            rec(1, 0, 57.0, 10.0),
            rec(1, 10, 57.001, 10.0),
            rec(1, 20, 57.002, 10.0),
        ];
        let pr = base_priority(&pts);
        assert_eq!(pr[0].priority, f64::INFINITY);
        assert_eq!(pr[2].priority, f64::INFINITY);
        assert!(pr[1].priority.is_finite());
        assert!(!pr[1].boosted);

        let single = base_priority(&pts[..1]);
        assert_eq!(single[0].priority, f64::INFINITY);
    }

    #[test]
    fn collinear_interior_point_has_zero_priority() {
        // exactly on the time-linear segment between neighbors
        let pts = vec![
            rec(1, 0, 57.0, 10.0),
            rec(1, 10, 57.001, 10.001),
            rec(1, 20, 57.002, 10.002),
        ];
        let pr = base_priority(&pts);
        assert!(pr[1].priority < 1e-9, "{}", pr[1].priority);
    }

    #[test]
    fn dogleg_priority_matches_haversine_oracle() {
        // interior point displaced from its interpolation by a known offset
        let a = rec(1, 0, 57.0, 10.0);
        let b = rec(1, 20, 57.002, 10.0);
        let mid_lat = 57.001;
        // push the midpoint east by roughly 100 m
        let dlon = 100.0 / (111_320.0 * (57.001f64).to_radians().cos());
        let p = rec(1, 10, mid_lat, 10.0 + dlon);
        let pr = base_priority(&[a, p, b]);
        let expected = haversine_m(p.position(), interpolate_at(&a, &b, 10).unwrap()).unwrap();
        assert!((pr[1].priority - expected).abs() < 1e-9);
        assert!((pr[1].priority - 100.0).abs() < 0.5, "{}", pr[1].priority);
    }
}

//! Evaluation metrics per budget level: average distortion plus both
//! anomaly-retention readings. "Retained" counts original anomalous points
//! that survived compression verbatim; "redetected" counts store points the
//! detector flags after reconstruction. Reporting both brackets the two
//! readings of "anomalies after compression".

use std::collections::BTreeMap;

use super::{ReconstructedStore, StoreError};
use crate::compress::distortion_sum;
use crate::core_model::{AisRecord, Trajectory, VesselId};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub fraction: f64,
    pub algorithm: String,
    pub avg_distortion_m: f64,
    pub anomalies_retained: u64,
    pub anomalies_redetected: u64,
    pub total_records: u64,
    pub total_anomalies: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "fraction,algorithm,avg_distortion_m,anomalies_retained,anomalies_redetected,total_records,total_anomalies";

    /// Canonical order: ascending fraction, then algorithm name.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.fraction
                .total_cmp(&b.fraction)
                .then_with(|| a.algorithm.cmp(&b.algorithm))
        });
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.fraction,
                r.algorithm,
                r.avg_distortion_m,
                r.anomalies_retained,
                r.anomalies_redetected,
                r.total_records,
                r.total_anomalies
            ));
        }
        out
    }
}

/// Groups cleaned records into per-vessel trajectories.
pub fn trajectories_of(records: &[AisRecord]) -> BTreeMap<VesselId, Trajectory> {
    let mut grouped: BTreeMap<VesselId, Vec<AisRecord>> = BTreeMap::new();
    for rec in records {
        grouped.entry(rec.vessel).or_default().push(*rec);
    }
    grouped
        .into_iter()
        .map(|(v, mut pts)| {
            pts.sort_by_key(|r| r.timestamp);
            (v, Trajectory::from_points(pts).expect("cleaned records"))
        })
        .collect()
}

/// Scores one reconstruction against the cleaned pre-compression records.
///
/// Distortion is the synchronized deviation averaged over every original
/// point of every vessel. A vessel entirely absent from the store is an
/// invariant breach when the budget floor guarantees at least one kept
/// point (`floor >= 1`); with no floor its points are skipped.
/// `anomalies_redetected` reads the store's current flags, so run
/// [`super::redetect`] beforehand for the near-edge reading.
pub fn evaluate(
    originals: &[AisRecord],
    store: &ReconstructedStore,
    fraction: f64,
    algorithm: &str,
    floor: usize,
) -> Result<MetricsRow, StoreError> {
    if originals.is_empty() {
        return Err(StoreError::EmptyOriginals);
    }
    let original_trajs = trajectories_of(originals);

    let mut sum = 0.0;
    let mut count = 0usize;
    for (vessel, original) in &original_trajs {
        match store.trajectory(*vessel) {
            Some(kept) => {
                let (s, c) = distortion_sum(original, &kept)
                    .map_err(|_| StoreError::VesselMissing(vessel.mmsi()))?;
                sum += s;
                count += c;
            }
            None if floor >= 1 => return Err(StoreError::VesselMissing(vessel.mmsi())),
            None => {}
        }
    }
    let avg = if count == 0 { 0.0 } else { sum / count as f64 };

    let total_anomalies = originals.iter().filter(|r| r.anomaly).count() as u64;
    let anomalies_retained = originals
        .iter()
        .filter(|r| r.anomaly && store.contains(r.vessel, r.timestamp))
        .count() as u64;
    let anomalies_redetected = store.points().filter(|p| p.record.anomaly).count() as u64;

    Ok(MetricsRow {
        fraction,
        algorithm: algorithm.to_string(),
        avg_distortion_m: avg,
        anomalies_retained,
        anomalies_redetected,
        total_records: originals.len() as u64,
        total_anomalies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::near_edge::Source;

    fn rec(mmsi: u32, t: i64, lat: f64, anomaly: bool) -> AisRecord {
        let mut r =
            AisRecord::new(VesselId::new(mmsi).unwrap(), t, lat, 10.0, 8.0, 90.0, None).unwrap();
        r.anomaly = anomaly;
        r
    }

    #[test]
    fn lossless_store_scores_zero_and_full_retention() {
        let originals: Vec<AisRecord> = (0..10)
            .map(|i| rec(1, i * 10, 57.0 + i as f64 * 1e-3, i % 3 == 0))
            .collect();
        let mut store = ReconstructedStore::new();
        for r in &originals {
            store.insert(*r, Source::FarEdge(0));
        }
        let row = evaluate(&originals, &store, 1.0, "BWC-DR", 1).unwrap();
        assert_eq!(row.avg_distortion_m, 0.0);
        assert_eq!(row.anomalies_retained, row.total_anomalies);
        assert_eq!(row.total_records, 10);
    }

    #[test]
    fn known_kept_subset_matches_hand_oracle() {
        // 100-point straight track with one off-line point; drop half the
        // points including the off-line one and hand-compute the mean
        let mut originals: Vec<AisRecord> = (0..100).map(|i| rec(1, i, 57.0, false)).collect();
        for (i, r) in originals.iter_mut().enumerate() {
            r.lon = 10.0 + i as f64 * 1e-4;
        }
        let bump = 75.0 / 111_194.93;
        originals[51].lat += bump; // ~75 m north of the line

        let mut store = ReconstructedStore::new();
        for r in originals.iter().step_by(2) {
            store.insert(*r, Source::FarEdge(0));
        }
        let row = evaluate(&originals, &store, 0.5, "BWC-DR", 1).unwrap();

        // independent expectation: interior odd points interpolate exactly
        // except index 51 (off the line by ~75 m); index 99 lies past the
        // last kept point and measures to it
        let dogleg = crate::core_model::haversine_m(
            originals[51].position(),
            crate::core_model::GeoPoint::new(57.0, originals[51].lon).unwrap(),
        )
        .unwrap();
        let tail =
            crate::core_model::haversine_m(originals[99].position(), originals[98].position())
                .unwrap();
        let expected = (dogleg + tail) / 100.0;
        assert!(
            (row.avg_distortion_m - expected).abs() < 0.02,
            "{} vs {expected}",
            row.avg_distortion_m
        );
    }

    #[test]
    fn missing_vessel_with_floor_is_invariant_breach() {
        let originals = vec![rec(1, 0, 57.0, false), rec(2, 0, 57.1, false)];
        let mut store = ReconstructedStore::new();
        store.insert(originals[0], Source::FarEdge(0));
        assert_eq!(
            evaluate(&originals, &store, 0.5, "BWC-DR", 1),
            Err(StoreError::VesselMissing(2))
        );
        // floor 0: the vessel's points are skipped instead
        let row = evaluate(&originals, &store, 0.5, "BWC-DR", 0).unwrap();
        assert_eq!(row.avg_distortion_m, 0.0);
    }

    #[test]
    fn empty_originals_rejected() {
        let store = ReconstructedStore::new();
        assert_eq!(
            evaluate(&[], &store, 0.5, "BWC-DR", 1),
            Err(StoreError::EmptyOriginals)
        );
    }

    #[test]
    fn report_csv_sorted_ascending() {
        let mut report = MetricsReport::default();
        for f in [0.5, 0.1, 0.25] {
            for alg in ["BWC-DR-A", "BWC-DR"] {
                report.rows.push(MetricsRow {
                    fraction: f,
                    algorithm: alg.into(),
                    avg_distortion_m: 0.0,
                    anomalies_retained: 0,
                    anomalies_redetected: 0,
                    total_records: 1,
                    total_anomalies: 0,
                });
            }
        }
        report.sort();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], MetricsReport::CSV_HEADER);
        assert!(lines[1].starts_with("0.1,BWC-DR,"));
        assert!(lines[2].starts_with("0.1,BWC-DR-A,"));
        assert!(lines[5].starts_with("0.5,BWC-DR,"));
    }
}

//! Near-edge reconstruction: merge packets from one or more far edges with
//! coastally received AIS, optionally re-run the detector, persist, and
//! compute the evaluation metrics.

mod metrics;
mod persist;

pub use metrics::{evaluate, MetricsReport, MetricsRow};
pub use persist::{load, persist};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::anomaly::{ModelError, PrototypeModel};
use crate::core_model::{AisRecord, CoreError, TimeWindow, Trajectory, VesselId};
use crate::wire::WirePoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("io error: {0}")]
    Io(String),
    #[error("store log format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("vessel {0} has no kept points although the budget floor is at least 1")]
    VesselMissing(u32),
    #[error("evaluation needs non-empty originals")]
    EmptyOriginals,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

/// Where a stored point came from. Coastal reception outranks any far
/// edge; among far edges the lowest id wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Source {
    Coastal,
    FarEdge(u16),
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Coastal => write!(f, "coastal"),
            Source::FarEdge(id) => write!(f, "far-edge:{id}"),
        }
    }
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "coastal" {
            return Ok(Source::Coastal);
        }
        if let Some(id) = s.strip_prefix("far-edge:") {
            return id
                .parse()
                .map(Source::FarEdge)
                .map_err(|_| format!("bad far-edge id {id:?}"));
        }
        Err(format!("unknown source {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoredPoint {
    pub record: AisRecord,
    pub source: Source,
}

/// Receipt log entry: one packet as it landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketReceipt {
    pub window_index: i64,
    pub edge_id: u16,
    pub points: usize,
}

/// Merged per-vessel point sequences, keyed by timestamp so arrival order
/// never matters. Duplicate (vessel, timestamp) insertions keep the coastal
/// copy, else the lowest far-edge id, and are counted.
#[derive(Debug, Clone, Default)]
pub struct ReconstructedStore {
    vessels: BTreeMap<VesselId, BTreeMap<i64, StoredPoint>>,
    pub receipts: Vec<PacketReceipt>,
    pub duplicate_points: u64,
}

impl PartialEq for ReconstructedStore {
    fn eq(&self, other: &Self) -> bool {
        self.vessels == other.vessels
    }
}

impl ReconstructedStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts one point under the duplicate-precedence rule.
    pub fn insert(&mut self, record: AisRecord, source: Source) {
        let slot = self
            .vessels
            .entry(record.vessel)
            .or_default()
            .entry(record.timestamp);
        match slot {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(StoredPoint { record, source });
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                self.duplicate_points += 1;
                if source < o.get().source {
                    o.insert(StoredPoint { record, source });
                }
            }
        }
    }

    /// Inserts a decoded packet's points and logs the receipt.
    pub fn insert_packet(
        &mut self,
        window: &TimeWindow,
        edge_id: u16,
        points: &[WirePoint],
    ) -> Result<(), StoreError> {
        for p in points {
            let record = p.to_record(window)?;
            self.insert(record, Source::FarEdge(edge_id));
        }
        self.receipts.push(PacketReceipt {
            window_index: window.index,
            edge_id,
            points: points.len(),
        });
        Ok(())
    }

    pub fn insert_coastal(&mut self, record: AisRecord) {
        self.insert(record, Source::Coastal);
    }

    pub fn vessel_count(&self) -> usize {
        self.vessels.len()
    }

    pub fn point_count(&self) -> usize {
        self.vessels.values().map(|m| m.len()).sum()
    }

    pub fn vessels(&self) -> impl Iterator<Item = (&VesselId, &BTreeMap<i64, StoredPoint>)> {
        self.vessels.iter()
    }

    pub fn points(&self) -> impl Iterator<Item = &StoredPoint> {
        self.vessels.values().flat_map(|m| m.values())
    }

    fn points_mut(&mut self) -> impl Iterator<Item = &mut StoredPoint> {
        self.vessels.values_mut().flat_map(|m| m.values_mut())
    }

    /// The vessel's merged, time-ordered trajectory, if present.
    pub fn trajectory(&self, vessel: VesselId) -> Option<Trajectory> {
        let points = self.vessels.get(&vessel)?;
        let recs: Vec<AisRecord> = points.values().map(|p| p.record).collect();
        Trajectory::from_points(recs).ok()
    }

    pub fn contains(&self, vessel: VesselId, timestamp: i64) -> bool {
        self.vessels
            .get(&vessel)
            .is_some_and(|m| m.contains_key(&timestamp))
    }
}

/// Builds a store from decoded packets and the coastal stream.
pub fn merge(
    packets: impl IntoIterator<Item = crate::wire::DecodedPacket>,
    coastal: impl IntoIterator<Item = AisRecord>,
) -> Result<ReconstructedStore, StoreError> {
    let mut store = ReconstructedStore::new();
    for packet in packets {
        store.insert_packet(&packet.window, packet.edge_id, &packet.points)?;
    }
    for rec in coastal {
        store.insert_coastal(rec);
    }
    Ok(store)
}

/// Re-runs the detector over every stored point, rewriting the anomaly
/// flags; returns how many are flagged. Requires a calibrated model.
pub fn redetect(store: &mut ReconstructedStore, model: &PrototypeModel) -> Result<u64, StoreError> {
    if model.score_threshold.is_none() {
        return Err(StoreError::Model(ModelError::Uncalibrated));
    }
    let mut flagged = 0;
    for point in store.points_mut() {
        let hit = crate::anomaly::flag(model, &point.record)?;
        point.record.anomaly = hit;
        if hit {
            flagged += 1;
        }
    }
    Ok(flagged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::window_of;
    use crate::wire::DecodedPacket;

    fn rec(mmsi: u32, t: i64, lat: f64) -> AisRecord {
        AisRecord::new(VesselId::new(mmsi).unwrap(), t, lat, 10.0, 8.0, 90.0, None).unwrap()
    }

    fn wire_point(mmsi: u32, offset: u8) -> WirePoint {
        WirePoint {
            mmsi,
            time_offset_s: offset,
            lat_e6: 57_000_000,
            lon_e6: 10_000_000,
            sog_dkn: 80,
            cog_ddeg: 900,
            flags: 0,
        }
    }

    #[test]
    fn single_far_edge_round_trip() {
        let w = window_of(0, 30).unwrap();
        let store = merge(
            vec![DecodedPacket {
                window: w,
                edge_id: 0,
                points: vec![wire_point(1, 3), wire_point(1, 9), wire_point(2, 4)],
            }],
            vec![],
        )
        .unwrap();
        assert_eq!(store.point_count(), 3);
        assert_eq!(store.vessel_count(), 2);
        assert!(store.contains(VesselId::new(1).unwrap(), 3));
        assert_eq!(store.receipts.len(), 1);
        assert_eq!(store.receipts[0].points, 3);
    }

    #[test]
    fn coastal_copy_wins_duplicates() {
        let w = window_of(0, 30).unwrap();
        let mut store = ReconstructedStore::new();
        store.insert_packet(&w, 4, &[wire_point(1, 5)]).unwrap();
        let coastal = rec(1, 5, 57.001);
        store.insert_coastal(coastal);
        assert_eq!(store.point_count(), 1);
        assert_eq!(store.duplicate_points, 1);
        let p = store.points().next().unwrap();
        assert_eq!(p.source, Source::Coastal);
        assert_eq!(p.record.lat, 57.001);
        // arrival order must not matter
        let mut reversed = ReconstructedStore::new();
        reversed.insert_coastal(coastal);
        reversed.insert_packet(&w, 4, &[wire_point(1, 5)]).unwrap();
        assert_eq!(store, reversed);
    }

    #[test]
    fn lowest_far_edge_id_wins() {
        let w = window_of(0, 30).unwrap();
        let mut a = ReconstructedStore::new();
        a.insert_packet(&w, 2, &[wire_point(1, 5)]).unwrap();
        a.insert_packet(&w, 1, &[wire_point(1, 5)]).unwrap();
        let mut b = ReconstructedStore::new();
        b.insert_packet(&w, 1, &[wire_point(1, 5)]).unwrap();
        b.insert_packet(&w, 2, &[wire_point(1, 5)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points().next().unwrap().source, Source::FarEdge(1));
    }

    #[test]
    fn disjoint_edges_union() {
        let w = window_of(0, 30).unwrap();
        let store = merge(
            vec![
                DecodedPacket {
                    window: w,
                    edge_id: 0,
                    points: vec![wire_point(1, 1)],
                },
                DecodedPacket {
                    window: w,
                    edge_id: 1,
                    points: vec![wire_point(2, 2)],
                },
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(store.point_count(), 2);
        assert_eq!(store.vessel_count(), 2);
    }

    #[test]
    fn merge_determinism_across_arrival_orders() {
        let w0 = window_of(0, 30).unwrap();
        let w1 = window_of(30, 30).unwrap();
        let p1 = DecodedPacket {
            window: w0,
            edge_id: 0,
            points: vec![wire_point(1, 1), wire_point(2, 2)],
        };
        let p2 = DecodedPacket {
            window: w1,
            edge_id: 1,
            points: vec![wire_point(1, 10)],
        };
        let coastal = vec![rec(3, 40, 57.5)];
        let a = merge(vec![p1.clone(), p2.clone()], coastal.clone()).unwrap();
        let b = merge(vec![p2, p1], coastal).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn redetect_requires_calibrated_model() {
        let mut store = ReconstructedStore::new();
        store.insert_coastal(rec(1, 5, 57.0));
        let model = crate::anomaly::PrototypeModel::empty(0.01, 3);
        assert!(matches!(
            redetect(&mut store, &model),
            Err(StoreError::Model(ModelError::Uncalibrated))
        ));
    }

    #[test]
    fn redetect_flags_match_pointwise_detector() {
        use crate::anomaly::{calibrate_threshold, flag, train, ModelConfig};
        let train_recs: Vec<AisRecord> = (0..200).map(|i| rec(9, i as i64, 57.0004)).collect();
        let mut model = train(train_recs.iter(), &ModelConfig::default()).unwrap();
        calibrate_threshold(&mut model, train_recs.iter(), 1.0).unwrap();

        let mut store = ReconstructedStore::new();
        store.insert_coastal(rec(1, 5, 57.0004)); // in-distribution
        store.insert_coastal(rec(1, 50, 30.0)); // empty cell: anomalous
        let flagged = redetect(&mut store, &model).unwrap();
        let expected: u64 = store
            .points()
            .map(|p| flag(&model, &p.record).unwrap() as u64)
            .sum();
        assert_eq!(flagged, expected);
        assert_eq!(flagged, 1);
        // flags were written back onto the stored records
        assert!(store
            .points()
            .any(|p| p.record.anomaly && p.record.lat == 30.0));
    }

    #[test]
    fn empty_store_zero_counts() {
        use crate::anomaly::{calibrate_threshold, train, ModelConfig};
        let train_recs: Vec<AisRecord> = (0..60).map(|i| rec(9, i as i64, 57.0)).collect();
        let mut model = train(train_recs.iter(), &ModelConfig::default()).unwrap();
        calibrate_threshold(&mut model, train_recs.iter(), 1.0).unwrap();
        let mut store = ReconstructedStore::new();
        assert_eq!(redetect(&mut store, &model).unwrap(), 0);
        assert_eq!(store.point_count(), 0);
    }
}

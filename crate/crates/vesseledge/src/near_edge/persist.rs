//! Append-only store log, plain CSV:
//! `vessel,timestamp,lat,lon,sog,cog,anomaly,source`.
//!
//! Floats are written in shortest round-trip form, so a load restores the
//! exact store. Appending twice and loading yields the union under the
//! store's duplicate rule.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{ReconstructedStore, Source, StoreError};
use crate::core_model::{AisRecord, VesselId};

pub const STORE_CSV_HEADER: &str = "vessel,timestamp,lat,lon,sog,cog,anomaly,source";

/// Appends the store's points to the log, writing the header only when the
/// file does not exist or is empty.
pub fn persist(store: &ReconstructedStore, path: &Path) -> Result<(), StoreError> {
    let need_header = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let mut out = String::new();
    if need_header {
        out.push_str(STORE_CSV_HEADER);
        out.push('\n');
    }
    for point in store.points() {
        let r = &point.record;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.vessel.mmsi(),
            r.timestamp,
            r.lat,
            r.lon,
            r.sog,
            r.cog,
            r.anomaly,
            point.source
        ));
    }
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Loads a log back into a store, applying the duplicate-precedence rule.
pub fn load(path: &Path) -> Result<ReconstructedStore, StoreError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut store = ReconstructedStore::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if lineno == 1 {
            if line.trim() != STORE_CSV_HEADER {
                return Err(StoreError::Format {
                    line: 1,
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (record, source) = parse_line(&line, lineno)?;
        store.insert(record, source);
    }
    Ok(store)
}

fn parse_line(line: &str, lineno: usize) -> Result<(AisRecord, Source), StoreError> {
    let err = |message: String| StoreError::Format {
        line: lineno,
        message,
    };
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 8 {
        return Err(err(format!("expected 8 fields, got {}", fields.len())));
    }
    let mmsi: u32 = fields[0].parse().map_err(|_| err("bad mmsi".into()))?;
    let vessel = VesselId::new(mmsi).map_err(|e| err(e.to_string()))?;
    let timestamp: i64 = fields[1].parse().map_err(|_| err("bad timestamp".into()))?;
    let lat: f64 = fields[2].parse().map_err(|_| err("bad lat".into()))?;
    let lon: f64 = fields[3].parse().map_err(|_| err("bad lon".into()))?;
    let sog: f64 = fields[4].parse().map_err(|_| err("bad sog".into()))?;
    let cog: f64 = fields[5].parse().map_err(|_| err("bad cog".into()))?;
    let anomaly: bool = fields[6].parse().map_err(|_| err("bad anomaly".into()))?;
    let source: Source = fields[7].parse().map_err(err)?;
    let mut record = AisRecord::new(vessel, timestamp, lat, lon, sog, cog, None)
        .map_err(|e| err(e.to_string()))?;
    record.anomaly = anomaly;
    Ok((record, source))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(mmsi: u32, t: i64, lat: f64) -> AisRecord {
        AisRecord::new(
            VesselId::new(mmsi).unwrap(),
            t,
            lat,
            10.123456789,
            8.7,
            91.3,
            None,
        )
        .unwrap()
    }

    fn sample_store() -> ReconstructedStore {
        let mut store = ReconstructedStore::new();
        store.insert(rec(1, 5, 57.000001), Source::FarEdge(0));
        store.insert(rec(1, 35, 57.1), Source::FarEdge(1));
        store.insert(rec(2, 7, 56.993), Source::Coastal);
        store
    }

    #[test]
    fn round_trip_restores_equal_store() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.csv");
        let store = sample_store();
        persist(&store, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back, store);
    }

    #[test]
    fn appends_are_union_with_dedupe() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.csv");
        let store = sample_store();
        persist(&store, &path).unwrap();

        let mut more = ReconstructedStore::new();
        more.insert(rec(1, 5, 57.5), Source::Coastal); // duplicate key
        more.insert(rec(3, 1, 55.0), Source::FarEdge(2)); // new vessel
        persist(&more, &path).unwrap();

        let back = load(&path).unwrap();
        assert_eq!(back.point_count(), 4);
        // coastal copy replaced the far-edge one on reload
        let p = back
            .points()
            .find(|p| p.record.vessel.mmsi() == 1 && p.record.timestamp == 5)
            .unwrap();
        assert_eq!(p.source, Source::Coastal);
        assert_eq!(p.record.lat, 57.5);
    }

    #[test]
    fn empty_store_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.csv");
        persist(&ReconstructedStore::new(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.trim(), STORE_CSV_HEADER);
        assert_eq!(load(&path).unwrap().point_count(), 0);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.csv");
        std::fs::write(
            &path,
            format!("{STORE_CSV_HEADER}\n1,2,57.0,10.0,8.0,90.0,false,coastal\nnot,a,row\n"),
        )
        .unwrap();
        match load(&path) {
            Err(StoreError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn float_precision_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.csv");
        let mut store = ReconstructedStore::new();
        store.insert(rec(1, 5, 57.000000123456789), Source::FarEdge(0));
        persist(&store, &path).unwrap();
        let back = load(&path).unwrap();
        let orig = store.points().next().unwrap().record;
        let loaded = back.points().next().unwrap().record;
        assert_eq!(orig.lat.to_bits(), loaded.lat.to_bits());
        assert_eq!(orig.lon.to_bits(), loaded.lon.to_bits());
    }
}

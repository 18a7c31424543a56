//! Reader for the Danish Maritime Authority `aisdk` historical CSV schema.
//!
//! Mandatory columns: `# Timestamp`, `Type of mobile`, `MMSI`, `Latitude`,
//! `Longitude`, `SOG`, `COG`, `Heading`. Timestamps are `DD/MM/YYYY
//! HH:MM:SS` and are interpreted as UTC. Rows for non-position mobiles
//! (base stations, aids to navigation) are skipped.

use std::io::Read;
use std::path::Path;

use super::{CleanReport, IngestError};
use crate::core_model::{AisRecord, VesselId};

const MANDATORY: [&str; 8] = [
    "# Timestamp",
    "Type of mobile",
    "MMSI",
    "Latitude",
    "Longitude",
    "SOG",
    "COG",
    "Heading",
];

/// Days from the civil epoch 1970-01-01 for a proleptic Gregorian date.
fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = if m > 2 { m - 3 } else { m + 9 } as i64;
    let doy = (153 * mp + 2) / 5 + d as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Parses `DD/MM/YYYY HH:MM:SS` as UTC epoch seconds.
pub fn parse_dma_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    let (date, time) = s.split_once(' ')?;
    let mut dmy = date.split('/');
    let d: u32 = dmy.next()?.parse().ok()?;
    let m: u32 = dmy.next()?.parse().ok()?;
    let y: i64 = dmy.next()?.parse().ok()?;
    if dmy.next().is_some() || !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return None;
    }
    let mut hms = time.split(':');
    let h: i64 = hms.next()?.parse().ok()?;
    let mi: i64 = hms.next()?.parse().ok()?;
    let sec: i64 = hms.next()?.parse().ok()?;
    if hms.next().is_some() || h > 23 || mi > 59 || sec > 60 {
        return None;
    }
    Some(days_from_civil(y, m, d) * 86_400 + h * 3600 + mi * 60 + sec)
}

struct Columns {
    timestamp: usize,
    mobile_type: usize,
    mmsi: usize,
    lat: usize,
    lon: usize,
    sog: usize,
    cog: usize,
    heading: usize,
}

fn resolve_columns(headers: &csv::StringRecord) -> Result<Columns, IngestError> {
    let find = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    for name in MANDATORY {
        find(name)?;
    }
    Ok(Columns {
        timestamp: find("# Timestamp")?,
        mobile_type: find("Type of mobile")?,
        mmsi: find("MMSI")?,
        lat: find("Latitude")?,
        lon: find("Longitude")?,
        sog: find("SOG")?,
        cog: find("COG")?,
        heading: find("Heading")?,
    })
}

fn is_position_mobile(mobile: &str) -> bool {
    matches!(mobile.trim(), "Class A" | "Class B")
}

/// Reads the CSV into records, counting rejected rows in the report.
/// The returned stream is decoded and validated but not yet deduplicated;
/// run it through [`super::clean`] for the full chain.
pub fn read_dma_csv(path: &Path) -> Result<(Vec<AisRecord>, CleanReport), IngestError> {
    let file = std::fs::File::open(path)?;
    read_dma_reader(file)
}

pub fn read_dma_reader<R: Read>(reader: R) -> Result<(Vec<AisRecord>, CleanReport), IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Parse(format!("csv header: {e}")))?
        .clone();
    let cols = resolve_columns(&headers)?;

    let mut report = CleanReport::default();
    let mut out = Vec::new();
    for row in rdr.records() {
        report.records_in += 1;
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                report.parse_error += 1;
                continue;
            }
        };
        match parse_row(&row, &cols) {
            Ok(rec) => {
                report.records_out += 1;
                out.push(rec);
            }
            Err(reason) => report.count_rejection(reason),
        }
    }
    Ok((out, report))
}

/// Rejection buckets a CSV row can land in.
pub(crate) enum RowRejection {
    Parse,
    NonPosition,
    InvalidPosition,
    SentinelSpeed,
    MissingCourse,
}

fn parse_row(row: &csv::StringRecord, cols: &Columns) -> Result<AisRecord, RowRejection> {
    let get = |i: usize| row.get(i).unwrap_or("").trim();

    if !is_position_mobile(get(cols.mobile_type)) {
        return Err(RowRejection::NonPosition);
    }
    let timestamp = parse_dma_timestamp(get(cols.timestamp)).ok_or(RowRejection::Parse)?;
    let mmsi: u32 = get(cols.mmsi).parse().map_err(|_| RowRejection::Parse)?;
    let vessel = VesselId::new(mmsi).map_err(|_| RowRejection::Parse)?;
    let lat: f64 = get(cols.lat).parse().map_err(|_| RowRejection::Parse)?;
    let lon: f64 = get(cols.lon).parse().map_err(|_| RowRejection::Parse)?;
    let sog: f64 = get(cols.sog)
        .parse()
        .map_err(|_| RowRejection::MissingCourse)?;
    let cog: f64 = get(cols.cog)
        .parse()
        .map_err(|_| RowRejection::MissingCourse)?;
    let heading = {
        let raw = get(cols.heading);
        if raw.is_empty() {
            None
        } else {
            let h: f64 = raw.parse().map_err(|_| RowRejection::Parse)?;
            ((0.0..360.0).contains(&h)).then_some(h)
        }
    };
    let cog = if cog == 360.0 { 0.0 } else { cog };

    AisRecord::new(vessel, timestamp, lat, lon, sog, cog, heading).map_err(|e| {
        use crate::core_model::CoreError::*;
        match e {
            InvalidSog(_) => RowRejection::SentinelSpeed,
            InvalidCog(_) => RowRejection::MissingCourse,
            _ => RowRejection::InvalidPosition,
        }
    })
}

//! Far-edge ingestion: raw NMEA AIVDM sentences or DMA historical CSV in,
//! cleaned [`AisRecord`] streams out, with auditable rejection accounting.

pub mod dma;
pub mod multipart;
pub mod nmea;
pub mod payload;
pub mod sixbit;

use std::collections::HashSet;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::core_model::AisRecord;
use multipart::MultipartAssembler;
use payload::ReportRejection;

pub use dma::{read_dma_csv, read_dma_reader};
pub use nmea::{parse_sentence, NmeaFrame};
pub use payload::{decode_payload, PositionReport};

/// Default staleness horizon: a record more than this many seconds older
/// than the vessel's latest accepted record is dropped.
pub const DEFAULT_STALE_AFTER_S: i64 = 600;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("checksum mismatch: computed {computed:02X}, stated {stated:02X}")]
    Checksum { computed: u8, stated: u8 },
    #[error("unsupported message type {0}")]
    UnsupportedType(u8),
    #[error("truncated payload: need {need} bits, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("invalid armor character {0:?}")]
    Armor(char),
    #[error("missing mandatory column {0:?}")]
    MissingColumn(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for IngestError {
    fn from(e: std::io::Error) -> Self {
        IngestError::Io(e.to_string())
    }
}

/// Rejection accounting for one ingestion run.
///
/// `records_in` counts record-level inputs: sentences that failed before
/// assembly, assembled payload candidates, expired multipart groups, and CSV
/// data rows. Conservation holds exactly:
/// `records_in == records_out + rejected_total()`.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct CleanReport {
    pub records_in: u64,
    pub records_out: u64,
    pub bad_checksum: u64,
    pub parse_error: u64,
    pub unsupported_type: u64,
    pub incomplete_multipart: u64,
    pub invalid_position: u64,
    pub sentinel_speed: u64,
    pub missing_course: u64,
    pub duplicate: u64,
    pub stale: u64,
}

impl CleanReport {
    pub fn rejected_total(&self) -> u64 {
        self.bad_checksum
            + self.parse_error
            + self.unsupported_type
            + self.incomplete_multipart
            + self.invalid_position
            + self.sentinel_speed
            + self.missing_course
            + self.duplicate
            + self.stale
    }

    pub fn conserved(&self) -> bool {
        self.records_in == self.records_out + self.rejected_total()
    }

    /// Folds a downstream stage into this report. The stage consumed this
    /// report's `records_out` as its input.
    pub fn chain(&mut self, stage: &CleanReport) {
        debug_assert_eq!(self.records_out, stage.records_in);
        self.records_out = stage.records_out;
        self.bad_checksum += stage.bad_checksum;
        self.parse_error += stage.parse_error;
        self.unsupported_type += stage.unsupported_type;
        self.incomplete_multipart += stage.incomplete_multipart;
        self.invalid_position += stage.invalid_position;
        self.sentinel_speed += stage.sentinel_speed;
        self.missing_course += stage.missing_course;
        self.duplicate += stage.duplicate;
        self.stale += stage.stale;
    }

    pub(crate) fn count_rejection(&mut self, reason: dma::RowRejection) {
        use dma::RowRejection::*;
        match reason {
            Parse => self.parse_error += 1,
            NonPosition => self.unsupported_type += 1,
            InvalidPosition => self.invalid_position += 1,
            SentinelSpeed => self.sentinel_speed += 1,
            MissingCourse => self.missing_course += 1,
        }
    }

    fn count_report_rejection(&mut self, reason: ReportRejection) {
        match reason {
            ReportRejection::InvalidPosition | ReportRejection::InvalidMmsi => {
                self.invalid_position += 1
            }
            ReportRejection::SentinelSpeed => self.sentinel_speed += 1,
            ReportRejection::MissingCourse => self.missing_course += 1,
        }
    }

    pub const CSV_HEADER: &'static str = "records_in,records_out,bad_checksum,parse_error,unsupported_type,incomplete_multipart,invalid_position,sentinel_speed,missing_course,duplicate,stale";

    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{},{},{},{},{},{},{},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.records_in,
            self.records_out,
            self.bad_checksum,
            self.parse_error,
            self.unsupported_type,
            self.incomplete_multipart,
            self.invalid_position,
            self.sentinel_speed,
            self.missing_course,
            self.duplicate,
            self.stale,
        )
    }
}

/// Streaming NMEA decode chain: sentence framing, multipart assembly,
/// payload decode, validation. Timestamps come from TAG blocks when present,
/// falling back to the per-line receive time handed in by the caller.
#[derive(Debug, Default)]
pub struct NmeaIngest {
    assembler: MultipartAssembler,
    report: CleanReport,
    finished: bool,
}

impl NmeaIngest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one line; returns a record when the line completes one.
    pub fn push_line(&mut self, line: &str, rx_time: Option<i64>) -> Option<AisRecord> {
        if line.trim().is_empty() {
            return None; // blank separator lines are not input units
        }
        let drops_before = self.assembler.dropped_incomplete();
        let frame = match nmea::parse_sentence(line) {
            Ok(f) => f,
            Err(IngestError::Checksum { .. }) => {
                self.report.records_in += 1;
                self.report.bad_checksum += 1;
                return None;
            }
            Err(_) => {
                self.report.records_in += 1;
                self.report.parse_error += 1;
                return None;
            }
        };
        let time_hint = frame.tag_time.or(rx_time);
        let completed = self.assembler.push(frame);
        // groups expired by this push are record-level drops
        let expired = self.assembler.dropped_incomplete() - drops_before;
        self.report.records_in += expired;
        self.report.incomplete_multipart += expired;

        let completed = completed?;
        self.report.records_in += 1;
        let report = match payload::decode_payload(&completed.payload, completed.fill_bits) {
            Ok(r) => r,
            Err(IngestError::UnsupportedType(_)) => {
                self.report.unsupported_type += 1;
                return None;
            }
            Err(_) => {
                self.report.parse_error += 1;
                return None;
            }
        };
        let timestamp = match completed.tag_time.or(time_hint) {
            Some(t) => t,
            None => {
                // no receive time available: the record cannot be windowed
                self.report.parse_error += 1;
                return None;
            }
        };
        match report.into_record(timestamp) {
            Ok(rec) => {
                self.report.records_out += 1;
                Some(rec)
            }
            Err(reason) => {
                self.report.count_report_rejection(reason);
                None
            }
        }
    }

    /// Ends the stream: pending multipart groups count as incomplete.
    pub fn finish(&mut self) -> CleanReport {
        if !self.finished {
            let expired = self.assembler.finish();
            self.report.records_in += expired;
            self.report.incomplete_multipart += expired;
            self.finished = true;
        }
        self.report.clone()
    }
}

/// Reads a whole NMEA text stream. Lines without TAG-block timestamps get
/// `fallback_time`, if any.
pub fn read_nmea<R: BufRead>(
    reader: R,
    fallback_time: Option<i64>,
) -> Result<(Vec<AisRecord>, CleanReport), IngestError> {
    let mut ingest = NmeaIngest::new();
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if let Some(rec) = ingest.push_line(&line, fallback_time) {
            out.push(rec);
        }
    }
    Ok((out, ingest.finish()))
}

/// Parameters for the record-level cleaning stage.
#[derive(Debug, Clone, Copy)]
pub struct CleanParams {
    pub stale_after_s: i64,
}

impl Default for CleanParams {
    fn default() -> Self {
        Self {
            stale_after_s: DEFAULT_STALE_AFTER_S,
        }
    }
}

/// Record-level cleaning: re-validates ranges, drops duplicate
/// (vessel, timestamp) pairs (first wins), and drops per-vessel records
/// that lag the vessel's latest accepted record by more than the staleness
/// horizon. Rejections are counted, never raised.
pub fn clean(
    records: impl IntoIterator<Item = AisRecord>,
    params: CleanParams,
) -> (Vec<AisRecord>, CleanReport) {
    use crate::core_model::CoreError;

    let mut report = CleanReport::default();
    let mut seen: HashSet<(u32, i64)> = HashSet::new();
    let mut latest: std::collections::HashMap<u32, i64> = std::collections::HashMap::new();
    let mut out = Vec::new();

    for rec in records {
        report.records_in += 1;
        if let Err(e) = rec.validate() {
            match e {
                CoreError::InvalidSog(_) => report.sentinel_speed += 1,
                CoreError::InvalidCog(_) | CoreError::InvalidHeading(_) => {
                    report.missing_course += 1
                }
                _ => report.invalid_position += 1,
            }
            continue;
        }
        let key = (rec.vessel.mmsi(), rec.timestamp);
        if seen.contains(&key) {
            report.duplicate += 1;
            continue;
        }
        if let Some(&newest) = latest.get(&rec.vessel.mmsi()) {
            if newest - rec.timestamp > params.stale_after_s {
                report.stale += 1;
                continue;
            }
        }
        seen.insert(key);
        let newest = latest.entry(rec.vessel.mmsi()).or_insert(rec.timestamp);
        *newest = (*newest).max(rec.timestamp);
        report.records_out += 1;
        out.push(rec);
    }
    (out, report)
}

/// Writes records as newline-delimited JSON (debug dump format).
pub fn dump_json<W: Write>(records: &[AisRecord], mut w: W) -> Result<(), IngestError> {
    for rec in records {
        let line =
            serde_json::to_string(rec).map_err(|e| IngestError::Io(format!("json encode: {e}")))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::VesselId;

    fn rec(mmsi: u32, t: i64) -> AisRecord {
        AisRecord::new(VesselId::new(mmsi).unwrap(), t, 57.0, 10.0, 8.0, 90.0, None).unwrap()
    }

    #[test]
    fn clean_dedupes_first_wins() {
        let mut a = rec(1, 100);
        a.sog = 5.0;
        let mut b = rec(1, 100);
        b.sog = 6.0;
        let (out, report) = clean(vec![a, b], CleanParams::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].sog, 5.0);
        assert_eq!(report.duplicate, 1);
        assert!(report.conserved());
    }

    #[test]
    fn clean_rejects_out_of_range() {
        let mut bad = rec(1, 100);
        bad.lat = 90.5;
        let (out, report) = clean(vec![bad], CleanParams::default());
        assert!(out.is_empty());
        assert_eq!(report.invalid_position, 1);
        assert!(report.conserved());
    }

    #[test]
    fn clean_drops_stale_records() {
        let fresh = rec(1, 10_000);
        let stale = rec(1, 10_000 - 601);
        let edge = rec(1, 10_000 - 600);
        let (out, report) = clean(vec![fresh, stale, edge], CleanParams::default());
        assert_eq!(out.len(), 2);
        assert_eq!(report.stale, 1);
        assert!(report.conserved());
    }

    #[test]
    fn clean_conserves_distinct_records() {
        let records: Vec<_> = (0..50).map(|i| rec(1 + i % 3, 1000 + i as i64)).collect();
        let (out, report) = clean(records, CleanParams::default());
        assert_eq!(out.len(), 50);
        assert_eq!(report.rejected_total(), 0);
        assert!(report.conserved());
    }

    #[test]
    fn chain_merges_stage_reports() {
        let mut upstream = CleanReport {
            records_in: 10,
            records_out: 8,
            parse_error: 2,
            ..Default::default()
        };
        let stage = CleanReport {
            records_in: 8,
            records_out: 7,
            duplicate: 1,
            ..Default::default()
        };
        upstream.chain(&stage);
        assert_eq!(upstream.records_in, 10);
        assert_eq!(upstream.records_out, 7);
        assert_eq!(upstream.rejected_total(), 3);
        assert!(upstream.conserved());
    }

    #[test]
    fn json_dump_shape() {
        let mut out = Vec::new();
        dump_json(&[rec(219000001, 42)], &mut out).unwrap();
        let line = String::from_utf8(out).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(v["vessel"], 219000001);
        assert_eq!(v["timestamp"], 42);
        assert_eq!(v["anomaly"], false);
        assert!(v["heading"].is_null());
    }
}

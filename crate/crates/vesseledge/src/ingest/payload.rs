//! Position report decoding for message types 1, 2, 3 (Class A) and 18
//! (Class B), the types the pipeline consumes.
//!
//! Field scaling follows ITU-R M.1371: longitude and latitude are signed
//! 28/27-bit integers in 1/10000 minute (divide by 600000 for degrees), sog
//! is tenths of knots, cog tenths of degrees, heading whole degrees. The
//! standard's unavailability sentinels map to `None`.

use super::sixbit::BitField;
use super::IngestError;
use crate::core_model::{AisRecord, VesselId};

pub const LON_UNAVAILABLE_RAW: i32 = 181 * 600_000; // 0x6791AC0
pub const LAT_UNAVAILABLE_RAW: i32 = 91 * 600_000; // 0x3412140
pub const SOG_UNAVAILABLE_RAW: u32 = 1023;
pub const COG_UNAVAILABLE_RAW: u32 = 3600;
pub const HEADING_UNAVAILABLE_RAW: u32 = 511;

/// Decoded fields of one position report. Unavailable sensor values are
/// `None`; conversion to an [`AisRecord`] requires position, sog, and cog.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionReport {
    pub msg_type: u8,
    pub mmsi: u32,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub sog: Option<f64>,
    pub cog: Option<f64>,
    pub heading: Option<f64>,
    /// UTC second of the report (0-59; 60+ means unavailable/estimated).
    pub utc_second: u8,
}

fn scale_lon(raw: i32) -> Option<f64> {
    if raw == LON_UNAVAILABLE_RAW {
        return None;
    }
    let deg = raw as f64 / 600_000.0;
    (-180.0..=180.0).contains(&deg).then_some(deg)
}

fn scale_lat(raw: i32) -> Option<f64> {
    if raw == LAT_UNAVAILABLE_RAW {
        return None;
    }
    let deg = raw as f64 / 600_000.0;
    (-90.0..=90.0).contains(&deg).then_some(deg)
}

fn scale_sog(raw: u32) -> Option<f64> {
    if raw == SOG_UNAVAILABLE_RAW {
        return None;
    }
    Some(raw as f64 / 10.0)
}

fn scale_cog(raw: u32) -> Option<f64> {
    if raw >= COG_UNAVAILABLE_RAW {
        return None;
    }
    Some(raw as f64 / 10.0)
}

fn scale_heading(raw: u32) -> Option<f64> {
    if raw >= 360 {
        // 511 is the sentinel; 360-510 are invalid on the air
        return None;
    }
    Some(raw as f64)
}

/// Decodes a de-armored payload into a [`PositionReport`].
///
/// Unsupported message types yield [`IngestError::UnsupportedType`];
/// payloads too short for the advertised type yield
/// [`IngestError::Truncated`].
pub fn decode_payload(payload: &str, fill_bits: u8) -> Result<PositionReport, IngestError> {
    let bits = BitField::unarmor(payload, fill_bits)?;
    decode_bits(&bits)
}

pub(crate) fn decode_bits(bits: &BitField) -> Result<PositionReport, IngestError> {
    let msg_type = bits.get_u32(0, 6)? as u8;
    match msg_type {
        1..=3 => decode_class_a(bits, msg_type),
        18 => decode_class_b(bits),
        other => Err(IngestError::UnsupportedType(other)),
    }
}

fn decode_class_a(bits: &BitField, msg_type: u8) -> Result<PositionReport, IngestError> {
    let mmsi = bits.get_u32(8, 30)?;
    let sog = scale_sog(bits.get_u32(50, 10)?);
    let lon = scale_lon(bits.get_i32(61, 28)?);
    let lat = scale_lat(bits.get_i32(89, 27)?);
    let cog = scale_cog(bits.get_u32(116, 12)?);
    let heading = scale_heading(bits.get_u32(128, 9)?);
    let utc_second = bits.get_u32(137, 6)? as u8;
    Ok(PositionReport {
        msg_type,
        mmsi,
        lat,
        lon,
        sog,
        cog,
        heading,
        utc_second,
    })
}

fn decode_class_b(bits: &BitField) -> Result<PositionReport, IngestError> {
    let mmsi = bits.get_u32(8, 30)?;
    let sog = scale_sog(bits.get_u32(46, 10)?);
    let lon = scale_lon(bits.get_i32(57, 28)?);
    let lat = scale_lat(bits.get_i32(85, 27)?);
    let cog = scale_cog(bits.get_u32(112, 12)?);
    let heading = scale_heading(bits.get_u32(124, 9)?);
    let utc_second = bits.get_u32(133, 6)? as u8;
    Ok(PositionReport {
        msg_type: 18,
        mmsi,
        lat,
        lon,
        sog,
        cog,
        heading,
        utc_second,
    })
}

/// Where a rejected report falls in the clean accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportRejection {
    InvalidPosition,
    SentinelSpeed,
    MissingCourse,
    InvalidMmsi,
}

impl PositionReport {
    /// Builds a record at the given receive timestamp, or explains why the
    /// report cannot become one.
    pub fn into_record(self, timestamp: i64) -> Result<AisRecord, ReportRejection> {
        let vessel = VesselId::new(self.mmsi).map_err(|_| ReportRejection::InvalidMmsi)?;
        let (lat, lon) = match (self.lat, self.lon) {
            (Some(lat), Some(lon)) => (lat, lon),
            _ => return Err(ReportRejection::InvalidPosition),
        };
        let sog = self.sog.ok_or(ReportRejection::SentinelSpeed)?;
        let cog = self.cog.ok_or(ReportRejection::MissingCourse)?;
        let cog = if cog >= 360.0 { cog - 360.0 } else { cog };
        AisRecord::new(vessel, timestamp, lat, lon, sog, cog, self.heading).map_err(|e| {
            use crate::core_model::CoreError::*;
            match e {
                InvalidSog(_) => ReportRejection::SentinelSpeed,
                InvalidCog(_) | InvalidHeading(_) => ReportRejection::MissingCourse,
                _ => ReportRejection::InvalidPosition,
            }
        })
    }
}

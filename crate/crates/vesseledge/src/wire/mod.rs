//! The vessel-to-coast wire: bit-exact packet encoding and an emulated
//! low-bitrate channel.
//!
//! Packet layout, little-endian:
//!
//! ```text
//! version u8 | window index u32 | far-edge id u16 | point count u16
//! point * count (18 bytes each)
//! crc32 (IEEE, reflected) over header + points
//! ```
//!
//! Each point is `mmsi u32 (30 bits used) | time offset u8 | lat i32 at
//! 1e-6 deg | lon i32 at 1e-6 deg | sog u16 at 0.1 kn | cog u16 at 0.1 deg
//! | flags u8` — 18 bytes, so a packet carrying n points is exactly
//! `13 + 18n` bytes. Coordinate quantization is at most 0.56 m of
//! meridian arc, far below the meter-scale distortions the compressor
//! introduces.

mod capture;
mod channel;
pub mod framing;
mod packet;

pub use capture::{read_capture, write_capture, CAPTURE_MAGIC};
pub use channel::{channel_transmit, ChannelOutcome, ChannelSpec, Delivered, TimedPacket};
pub use packet::{
    decode, encode, encode_points, packet_size, DecodedPacket, WirePoint, CRC_BYTES, HEADER_BYTES,
    POINT_BYTES, WIRE_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("packet truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("packet corrupt: crc stated {stated:08X}, computed {computed:08X}")]
    Corrupt { stated: u32, computed: u32 },
    #[error("unknown wire version {0}")]
    Version(u8),
    #[error("too many points for one packet: {0}")]
    TooManyPoints(usize),
    #[error("record at {timestamp} outside window [{start}, {end})")]
    RecordOutsideWindow {
        timestamp: i64,
        start: i64,
        end: i64,
    },
    #[error("window duration {0} s exceeds the u8 time-offset range")]
    WindowTooLong(u32),
    #[error("channel bitrate must be positive")]
    InvalidBitrate,
    #[error("packet arrivals must be non-decreasing")]
    ArrivalOrder,
    #[error("capture file format error: {0}")]
    CaptureFormat(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for WireError {
    fn from(e: std::io::Error) -> Self {
        WireError::Io(e.to_string())
    }
}

/// Points the channel itself can carry per window:
/// `floor((bitrate * duration / 8 - 13) / 18)`, never negative.
pub fn channel_point_budget(spec: &ChannelSpec, window_duration_s: u32) -> usize {
    let bytes = spec.bitrate_bps * window_duration_s as f64 / 8.0;
    let payload = bytes - (HEADER_BYTES + CRC_BYTES) as f64;
    if payload < 0.0 {
        return 0;
    }
    (payload / POINT_BYTES as f64).floor() as usize
}

/// Max transmittable points of a window: the window's own point count or
/// the channel budget, whichever is smaller. The harness uses this to turn
/// a bitrate into a budget fraction.
pub fn size_budget_check(
    window_points: usize,
    spec: &ChannelSpec,
    window_duration_s: u32,
) -> usize {
    window_points.min(channel_point_budget(spec, window_duration_s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(bitrate: f64) -> ChannelSpec {
        ChannelSpec {
            bitrate_bps: bitrate,
            latency_s: 0.25,
            queue_bytes: 1 << 16,
        }
    }

    #[test]
    fn channel_budget_arithmetic() {
        // (9600 * 30 / 8 - 13) / 18 = 35987 / 18 -> 1999
        assert_eq!(channel_point_budget(&spec(9600.0), 30), 1999);
        // (2400 * 30 / 8 - 13) / 18 = 8987 / 18 -> 499
        assert_eq!(channel_point_budget(&spec(2400.0), 30), 499);
    }

    #[test]
    fn header_must_fit() {
        // 3 bit/s for 30 s is 11.25 bytes: not even the header fits
        assert_eq!(channel_point_budget(&spec(3.0), 30), 0);
    }

    #[test]
    fn budget_check_caps_at_window_points() {
        assert_eq!(size_budget_check(100, &spec(9600.0), 30), 100);
        assert_eq!(size_budget_check(5000, &spec(9600.0), 30), 1999);
    }
}

//! Packet encode/decode. The layout is normative for every far-edge and
//! near-edge implementation; see the module docs for the byte map.

use super::WireError;
use crate::compress::SelectionResult;
use crate::core_model::{AisRecord, TimeWindow, VesselId};

pub const WIRE_VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 9;
pub const POINT_BYTES: usize = 18;
pub const CRC_BYTES: usize = 4;

/// Total packet size for a point count: `13 + 18 * count`.
pub fn packet_size(point_count: usize) -> usize {
    HEADER_BYTES + POINT_BYTES * point_count + CRC_BYTES
}

/// One fixed-width wire point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WirePoint {
    pub mmsi: u32,
    /// Seconds after the window start.
    pub time_offset_s: u8,
    pub lat_e6: i32,
    pub lon_e6: i32,
    /// Tenths of knots.
    pub sog_dkn: u16,
    /// Tenths of degrees.
    pub cog_ddeg: u16,
    /// Bit 0: anomaly flag.
    pub flags: u8,
}

pub const FLAG_ANOMALY: u8 = 0x01;

impl WirePoint {
    /// Quantizes a record relative to its window.
    pub fn from_record(rec: &AisRecord, window: &TimeWindow) -> Result<Self, WireError> {
        if !window.contains(rec.timestamp) {
            return Err(WireError::RecordOutsideWindow {
                timestamp: rec.timestamp,
                start: window.start,
                end: window.end(),
            });
        }
        Ok(Self {
            mmsi: rec.vessel.mmsi(),
            time_offset_s: (rec.timestamp - window.start) as u8,
            lat_e6: (rec.lat * 1e6).round() as i32,
            lon_e6: (rec.lon * 1e6).round() as i32,
            sog_dkn: (rec.sog * 10.0).round() as u16,
            cog_ddeg: (rec.cog * 10.0).round() as u16,
            flags: if rec.anomaly { FLAG_ANOMALY } else { 0 },
        })
    }

    /// Reconstructs a record; the course wraps 360.0 back to 0 and the
    /// heading is unavailable on the wire.
    pub fn to_record(
        &self,
        window: &TimeWindow,
    ) -> Result<AisRecord, crate::core_model::CoreError> {
        let mut rec = AisRecord::new(
            VesselId::new(self.mmsi)?,
            window.start + self.time_offset_s as i64,
            self.lat_e6 as f64 / 1e6,
            self.lon_e6 as f64 / 1e6,
            self.sog_dkn as f64 / 10.0,
            (self.cog_ddeg % 3600) as f64 / 10.0,
            None,
        )?;
        rec.anomaly = self.flags & FLAG_ANOMALY != 0;
        Ok(rec)
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.mmsi.to_le_bytes());
        out.push(self.time_offset_s);
        out.extend_from_slice(&self.lat_e6.to_le_bytes());
        out.extend_from_slice(&self.lon_e6.to_le_bytes());
        out.extend_from_slice(&self.sog_dkn.to_le_bytes());
        out.extend_from_slice(&self.cog_ddeg.to_le_bytes());
        out.push(self.flags);
    }

    fn read(bytes: &[u8]) -> Self {
        Self {
            mmsi: u32::from_le_bytes(bytes[0..4].try_into().unwrap()),
            time_offset_s: bytes[4],
            lat_e6: i32::from_le_bytes(bytes[5..9].try_into().unwrap()),
            lon_e6: i32::from_le_bytes(bytes[9..13].try_into().unwrap()),
            sog_dkn: u16::from_le_bytes(bytes[13..15].try_into().unwrap()),
            cog_ddeg: u16::from_le_bytes(bytes[15..17].try_into().unwrap()),
            flags: bytes[17],
        }
    }
}

/// Encodes already-quantized points into a packet.
pub fn encode_points(
    window_index: u32,
    edge_id: u16,
    points: &[WirePoint],
) -> Result<Vec<u8>, WireError> {
    if points.len() > u16::MAX as usize {
        return Err(WireError::TooManyPoints(points.len()));
    }
    let mut out = Vec::with_capacity(packet_size(points.len()));
    out.push(WIRE_VERSION);
    out.extend_from_slice(&window_index.to_le_bytes());
    out.extend_from_slice(&edge_id.to_le_bytes());
    out.extend_from_slice(&(points.len() as u16).to_le_bytes());
    for p in points {
        p.write(&mut out);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Encodes a window selection. Points are laid out vessel-ascending then
/// time-ascending, so identical selections produce identical bytes.
pub fn encode(
    selection: &SelectionResult,
    window: &TimeWindow,
    edge_id: u16,
) -> Result<Vec<u8>, WireError> {
    if window.duration_s > u8::MAX as u32 + 1 {
        return Err(WireError::WindowTooLong(window.duration_s));
    }
    let points: Vec<WirePoint> = selection
        .kept_flat()
        .map(|rec| WirePoint::from_record(rec, window))
        .collect::<Result<_, _>>()?;
    encode_points(window.index as u32, edge_id, &points)
}

/// A decoded packet.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPacket {
    pub window: TimeWindow,
    pub edge_id: u16,
    pub points: Vec<WirePoint>,
}

/// Decodes and verifies a packet. The CRC is checked before anything else
/// is interpreted; the window is reconstructed from the configured
/// `window_duration_s` (the duration is channel configuration, not wire
/// state).
pub fn decode(bytes: &[u8], window_duration_s: u32) -> Result<DecodedPacket, WireError> {
    let min = HEADER_BYTES + CRC_BYTES;
    if bytes.len() < min {
        return Err(WireError::Truncated {
            need: min,
            have: bytes.len(),
        });
    }
    let body = &bytes[..bytes.len() - CRC_BYTES];
    let stated = u32::from_le_bytes(bytes[bytes.len() - CRC_BYTES..].try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stated != computed {
        return Err(WireError::Corrupt { stated, computed });
    }
    let version = body[0];
    if version != WIRE_VERSION {
        return Err(WireError::Version(version));
    }
    let window_index = u32::from_le_bytes(body[1..5].try_into().unwrap());
    let edge_id = u16::from_le_bytes(body[5..7].try_into().unwrap());
    let count = u16::from_le_bytes(body[7..9].try_into().unwrap()) as usize;
    let expected = packet_size(count);
    if bytes.len() != expected {
        return Err(WireError::Truncated {
            need: expected,
            have: bytes.len(),
        });
    }
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let at = HEADER_BYTES + i * POINT_BYTES;
        points.push(WirePoint::read(&body[at..at + POINT_BYTES]));
    }
    let window = TimeWindow::from_index(window_index as i64, window_duration_s)
        .map_err(|_| WireError::WindowTooLong(window_duration_s))?;
    Ok(DecodedPacket {
        window,
        edge_id,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::{BudgetSpec, WindowBatch};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window() -> TimeWindow {
        TimeWindow::from_index(51_021_600, 30).unwrap()
    }

    fn sample_selection(n_points: usize) -> SelectionResult {
        let w = window();
        let records: Vec<AisRecord> = (0..n_points)
            .map(|i| {
                let mut r = AisRecord::new(
                    VesselId::new(219_000_001 + (i as u32 % 4)).unwrap(),
                    w.start + (i as i64 % 30),
                    57.0 + i as f64 * 1e-4,
                    10.8 - i as f64 * 1e-4,
                    (i % 200) as f64 / 10.0,
                    (i % 3600) as f64 / 10.0,
                    None,
                )
                .unwrap();
                r.anomaly = i % 5 == 0;
                r
            })
            .collect();
        // duplicates of (vessel, offset) are fine for encoding tests
        let batch = WindowBatch::new(w, records).unwrap();
        crate::compress::bwc_dr(&batch, &BudgetSpec::new(1.0).unwrap()).unwrap()
    }

    #[test]
    fn empty_selection_is_13_bytes() {
        let sel = SelectionResult::from_kept(Default::default(), 0);
        let bytes = encode(&sel, &window(), 7).unwrap();
        assert_eq!(bytes.len(), 13);
        let decoded = decode(&bytes, 30).unwrap();
        assert_eq!(decoded.edge_id, 7);
        assert!(decoded.points.is_empty());
    }

    #[test]
    fn ten_points_are_193_bytes() {
        let sel = sample_selection(10);
        assert_eq!(sel.kept_count(), 10);
        let bytes = encode(&sel, &window(), 0).unwrap();
        assert_eq!(bytes.len(), 193);
        assert_eq!(packet_size(10), 193);
    }

    #[test]
    fn round_trip_to_quantization() {
        let sel = sample_selection(40);
        let bytes = encode(&sel, &window(), 3).unwrap();
        let decoded = decode(&bytes, 30).unwrap();
        assert_eq!(decoded.window, window());
        assert_eq!(decoded.points.len(), sel.kept_count());
        for (orig, wire) in sel.kept_flat().zip(&decoded.points) {
            let back = wire.to_record(&decoded.window).unwrap();
            assert_eq!(back.vessel, orig.vessel);
            assert_eq!(back.timestamp, orig.timestamp);
            assert!((back.lat - orig.lat).abs() <= 0.5e-6);
            assert!((back.lon - orig.lon).abs() <= 0.5e-6);
            assert!((back.sog - orig.sog).abs() <= 0.05);
            let dcog = (back.cog - orig.cog).abs();
            assert!(dcog.min(360.0 - dcog) <= 0.05);
            assert_eq!(back.anomaly, orig.anomaly);
        }
    }

    #[test]
    fn randomized_round_trip_fuzz() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let w = window();
        for _ in 0..1000 {
            let n = rng.random_range(0..25usize);
            let mut kept: std::collections::BTreeMap<VesselId, Vec<AisRecord>> = Default::default();
            let mut total = 0;
            for _ in 0..n {
                let mut r = AisRecord::new(
                    VesselId::new(rng.random_range(0..=999_999_999)).unwrap(),
                    w.start + rng.random_range(0..30),
                    rng.random_range(-90.0..=90.0),
                    rng.random_range(-180.0..=180.0),
                    rng.random_range(0.0..102.3),
                    rng.random_range(0.0..360.0),
                    None,
                )
                .unwrap();
                r.anomaly = rng.random();
                kept.entry(r.vessel).or_default().push(r);
                total += 1;
            }
            for pts in kept.values_mut() {
                pts.sort_by_key(|r| (r.timestamp, r.lat.to_bits()));
            }
            let sel = SelectionResult::from_kept(kept, total);
            let bytes = encode(&sel, &w, rng.random()).unwrap();
            let decoded = decode(&bytes, 30).unwrap();
            assert_eq!(decoded.points.len(), total);
            for (orig, wire) in sel.kept_flat().zip(&decoded.points) {
                assert_eq!(wire.mmsi, orig.vessel.mmsi());
                assert_eq!(
                    wire.time_offset_s as i64,
                    orig.timestamp - w.start,
                    "field-exact after quantization"
                );
                assert_eq!(wire.lat_e6, (orig.lat * 1e6).round() as i32);
                assert_eq!(wire.lon_e6, (orig.lon * 1e6).round() as i32);
                assert_eq!(wire.sog_dkn, (orig.sog * 10.0).round() as u16);
                assert_eq!(wire.cog_ddeg, (orig.cog * 10.0).round() as u16);
            }
        }
    }

    #[test]
    fn any_flipped_bit_is_rejected() {
        let sel = sample_selection(5);
        let bytes = encode(&sel, &window(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..200 {
            let mut corrupted = bytes.clone();
            let bit = rng.random_range(0..bytes.len() * 8);
            corrupted[bit / 8] ^= 1 << (bit % 8);
            match decode(&corrupted, 30) {
                Err(WireError::Corrupt { .. }) => {}
                other => panic!("bit {bit}: expected corrupt, got {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_version_rejected() {
        let sel = sample_selection(2);
        let mut bytes = encode(&sel, &window(), 1).unwrap();
        bytes[0] = 255;
        // keep the crc valid so the version check is what fires
        let body_len = bytes.len() - CRC_BYTES;
        let crc = crc32fast::hash(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&crc.to_le_bytes());
        assert_eq!(decode(&bytes, 30), Err(WireError::Version(255)));
    }

    #[test]
    fn truncation_detected() {
        let sel = sample_selection(3);
        let bytes = encode(&sel, &window(), 1).unwrap();
        assert!(matches!(
            decode(&bytes[..10], 30),
            Err(WireError::Truncated { .. })
        ));
        // mid-packet cut: crc check fires first (corrupt), a shorter
        // prefix that still parses a header reports truncation
        assert!(decode(&bytes[..bytes.len() - 1], 30).is_err());
    }

    #[test]
    fn window_longer_than_offset_range_rejected_at_encode() {
        let sel = sample_selection(1);
        let w = TimeWindow::from_index(0, 300).unwrap();
        assert!(matches!(
            encode(&sel, &w, 0),
            Err(WireError::WindowTooLong(300))
        ));
    }

    #[test]
    fn record_outside_window_rejected() {
        let sel = sample_selection(2);
        let other = TimeWindow::from_index(51_021_601, 30).unwrap();
        assert!(matches!(
            encode(&sel, &other, 0),
            Err(WireError::RecordOutsideWindow { .. })
        ));
    }
}

//! Bitrate/latency/queue channel emulator standing in for the maritime
//! wireless link (satellite, VDES, HF: tens of kilobits per second).
//!
//! Serialization is FIFO at the configured bitrate; latency is added after
//! transmission. A packet arriving when the queued-but-untransmitted bytes
//! (including the one on the air) would exceed the queue capacity is
//! dropped — newest first, counted, never raised.

use std::collections::VecDeque;

use super::WireError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub bitrate_bps: f64,
    pub latency_s: f64,
    pub queue_bytes: usize,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            bitrate_bps: 9600.0,
            latency_s: 0.25,
            queue_bytes: 1 << 16,
        }
    }
}

/// A packet offered to the channel at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedPacket {
    pub arrival_s: f64,
    pub bytes: Vec<u8>,
}

/// A packet that made it across.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivered {
    pub arrival_s: f64,
    pub delivery_s: f64,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelOutcome {
    pub delivered: Vec<Delivered>,
    pub dropped: usize,
}

impl ChannelOutcome {
    pub fn offered(&self) -> usize {
        self.delivered.len() + self.dropped
    }
}

/// Runs the packets through the emulated link. Arrival times must be
/// non-decreasing. Delivery time of an accepted packet is
/// `max(arrival, previous transmission end) + bytes*8/bitrate + latency`;
/// FIFO order is preserved.
pub fn channel_transmit(
    packets: Vec<TimedPacket>,
    spec: &ChannelSpec,
) -> Result<ChannelOutcome, WireError> {
    if spec.bitrate_bps.is_nan() || spec.bitrate_bps <= 0.0 {
        return Err(WireError::InvalidBitrate);
    }
    let mut outcome = ChannelOutcome::default();
    let mut last_arrival = f64::NEG_INFINITY;
    let mut service_end = f64::NEG_INFINITY;
    // packets accepted but not fully transmitted: (transmission end, size)
    let mut backlog: VecDeque<(f64, usize)> = VecDeque::new();
    let mut backlog_bytes = 0usize;

    for packet in packets {
        if packet.arrival_s < last_arrival {
            return Err(WireError::ArrivalOrder);
        }
        last_arrival = packet.arrival_s;

        while let Some(&(end, size)) = backlog.front() {
            if end <= packet.arrival_s {
                backlog.pop_front();
                backlog_bytes -= size;
            } else {
                break;
            }
        }
        let size = packet.bytes.len();
        if backlog_bytes + size > spec.queue_bytes {
            outcome.dropped += 1;
            continue;
        }
        let start = packet.arrival_s.max(service_end);
        service_end = start + size as f64 * 8.0 / spec.bitrate_bps;
        backlog.push_back((service_end, size));
        backlog_bytes += size;
        outcome.delivered.push(Delivered {
            arrival_s: packet.arrival_s,
            delivery_s: service_end + spec.latency_s,
            bytes: packet.bytes,
        });
    }
    Ok(outcome)
}

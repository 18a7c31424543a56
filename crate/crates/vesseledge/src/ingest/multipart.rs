//! Reassembly of AIS messages spanning multiple NMEA sentences.
//!
//! Fragments are keyed by (message id, channel); a group completes when all
//! fragments are present and is dropped as incomplete when 64 subsequent
//! frames or 60 seconds pass without completion.

use std::collections::HashMap;

use super::nmea::NmeaFrame;

const EXPIRY_FRAMES: u64 = 64;
const EXPIRY_SECONDS: i64 = 60;

/// A fully assembled payload ready for decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletePayload {
    pub payload: String,
    pub fill_bits: u8,
    /// Receive time of the completing fragment.
    pub tag_time: Option<i64>,
}

#[derive(Debug)]
struct Pending {
    fragments: Vec<Option<NmeaFrame>>,
    first_seen_frame: u64,
    first_seen_time: Option<i64>,
}

impl Pending {
    fn complete(&self) -> bool {
        self.fragments.iter().all(|f| f.is_some())
    }
}

#[derive(Debug, Default)]
pub struct MultipartAssembler {
    pending: HashMap<(Option<u8>, Option<char>), Pending>,
    frames_seen: u64,
    dropped_incomplete: u64,
}

impl MultipartAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Groups dropped so far because a fragment never arrived.
    pub fn dropped_incomplete(&self) -> u64 {
        self.dropped_incomplete
    }

    /// Feeds one frame; returns the completed payload when this frame
    /// finishes a message (single-fragment frames pass straight through).
    pub fn push(&mut self, frame: NmeaFrame) -> Option<CompletePayload> {
        self.frames_seen += 1;
        self.expire(frame.tag_time);

        if frame.fragment_count == 1 {
            return Some(CompletePayload {
                payload: frame.payload,
                fill_bits: frame.fill_bits,
                tag_time: frame.tag_time,
            });
        }

        let key = (frame.message_id, frame.channel);
        let slot_count = frame.fragment_count as usize;
        let entry = self.pending.entry(key).or_insert_with(|| Pending {
            fragments: vec![None; slot_count],
            first_seen_frame: self.frames_seen,
            first_seen_time: frame.tag_time,
        });
        if entry.fragments.len() != slot_count {
            // conflicting group under the same key: restart with this frame
            entry.fragments = vec![None; slot_count];
            entry.first_seen_frame = self.frames_seen;
            entry.first_seen_time = frame.tag_time;
            self.dropped_incomplete += 1;
        }
        let idx = frame.fragment_index as usize - 1;
        entry.fragments[idx] = Some(frame);

        if entry.complete() {
            let entry = self.pending.remove(&key).unwrap();
            let mut payload = String::new();
            let mut fill = 0;
            let mut tag_time = None;
            for frag in entry.fragments.into_iter().flatten() {
                payload.push_str(&frag.payload);
                fill = frag.fill_bits; // fill applies to the final fragment
                if frag.tag_time.is_some() {
                    tag_time = frag.tag_time;
                }
            }
            return Some(CompletePayload {
                payload,
                fill_bits: fill,
                tag_time,
            });
        }
        None
    }

    /// Flushes remaining groups at end of stream; they count as incomplete.
    pub fn finish(&mut self) -> u64 {
        let pending = self.pending.len() as u64;
        self.dropped_incomplete += pending;
        self.pending.clear();
        pending
    }

    fn expire(&mut self, now: Option<i64>) {
        let frames_seen = self.frames_seen;
        let before = self.pending.len();
        self.pending.retain(|_, p| {
            if frames_seen.saturating_sub(p.first_seen_frame) > EXPIRY_FRAMES {
                return false;
            }
            if let (Some(now), Some(first)) = (now, p.first_seen_time) {
                if now - first > EXPIRY_SECONDS {
                    return false;
                }
            }
            true
        });
        self.dropped_incomplete += (before - self.pending.len()) as u64;
    }
}

//! Rolling record of which vessels were flagged in recently completed
//! windows. The compressor boosts vessels flagged within the last
//! `depth` (default 3) completed windows.

use std::collections::{BTreeSet, VecDeque};

use crate::core_model::VesselId;

pub const DEFAULT_HISTORY_DEPTH: usize = 3;

#[derive(Debug, Clone)]
pub struct AnomalyHistory {
    depth: usize,
    windows: VecDeque<(i64, BTreeSet<VesselId>)>,
}

impl Default for AnomalyHistory {
    fn default() -> Self {
        Self::new(DEFAULT_HISTORY_DEPTH)
    }
}

impl AnomalyHistory {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            windows: VecDeque::new(),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Records the flagged vessels of a completed window. Push windows in
    /// order, including empty ones; only the newest `depth` are retained.
    pub fn push_completed(&mut self, window_index: i64, flagged: BTreeSet<VesselId>) {
        self.windows.push_back((window_index, flagged));
        while self.windows.len() > self.depth {
            self.windows.pop_front();
        }
    }

    /// True iff the vessel was flagged in any of the `depth` windows
    /// strictly preceding `current_index`. The index guard keeps one-off
    /// pushes from leaking past the horizon.
    pub fn flagged_before(&self, vessel: VesselId, current_index: i64) -> bool {
        let horizon = current_index - self.depth as i64;
        self.windows
            .iter()
            .filter(|(idx, _)| *idx >= horizon && *idx < current_index)
            .any(|(_, set)| set.contains(&vessel))
    }
}

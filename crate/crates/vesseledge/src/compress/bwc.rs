//! Greedy global elimination under a shared window budget.
//!
//! All vessels of a window compete for the same budget. Interior points
//! enter a min-heap keyed by the distortion their removal would introduce
//! (recomputed for the two retained neighbors after every removal, in the
//! style of iterative simplification under synchronized deviation). Vessel
//! window-endpoints are protected and only fall in a last-resort pass when
//! the budget is below the protected count.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use super::{sed_m, BudgetSpec, CompressError, SelectionResult, WindowBatch};
use crate::anomaly::AnomalyHistory;
use crate::core_model::VesselId;

/// Priority multiplier for recently anomalous vessels.
pub const DEFAULT_BOOST_FACTOR: f64 = 4.0;

#[derive(Debug)]
struct Node {
    rec: crate::core_model::AisRecord,
    prev: Option<usize>,
    next: Option<usize>,
    alive: bool,
    gen: u64,
}

#[derive(Debug, PartialEq)]
struct HeapKey {
    priority: f64,
    timestamp: i64,
    mmsi: u32,
    node: usize,
    gen: u64,
}

impl Eq for HeapKey {}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // lower priority first, then older timestamp, then smaller mmsi
        self.priority
            .total_cmp(&other.priority)
            .then(self.timestamp.cmp(&other.timestamp))
            .then(self.mmsi.cmp(&other.mmsi))
            .then(self.node.cmp(&other.node))
            .then(self.gen.cmp(&other.gen))
    }
}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Bandwidth-constrained selection with no anomaly bias.
pub fn bwc_dr(batch: &WindowBatch, budget: &BudgetSpec) -> Result<SelectionResult, CompressError> {
    select(batch, budget, &BTreeSet::new(), 1.0)
}

/// Bandwidth-constrained selection with an explicit boost set; the language
/// bindings drive this directly instead of tracking an [`AnomalyHistory`].
pub fn bwc_dr_with_boost(
    batch: &WindowBatch,
    budget: &BudgetSpec,
    boosted: &BTreeSet<VesselId>,
    boost_factor: f64,
) -> Result<SelectionResult, CompressError> {
    select(batch, budget, boosted, boost_factor)
}

/// Bandwidth-constrained selection that multiplies every finite priority of
/// a boosted vessel by `boost_factor`. A vessel is boosted when it was
/// flagged in any of the history's completed windows preceding this one, or
/// by the current window's incoming flags.
pub fn bwc_dr_a(
    batch: &WindowBatch,
    budget: &BudgetSpec,
    history: &AnomalyHistory,
    boost_factor: f64,
) -> Result<SelectionResult, CompressError> {
    let mut boosted = batch.flagged_vessels();
    let current = batch.window().index;
    for (vessel, _) in batch.vessels() {
        if history.flagged_before(*vessel, current) {
            boosted.insert(*vessel);
        }
    }
    select(batch, budget, &boosted, boost_factor)
}

fn select(
    batch: &WindowBatch,
    budget: &BudgetSpec,
    boosted: &BTreeSet<VesselId>,
    boost_factor: f64,
) -> Result<SelectionResult, CompressError> {
    BudgetSpec::with_floor(budget.fraction, budget.floor)?;
    let total = batch.point_count();
    let target = budget.target(total, batch.vessel_count());

    // arena of per-vessel doubly linked lists
    let mut nodes: Vec<Node> = Vec::with_capacity(total);
    let mut vessel_alive: HashMap<VesselId, usize> = HashMap::new();
    let mut heap: BinaryHeap<Reverse<HeapKey>> = BinaryHeap::with_capacity(total);

    for (vessel, points) in batch.vessels() {
        let base = nodes.len();
        let n = points.len();
        for (i, rec) in points.iter().enumerate() {
            nodes.push(Node {
                rec: *rec,
                prev: (i > 0).then(|| base + i - 1),
                next: (i + 1 < n).then(|| base + i + 1),
                alive: true,
                gen: 0,
            });
        }
        vessel_alive.insert(*vessel, n);
        let boost = if boosted.contains(vessel) {
            boost_factor
        } else {
            1.0
        };
        for i in 1..n.saturating_sub(1) {
            let idx = base + i;
            let p = sed_m(&points[i - 1], &points[i], &points[i + 1]);
            push_key(&mut heap, &nodes, idx, p * boost);
        }
    }

    let mut kept = total;
    while kept > target {
        let Some(Reverse(key)) = heap.pop() else {
            break; // only protected points remain
        };
        let node = &nodes[key.node];
        if !node.alive || node.gen != key.gen {
            continue; // stale entry
        }
        let vessel = node.rec.vessel;
        let remaining = vessel_alive[&vessel];
        if remaining <= budget.floor {
            continue; // vessel already at its floor
        }

        // unlink
        let (prev, next) = (node.prev, node.next);
        nodes[key.node].alive = false;
        if let Some(p) = prev {
            nodes[p].next = next;
        }
        if let Some(n) = next {
            nodes[n].prev = prev;
        }
        kept -= 1;
        *vessel_alive.get_mut(&vessel).unwrap() -= 1;

        let boost = if boosted.contains(&vessel) {
            boost_factor
        } else {
            1.0
        };
        // neighbors' removal costs change; boost re-applied on recompute
        for idx in [prev, next].into_iter().flatten() {
            let (Some(p), Some(n)) = (nodes[idx].prev, nodes[idx].next) else {
                continue; // endpoint stays protected
            };
            nodes[idx].gen += 1;
            let pr = sed_m(
                &nodes[p].rec.clone(),
                &nodes[idx].rec.clone(),
                &nodes[n].rec.clone(),
            );
            push_key(&mut heap, &nodes, idx, pr * boost);
        }
    }

    // last resort: budget below the protected count; drop oldest first,
    // then smaller mmsi, skipping vessels already at the floor
    if kept > target {
        let mut protected: Vec<usize> = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.alive)
            .map(|(i, _)| i)
            .collect();
        protected.sort_by(|&a, &b| {
            nodes[a]
                .rec
                .timestamp
                .cmp(&nodes[b].rec.timestamp)
                .then(nodes[a].rec.vessel.cmp(&nodes[b].rec.vessel))
        });
        for idx in protected {
            if kept <= target {
                break;
            }
            let vessel = nodes[idx].rec.vessel;
            if vessel_alive[&vessel] <= budget.floor {
                continue;
            }
            nodes[idx].alive = false;
            kept -= 1;
            *vessel_alive.get_mut(&vessel).unwrap() -= 1;
        }
    }

    let mut result: BTreeMap<VesselId, Vec<crate::core_model::AisRecord>> = BTreeMap::new();
    for node in nodes.iter().filter(|n| n.alive) {
        result.entry(node.rec.vessel).or_default().push(node.rec);
    }
    Ok(SelectionResult::from_kept(result, total))
}

fn push_key(heap: &mut BinaryHeap<Reverse<HeapKey>>, nodes: &[Node], idx: usize, priority: f64) {
    if !priority.is_finite() {
        return; // protected sentinels never enter the heap
    }
    heap.push(Reverse(HeapKey {
        priority,
        timestamp: nodes[idx].rec.timestamp,
        mmsi: nodes[idx].rec.vessel.mmsi(),
        node: idx,
        gen: nodes[idx].gen,
    }));
}

//! VesselEdge data path: turn a vessel into a mobile AIS sensor that relays
//! compressed, anomaly-prioritized traffic over a low-bitrate link.
//!
//! The crate is organized along the pipeline:
//!
//! * [`core_model`] — shared domain types, tumbling time windows, geodesics.
//! * [`ingest`] — NMEA AIVDM decoding and DMA CSV reading into cleaned
//!   position records.
//! * [`anomaly`] — per-cell Gaussian-mixture movement prototypes with
//!   streaming updates, thresholded flagging, and model federation.
//! * [`compress`] — dead-reckoning baseline plus bandwidth-constrained
//!   point selection over 30 s windows, with anomaly-aware prioritization.
//! * [`wire`] — compact packet encoding and a bitrate/latency channel
//!   emulator standing in for the maritime wireless link.
//! * [`near_edge`] — reconstruction, merge, re-detection, persistence, and
//!   the evaluation metrics.
//! * [`harness`] — scenario configuration, batch replay, budget sweeps, and
//!   the far-edge / near-edge live processes.
//! * [`synth`] — deterministic traffic generators used by the test suites
//!   and the `gen-data` subcommand.

pub mod anomaly;
pub mod compress;
pub mod core_model;
pub mod harness;
pub mod ingest;
pub mod near_edge;
pub mod synth;
pub mod wire;

pub use core_model::{AisRecord, GeoPoint, TimeWindow, Trajectory, VesselId};

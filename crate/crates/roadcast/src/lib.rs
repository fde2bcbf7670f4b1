//! Deterministic discrete-event simulation of multi-hop broadcast
//! dissemination in vehicular ad-hoc networks.
//!
//! The crate models a straight multi-lane highway with two vehicle flows, a
//! unit-disk radio with optional airtime-overlap collisions, and four
//! broadcast protocols behind one interface: flooding, probabilistic
//! forwarding (WPBM), distance-based relay selection (ODAM), and the
//! dual-list variant with angle-based forwarding inhibition (ODAM-C). A run
//! produces a per-packet ledger from which delivery rate, forwarding
//! redundancy, and end-to-end latency are computed.
//!
//! Every run is a pure function of its configuration and seed: same inputs,
//! bit-identical outputs. See the guide under `book/` for a chapter-by-
//! chapter walk through the concepts; the `roadcast` CLI (in the companion
//! crate) runs single simulations, multi-seed sweeps, and the built-in
//! interference replay.
//!
//! ```
//! use roadcast::scenario::{parse, preset, Preset};
//! use roadcast::sim::run_scenario;
//!
//! // Start from the sparse preset, shrink it so the doctest stays quick.
//! let mut cfg = preset(Preset::Scenario1);
//! cfg.vehicle_count = 20;
//! cfg.first_send = 10.0;
//! cfg.last_send = 10.0;
//! cfg.sim_end = 20.0;
//!
//! let out = run_scenario(&cfg).unwrap();
//! assert_eq!(out.records.len(), 1);
//! let table = out.metrics();
//! assert!(table.summary.mean_pdr >= 0.0);
//! ```

pub mod engine;
pub mod geometry;
pub mod interference;
pub mod medium;
pub mod metrics;
pub mod mobility;
pub mod protocols;
pub mod scenario;
pub mod sim;

mod book;

use std::fmt;

/// Identity of a vehicle/node. Vehicles are numbered contiguously from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

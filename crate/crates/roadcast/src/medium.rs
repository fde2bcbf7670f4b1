//! Radio propagation and contention.
//!
//! Propagation is a unit disk: a broadcast reaches every node whose distance
//! from the transmitter is at most `range` (boundary inclusive). Positions
//! are sampled once at transmission start for the whole frame; airtimes are
//! far below the mobility tick. Contention is optional: under
//! [`CollisionModel::AirtimeOverlap`] a receiver that would hear two frames
//! with overlapping airtime loses both, which is what broadcast without
//! RTS/CTS does to simultaneous transmissions.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{EventKind, EventQueue, SimTime, Ticket};
use crate::geometry::{Position, RoadMetric};
use crate::mobility::Vehicle;
use crate::protocols::Packet;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionModel {
    /// Every in-range reception is delivered.
    Ideal,
    /// Two receptions whose airtimes overlap at a node are both lost.
    AirtimeOverlap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    /// Transmission range in meters.
    pub range: f64,
    /// Channel data rate, bits per second.
    pub data_rate: f64,
    /// Frame size in bits.
    pub packet_size_bits: f64,
    /// Propagation speed, m/s.
    pub prop_speed: f64,
    pub collision_model: CollisionModel,
    /// Probability that a reception at the very edge of the range is lost;
    /// scales linearly with distance from the transmitter. 0 disables the
    /// model.
    pub edge_loss_prob: f64,
}

impl RadioConfig {
    /// Time one frame occupies the channel, seconds.
    pub fn airtime(&self) -> f64 {
        self.packet_size_bits / self.data_rate
    }
}

impl Default for RadioConfig {
    fn default() -> RadioConfig {
        RadioConfig {
            range: 300.0,
            data_rate: 6.0e6,
            packet_size_bits: 8000.0,
            prop_speed: 3.0e8,
            collision_model: CollisionModel::Ideal,
            edge_loss_prob: 0.0,
        }
    }
}

/// One frame on the air.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub packet: Packet,
    pub tx_node: NodeId,
    pub tx_pos: Position,
    pub start: SimTime,
    pub airtime: f64,
}

/// Node ids within `range` of `tx_pos`, excluding the transmitter itself.
/// A node at exactly `range` meters is in range.
pub fn neighbors(
    tx_node: NodeId,
    tx_pos: Position,
    vehicles: &[Vehicle],
    range: f64,
    metric: &RoadMetric,
) -> Vec<NodeId> {
    vehicles
        .iter()
        .filter(|v| v.id != tx_node && metric.distance(tx_pos, v.pos) <= range)
        .map(|v| v.id)
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct RxInterval {
    start: SimTime,
    end: SimTime,
    ticket: Option<Ticket>,
    voided: bool,
}

/// Shared-channel state: per-node reception intervals used by the airtime
/// overlap check.
pub struct Medium {
    pub cfg: RadioConfig,
    metric: RoadMetric,
    inflight: BTreeMap<NodeId, Vec<RxInterval>>,
    /// Receptions destroyed by overlapping airtime.
    pub collisions: u64,
}

impl Medium {
    pub fn new(cfg: RadioConfig, metric: RoadMetric) -> Medium {
        Medium {
            cfg,
            metric,
            inflight: BTreeMap::new(),
            collisions: 0,
        }
    }

    /// Deliver `tx` to every in-range node: schedules one `Rx` per reachable
    /// neighbor at `start + airtime + distance / prop_speed`, plus a `TxEnd`
    /// marker. Under `AirtimeOverlap`, receptions that overlap in airtime at
    /// a node void each other.
    pub fn broadcast(
        &mut self,
        queue: &mut EventQueue,
        tx: &Transmission,
        vehicles: &[Vehicle],
        rng: &mut ChaCha8Rng,
    ) {
        queue
            .schedule(
                tx.start.offset(tx.airtime),
                EventKind::TxEnd {
                    node: tx.tx_node,
                    packet_id: tx.packet.id,
                },
            )
            .expect("TxEnd is in the future");

        for node in neighbors(tx.tx_node, tx.tx_pos, vehicles, self.cfg.range, &self.metric) {
            let dist = {
                let v = &vehicles[node.0 as usize];
                debug_assert_eq!(v.id, node);
                self.metric.distance(tx.tx_pos, v.pos)
            };
            if self.cfg.edge_loss_prob > 0.0 {
                let p_loss = self.cfg.edge_loss_prob * (dist / self.cfg.range);
                if rng.gen::<f64>() < p_loss {
                    continue;
                }
            }
            let arrival = tx.start.offset(tx.airtime + dist / self.cfg.prop_speed);
            match self.cfg.collision_model {
                CollisionModel::Ideal => {
                    queue
                        .schedule(
                            arrival,
                            EventKind::Rx {
                                node,
                                packet: tx.packet.clone(),
                            },
                        )
                        .expect("arrival is in the future");
                }
                CollisionModel::AirtimeOverlap => {
                    let interval = RxInterval {
                        start: arrival.offset(-tx.airtime),
                        end: arrival,
                        ticket: None,
                        voided: false,
                    };
                    self.deliver_with_contention(queue, node, interval, tx);
                }
            }
        }
    }

    fn deliver_with_contention(
        &mut self,
        queue: &mut EventQueue,
        node: NodeId,
        mut interval: RxInterval,
        tx: &Transmission,
    ) {
        let now = queue.clock();
        let slots = self.inflight.entry(node).or_default();
        // Records that ended before now can never overlap a new frame.
        slots.retain(|s| s.end > now);

        let mut clobbered = false;
        for s in slots.iter_mut() {
            let overlaps = s.start < interval.end && interval.start < s.end;
            if overlaps {
                clobbered = true;
                if !s.voided {
                    s.voided = true;
                    self.collisions += 1;
                    if let Some(t) = s.ticket.take() {
                        queue.cancel(t);
                    }
                }
            }
        }
        if clobbered {
            // The new frame is lost too, but its energy still occupies the
            // channel for future overlap checks.
            interval.voided = true;
            self.collisions += 1;
        } else {
            let ticket = queue
                .schedule(
                    interval.end,
                    EventKind::Rx {
                        node,
                        packet: tx.packet.clone(),
                    },
                )
                .expect("arrival is in the future");
            interval.ticket = Some(ticket);
        }
        slots.push(interval);
    }
}

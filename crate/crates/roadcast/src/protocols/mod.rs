//! Per-node broadcast protocol state machines behind one trait: flooding,
//! probabilistic forwarding (WPBM), defer-timer relay selection (ODAM), and
//! the dual-list variant with angle-based inhibition (ODAM-C).
//!
//! Handlers are pure functions of (node state, event) that return
//! [`ProtocolAction`]s; the simulation driver materializes those into
//! scheduled transmissions and timers. That split keeps every protocol
//! decision replayable from the event log.

mod flooding;
mod lists;
mod odam;
mod odamc;
mod wpbm;

pub use flooding::Flooding;
pub use lists::{ListKind, PacketListConfig, PacketListEntry, PacketLists};
pub use odam::Odam;
pub use odamc::{AngleDecision, OdamC};
pub use wpbm::Wpbm;

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::SimTime;
use crate::geometry::Position;
use crate::NodeId;

/// Globally unique packet identity: originating node plus a per-origin
/// sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId {
    pub origin: NodeId,
    pub seq: u32,
}

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.origin, self.seq)
    }
}

/// One copy of a packet as it travels. The hop fields describe the node
/// that transmitted *this* copy and its position at transmission time;
/// they are rewritten on every forward.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: PacketId,
    pub hop_sender: NodeId,
    pub hop_sender_pos: Position,
    pub created_at: SimTime,
}

impl Packet {
    pub fn origin(&self) -> NodeId {
        self.id.origin
    }
}

/// Defer-timer parameters. The timer maps a sender-receiver distance `d`
/// into a waiting time so that farther receivers wait less and forward
/// first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeferConfig {
    /// Upper bound of the defer time, seconds.
    pub max_defer_time: f64,
    /// Shape exponent; higher values spread short waits toward the range
    /// edge.
    pub epsilon: u32,
    /// Radio range `R`, meters (shared with the medium).
    pub range: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("distance {d} m outside [0, {range}] m")]
    OutOfRange { d: f64, range: f64 },
    #[error("packet {0} already originated at this node")]
    DuplicateOrigination(PacketId),
}

/// Waiting time before rebroadcast at distance `d` from the sender:
/// `max_defer_time * (R^e - d^e) / R^e`. Monotone decreasing in `d`, equal
/// to `max_defer_time` at `d = 0` and `0` at `d = R`.
pub fn defer_time(d: f64, cfg: &DeferConfig) -> Result<f64, ProtocolError> {
    if !(0.0..=cfg.range).contains(&d) {
        return Err(ProtocolError::OutOfRange { d, range: cfg.range });
    }
    let e = cfg.epsilon as i32;
    let r_pow = cfg.range.powi(e);
    Ok(cfg.max_defer_time * ((r_pow - d.powi(e)) / r_pow))
}

/// What a handler wants the driver to do.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolAction {
    /// Transmit this packet now (hop fields already rewritten to self).
    Forward(Packet),
    /// Arm the defer timer for this packet, firing after `delay` seconds.
    SetTimer(PacketId, f64),
    /// Disarm the pending timer for this packet, if any.
    CancelTimer(PacketId),
    /// Consume the packet without forwarding.
    Drop,
}

/// Which node anchors the inhibition angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngleVertex {
    /// Angle at the receiving node between the first-heard sender and the
    /// current forwarder. This is the reading consistent with the
    /// protocol's worked examples and is the default.
    #[default]
    Receiver,
    /// Angle at the first-heard sender between the receiver and the current
    /// forwarder. Kept for study.
    Sender,
}

/// Which side of the 90-degree test inhibits forwarding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchPolarity {
    /// Same-side duplicates (< 90°) are ignored and the pending timer keeps
    /// running; opposite-side duplicates demote the entry. This is the
    /// semantics that repairs the interference-node problem and is the
    /// default.
    #[default]
    Prose,
    /// Literal pseudocode reading: duplicates under 90° stop the pending
    /// forward outright.
    Pseudocode,
}

impl FromStr for AngleVertex {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "receiver" => Ok(AngleVertex::Receiver),
            "sender" => Ok(AngleVertex::Sender),
            other => Err(format!("unknown angle vertex `{other}` (receiver|sender)")),
        }
    }
}

impl fmt::Display for AngleVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AngleVertex::Receiver => "receiver",
            AngleVertex::Sender => "sender",
        })
    }
}

impl FromStr for BranchPolarity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prose" => Ok(BranchPolarity::Prose),
            "pseudocode" => Ok(BranchPolarity::Pseudocode),
            other => Err(format!(
                "unknown branch polarity `{other}` (prose|pseudocode)"
            )),
        }
    }
}

impl fmt::Display for BranchPolarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchPolarity::Prose => "prose",
            BranchPolarity::Pseudocode => "pseudocode",
        })
    }
}

/// Protocol selector, as it appears in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    Flooding,
    Wpbm,
    Odam,
    OdamC,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Flooding,
        ProtocolKind::Wpbm,
        ProtocolKind::Odam,
        ProtocolKind::OdamC,
    ];
}

impl FromStr for ProtocolKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flooding" => Ok(ProtocolKind::Flooding),
            "wpbm" => Ok(ProtocolKind::Wpbm),
            "odam" => Ok(ProtocolKind::Odam),
            "odam-c" => Ok(ProtocolKind::OdamC),
            other => Err(format!(
                "unknown protocol `{other}` (flooding|wpbm|odam|odam-c)"
            )),
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Flooding => "flooding",
            ProtocolKind::Wpbm => "wpbm",
            ProtocolKind::Odam => "odam",
            ProtocolKind::OdamC => "odam-c",
        })
    }
}

/// Everything needed to instantiate one node's protocol state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    /// WPBM forwarding probability.
    pub p_fwd: f64,
    pub angle_vertex: AngleVertex,
    pub branch_polarity: BranchPolarity,
}

impl Default for ProtocolConfig {
    fn default() -> ProtocolConfig {
        ProtocolConfig {
            kind: ProtocolKind::OdamC,
            p_fwd: 0.5,
            angle_vertex: AngleVertex::default(),
            branch_polarity: BranchPolarity::default(),
        }
    }
}

/// Per-event context handed to the handlers.
pub struct Ctx<'a> {
    pub now: SimTime,
    pub node: NodeId,
    pub self_pos: Position,
    /// Distance metric of the world (open plane or ring road).
    pub metric: crate::geometry::RoadMetric,
    /// Shared draw stream for probabilistic protocols.
    pub rng: &'a mut ChaCha8Rng,
}

/// The single interface all four protocols implement.
pub trait ProtocolState {
    /// This node creates and sends a new packet of its own.
    fn on_originate(&mut self, ctx: &mut Ctx, packet: &Packet)
        -> Result<Vec<ProtocolAction>, ProtocolError>;

    /// A frame was delivered to this node by the medium.
    fn on_receive(&mut self, ctx: &mut Ctx, packet: &Packet) -> Vec<ProtocolAction>;

    /// A previously armed defer timer fired.
    fn on_timer_expiry(&mut self, ctx: &mut Ctx, packet_id: PacketId) -> Vec<ProtocolAction>;

    /// Timer expiries whose entry disappeared before they fired. Stays at
    /// zero when every eviction cancels its timer.
    fn stale_timer_count(&self) -> u64 {
        0
    }

    /// Duplicates whose inhibition angle was degenerate and fell back to
    /// the same-side branch.
    fn degenerate_angle_count(&self) -> u64 {
        0
    }

    /// Drain the recorded angle decisions, if this protocol takes any.
    fn take_angle_log(&mut self) -> Vec<AngleDecision> {
        Vec::new()
    }
}

/// Instantiate one node's state for the selected protocol.
pub fn new_protocol(
    cfg: &ProtocolConfig,
    defer: DeferConfig,
    lists: PacketListConfig,
) -> Box<dyn ProtocolState> {
    match cfg.kind {
        ProtocolKind::Flooding => Box::new(Flooding::new()),
        ProtocolKind::Wpbm => Box::new(Wpbm::new(cfg.p_fwd)),
        ProtocolKind::Odam => Box::new(Odam::new(defer)),
        ProtocolKind::OdamC => Box::new(OdamC::new(
            defer,
            lists,
            cfg.angle_vertex,
            cfg.branch_polarity,
        )),
    }
}

/// Rebuild an outgoing copy of a packet with this node as the hop sender.
pub(crate) fn forwarded_copy(
    id: PacketId,
    created_at: SimTime,
    node: NodeId,
    pos: Position,
) -> Packet {
    Packet {
        id,
        hop_sender: node,
        hop_sender_pos: pos,
        created_at,
    }
}

/// Distance from the receiving node to the hop sender, clamped into the
/// defer domain. A receiver can drift a few centimeters past the range
/// boundary between transmission start and delivery; the clamp keeps that
/// inside the defer formula's domain.
pub(crate) fn hop_distance(ctx: &Ctx, packet: &Packet, range: f64) -> f64 {
    ctx.metric
        .distance(ctx.self_pos, packet.hop_sender_pos)
        .min(range)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eps: u32) -> DeferConfig {
        DeferConfig {
            max_defer_time: 1.0,
            epsilon: eps,
            range: 300.0,
        }
    }

    #[test]
    fn defer_boundaries_are_exact() {
        for eps in 1..=3 {
            assert_eq!(defer_time(0.0, &cfg(eps)).unwrap(), 1.0);
            assert_eq!(defer_time(300.0, &cfg(eps)).unwrap(), 0.0);
        }
    }

    #[test]
    fn defer_midpoint_quadratic() {
        // (300^2 - 150^2) / 300^2 = 0.75
        assert_eq!(defer_time(150.0, &cfg(2)).unwrap(), 0.75);
    }

    #[test]
    fn defer_rejects_out_of_domain() {
        assert!(matches!(
            defer_time(-0.1, &cfg(2)),
            Err(ProtocolError::OutOfRange { .. })
        ));
        assert!(matches!(
            defer_time(300.1, &cfg(2)),
            Err(ProtocolError::OutOfRange { .. })
        ));
    }

    #[test]
    fn defer_is_monotone_decreasing_on_a_grid() {
        for eps in 1..=3 {
            let c = cfg(eps);
            let mut prev = f64::INFINITY;
            for i in 0..=1000 {
                let d = 300.0 * f64::from(i) / 1000.0;
                let t = defer_time(d, &c).unwrap();
                assert!((0.0..=1.0).contains(&t));
                assert!(t < prev || (i == 0 && t == 1.0), "not decreasing at i={i}");
                prev = t;
            }
        }
    }

    #[test]
    fn protocol_kind_round_trips_through_strings() {
        for kind in ProtocolKind::ALL {
            assert_eq!(kind.to_string().parse::<ProtocolKind>().unwrap(), kind);
        }
        assert!("odamx".parse::<ProtocolKind>().is_err());
    }
}

//! The dual-list protocol: distance defer timers as in the base relay
//! scheme, plus two mechanisms that trade a little redundancy for delivery
//! rate. First, a duplicate heard from the *same* side as the original
//! sender is ignored instead of suppressing the pending forward; only an
//! opposite-side duplicate demotes the packet. Second, a demoted packet
//! moves from L1 to the bounded L0 list and gets one second-chance forward
//! before further duplicates silence it for good, so every packet is stored
//! (and may be forwarded) at most twice per node.

use crate::geometry::{angle_at, Position};
use crate::protocols::{
    defer_time, forwarded_copy, hop_distance, AngleVertex, BranchPolarity, Ctx, DeferConfig,
    ListKind, Packet, PacketId, PacketListConfig, PacketLists, ProtocolAction, ProtocolError,
    ProtocolState,
};

/// One evaluation of the inhibition angle, kept for audit: every promotion
/// must carry an angle of at least 90 degrees and every ignored duplicate
/// one below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleDecision {
    pub theta_deg: f64,
    pub promoted: bool,
}

pub struct OdamC {
    defer: DeferConfig,
    lists: PacketLists,
    angle_vertex: AngleVertex,
    polarity: BranchPolarity,
    originated: std::collections::HashSet<PacketId>,
    /// Duplicates whose angle was degenerate (a zero-length edge vector);
    /// treated as same-side.
    pub degenerate_angles: u64,
    pub angle_log: Vec<AngleDecision>,
    stale_timers: u64,
}

impl OdamC {
    pub fn new(
        defer: DeferConfig,
        lists: PacketListConfig,
        angle_vertex: AngleVertex,
        polarity: BranchPolarity,
    ) -> OdamC {
        OdamC {
            defer,
            lists: PacketLists::new(lists),
            angle_vertex,
            polarity,
            originated: std::collections::HashSet::new(),
            degenerate_angles: 0,
            angle_log: Vec::new(),
            stale_timers: 0,
        }
    }

    pub fn lists(&self) -> &PacketLists {
        &self.lists
    }

    /// Angle between the first-heard sender and the current forwarder. A
    /// degenerate vertex (either position coinciding with the anchor) is
    /// treated as a same-side 0 degrees. On a ring road the two remote
    /// positions are first unwrapped next to the receiver so plane geometry
    /// applies locally.
    fn inhibition_angle(&mut self, ctx: &Ctx, first: Position, hop: Position) -> f64 {
        let self_pos = ctx.self_pos;
        let first = ctx.metric.near(first, self_pos);
        let hop = ctx.metric.near(hop, self_pos);
        let computed = match self.angle_vertex {
            AngleVertex::Receiver => angle_at(self_pos, first, hop),
            AngleVertex::Sender => angle_at(first, self_pos, hop),
        };
        match computed {
            Ok(a) => a.degrees(),
            Err(_) => {
                self.degenerate_angles += 1;
                0.0
            }
        }
    }

    fn cancel_evicted(evicted: Option<crate::protocols::PacketListEntry>, out: &mut Vec<ProtocolAction>) {
        if let Some(e) = evicted {
            if e.timer_pending {
                out.push(ProtocolAction::CancelTimer(e.packet_id));
            }
        }
    }
}

impl ProtocolState for OdamC {
    fn on_originate(
        &mut self,
        ctx: &mut Ctx,
        packet: &Packet,
    ) -> Result<Vec<ProtocolAction>, ProtocolError> {
        if !self.originated.insert(packet.id) {
            return Err(ProtocolError::DuplicateOrigination(packet.id));
        }
        let mut actions = Vec::new();
        // The source holds its own packet in L1 without a timer and then
        // takes part in the same duplicate state machine as everyone else.
        let evicted = self.lists.insert_l1(
            packet.id,
            ctx.self_pos,
            packet.created_at,
            false,
            ctx.now,
        );
        Self::cancel_evicted(evicted, &mut actions);
        actions.push(ProtocolAction::Forward(packet.clone()));
        Ok(actions)
    }

    fn on_receive(&mut self, ctx: &mut Ctx, packet: &Packet) -> Vec<ProtocolAction> {
        let d = hop_distance(ctx, packet, self.defer.range);
        match self.lists.get(packet.id).map(|e| (e.list, e.timer_pending, e.first_sender_pos)) {
            None => {
                // First contact: store in L1 and race the defer timer.
                let delay = defer_time(d, &self.defer).expect("clamped distance is in domain");
                let mut actions = Vec::new();
                let evicted = self.lists.insert_l1(
                    packet.id,
                    packet.hop_sender_pos,
                    packet.created_at,
                    true,
                    ctx.now,
                );
                Self::cancel_evicted(evicted, &mut actions);
                actions.push(ProtocolAction::SetTimer(packet.id, delay));
                actions
            }
            Some((ListKind::L1, pending, first_pos)) => {
                self.lists.touch(packet.id, ctx.now);
                let theta = self.inhibition_angle(ctx, first_pos, packet.hop_sender_pos);
                let same_side = theta < 90.0;
                self.angle_log.push(AngleDecision {
                    theta_deg: theta,
                    promoted: !same_side,
                });
                if same_side {
                    match self.polarity {
                        // The forwarder covers ground the first sender
                        // already covered; keep our own timer running.
                        BranchPolarity::Prose => vec![ProtocolAction::Drop],
                        // Literal pseudocode reading: stop the pending
                        // forward outright.
                        BranchPolarity::Pseudocode => {
                            if pending {
                                self.lists.set_timer_pending(packet.id, false);
                                vec![
                                    ProtocolAction::CancelTimer(packet.id),
                                    ProtocolAction::Drop,
                                ]
                            } else {
                                vec![ProtocolAction::Drop]
                            }
                        }
                    }
                } else {
                    // Opposite side now covered: demote to L0 and arm one
                    // second-chance timer.
                    let mut actions = Vec::new();
                    if pending {
                        actions.push(ProtocolAction::CancelTimer(packet.id));
                    }
                    let evicted = self.lists.promote_to_l0(packet.id, ctx.now);
                    Self::cancel_evicted(evicted, &mut actions);
                    let delay = defer_time(d, &self.defer).expect("clamped distance is in domain");
                    self.lists.set_timer_pending(packet.id, true);
                    actions.push(ProtocolAction::SetTimer(packet.id, delay));
                    actions
                }
            }
            Some((ListKind::L0, pending, _)) => {
                // Already heard from both sides: any further copy means the
                // neighborhood is saturated.
                self.lists.touch(packet.id, ctx.now);
                if pending {
                    self.lists.set_timer_pending(packet.id, false);
                    vec![ProtocolAction::CancelTimer(packet.id), ProtocolAction::Drop]
                } else {
                    vec![ProtocolAction::Drop]
                }
            }
        }
    }

    fn on_timer_expiry(&mut self, ctx: &mut Ctx, packet_id: PacketId) -> Vec<ProtocolAction> {
        match self.lists.get(packet_id) {
            Some(e) if e.timer_pending => {
                let created_at = e.created_at;
                self.lists.set_timer_pending(packet_id, false);
                self.lists.touch(packet_id, ctx.now);
                vec![ProtocolAction::Forward(forwarded_copy(
                    packet_id,
                    created_at,
                    ctx.node,
                    ctx.self_pos,
                ))]
            }
            _ => {
                // The entry was evicted (or already fired) between
                // scheduling and expiry.
                self.stale_timers += 1;
                Vec::new()
            }
        }
    }

    fn stale_timer_count(&self) -> u64 {
        self.stale_timers
    }

    fn degenerate_angle_count(&self) -> u64 {
        self.degenerate_angles
    }

    fn take_angle_log(&mut self) -> Vec<AngleDecision> {
        std::mem::take(&mut self.angle_log)
    }
}

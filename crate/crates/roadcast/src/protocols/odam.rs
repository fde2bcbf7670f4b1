//! Distance-based relay selection: each first reception arms a defer timer
//! that shrinks with distance from the sender, so the farthest receiver
//! forwards first. Hearing any duplicate while the timer is pending cancels
//! the pending forward — the duplicate is taken as evidence the packet
//! already propagated.

use std::collections::HashMap;

use crate::engine::SimTime;
use crate::protocols::{
    defer_time, forwarded_copy, hop_distance, Ctx, DeferConfig, Packet, PacketId, ProtocolAction,
    ProtocolError, ProtocolState,
};

struct Entry {
    timer_pending: bool,
    created_at: SimTime,
}

pub struct Odam {
    defer: DeferConfig,
    entries: HashMap<PacketId, Entry>,
    originated: std::collections::HashSet<PacketId>,
    stale_timers: u64,
}

impl Odam {
    pub fn new(defer: DeferConfig) -> Odam {
        Odam {
            defer,
            entries: HashMap::new(),
            originated: std::collections::HashSet::new(),
            stale_timers: 0,
        }
    }
}

impl ProtocolState for Odam {
    fn on_originate(
        &mut self,
        _ctx: &mut Ctx,
        packet: &Packet,
    ) -> Result<Vec<ProtocolAction>, ProtocolError> {
        if !self.originated.insert(packet.id) {
            return Err(ProtocolError::DuplicateOrigination(packet.id));
        }
        // The source sends immediately and never arms a timer for its own
        // packet.
        self.entries.insert(
            packet.id,
            Entry {
                timer_pending: false,
                created_at: packet.created_at,
            },
        );
        Ok(vec![ProtocolAction::Forward(packet.clone())])
    }

    fn on_receive(&mut self, ctx: &mut Ctx, packet: &Packet) -> Vec<ProtocolAction> {
        match self.entries.get_mut(&packet.id) {
            None => {
                let d = hop_distance(ctx, packet, self.defer.range);
                let delay = defer_time(d, &self.defer).expect("clamped distance is in domain");
                self.entries.insert(
                    packet.id,
                    Entry {
                        timer_pending: true,
                        created_at: packet.created_at,
                    },
                );
                vec![ProtocolAction::SetTimer(packet.id, delay)]
            }
            Some(entry) if entry.timer_pending => {
                entry.timer_pending = false;
                vec![
                    ProtocolAction::CancelTimer(packet.id),
                    ProtocolAction::Drop,
                ]
            }
            Some(_) => vec![ProtocolAction::Drop],
        }
    }

    fn on_timer_expiry(&mut self, ctx: &mut Ctx, packet_id: PacketId) -> Vec<ProtocolAction> {
        match self.entries.get_mut(&packet_id) {
            Some(entry) if entry.timer_pending => {
                entry.timer_pending = false;
                vec![ProtocolAction::Forward(forwarded_copy(
                    packet_id,
                    entry.created_at,
                    ctx.node,
                    ctx.self_pos,
                ))]
            }
            _ => {
                self.stale_timers += 1;
                Vec::new()
            }
        }
    }

    fn stale_timer_count(&self) -> u64 {
        self.stale_timers
    }
}

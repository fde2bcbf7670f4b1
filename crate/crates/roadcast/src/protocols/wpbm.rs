//! Weighted probability based forwarding: flooding with a coin flip. Each
//! first reception is forwarded with probability `p_fwd`; at `p_fwd = 1`
//! the behavior degenerates to flooding exactly.

use std::collections::HashSet;

use rand::Rng;

use crate::protocols::{
    forwarded_copy, Ctx, Packet, PacketId, ProtocolAction, ProtocolError, ProtocolState,
};

pub struct Wpbm {
    p_fwd: f64,
    seen: HashSet<PacketId>,
    originated: HashSet<PacketId>,
}

impl Wpbm {
    pub fn new(p_fwd: f64) -> Wpbm {
        assert!((0.0..=1.0).contains(&p_fwd), "p_fwd must be in [0, 1]");
        Wpbm {
            p_fwd,
            seen: HashSet::new(),
            originated: HashSet::new(),
        }
    }
}

impl ProtocolState for Wpbm {
    fn on_originate(
        &mut self,
        _ctx: &mut Ctx,
        packet: &Packet,
    ) -> Result<Vec<ProtocolAction>, ProtocolError> {
        if !self.originated.insert(packet.id) {
            return Err(ProtocolError::DuplicateOrigination(packet.id));
        }
        self.seen.insert(packet.id);
        // The source always sends its own packet; the coin applies to relays.
        Ok(vec![ProtocolAction::Forward(packet.clone())])
    }

    fn on_receive(&mut self, ctx: &mut Ctx, packet: &Packet) -> Vec<ProtocolAction> {
        if !self.seen.insert(packet.id) {
            return vec![ProtocolAction::Drop];
        }
        // Draw in [0, 1); with p_fwd = 1 every draw forwards, so the event
        // stream is identical to flooding's.
        if ctx.rng.gen::<f64>() < self.p_fwd {
            vec![ProtocolAction::Forward(forwarded_copy(
                packet.id,
                packet.created_at,
                ctx.node,
                ctx.self_pos,
            ))]
        } else {
            vec![ProtocolAction::Drop]
        }
    }

    fn on_timer_expiry(&mut self, _ctx: &mut Ctx, _packet_id: PacketId) -> Vec<ProtocolAction> {
        Vec::new()
    }
}

//! Simple flooding: every node rebroadcasts each packet exactly once.

use std::collections::HashSet;

use crate::protocols::{
    forwarded_copy, Ctx, Packet, PacketId, ProtocolAction, ProtocolError, ProtocolState,
};

#[derive(Default)]
pub struct Flooding {
    seen: HashSet<PacketId>,
    originated: HashSet<PacketId>,
}

impl Flooding {
    pub fn new() -> Flooding {
        Flooding::default()
    }
}

impl ProtocolState for Flooding {
    fn on_originate(
        &mut self,
        _ctx: &mut Ctx,
        packet: &Packet,
    ) -> Result<Vec<ProtocolAction>, ProtocolError> {
        if !self.originated.insert(packet.id) {
            return Err(ProtocolError::DuplicateOrigination(packet.id));
        }
        self.seen.insert(packet.id);
        Ok(vec![ProtocolAction::Forward(packet.clone())])
    }

    fn on_receive(&mut self, ctx: &mut Ctx, packet: &Packet) -> Vec<ProtocolAction> {
        if self.seen.insert(packet.id) {
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
        // Flooding never arms timers.
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{RngHub, SimTime};
    use crate::geometry::Position;
    use crate::NodeId;

    fn packet(seq: u32) -> Packet {
        Packet {
            id: PacketId {
                origin: NodeId(7),
                seq,
            },
            hop_sender: NodeId(7),
            hop_sender_pos: Position::new(0.0, 0.0),
            created_at: SimTime::ZERO,
        }
    }

    #[test]
    fn first_reception_forwards_duplicate_drops() {
        let mut p = Flooding::new();
        let mut rng = RngHub::new(1).stream("wpbm");
        let mut ctx = Ctx {
            now: SimTime::ZERO,
            node: NodeId(1),
            self_pos: Position::new(10.0, 0.0),
            metric: crate::geometry::RoadMetric::open_plane(),
            rng: &mut rng,
        };
        let actions = p.on_receive(&mut ctx, &packet(1));
        assert!(matches!(&actions[..], [ProtocolAction::Forward(fw)]
            if fw.hop_sender == NodeId(1)));
        let actions = p.on_receive(&mut ctx, &packet(1));
        assert_eq!(actions, vec![ProtocolAction::Drop]);
    }

    #[test]
    fn duplicate_origination_is_rejected() {
        let mut p = Flooding::new();
        let mut rng = RngHub::new(1).stream("wpbm");
        let mut ctx = Ctx {
            now: SimTime::ZERO,
            node: NodeId(7),
            self_pos: Position::default(),
            metric: crate::geometry::RoadMetric::open_plane(),
            rng: &mut rng,
        };
        assert!(p.on_originate(&mut ctx, &packet(1)).is_ok());
        assert_eq!(
            p.on_originate(&mut ctx, &packet(1)).unwrap_err(),
            ProtocolError::DuplicateOrigination(packet(1).id)
        );
    }
}

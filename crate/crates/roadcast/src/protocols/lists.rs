//! The dual bounded packet lists.
//!
//! L1 holds packets awaiting their first forward; L0 holds packets heard
//! again from the opposite side, each granted one second-chance forward.
//! Both lists evict least-recently-used entries when full, and any
//! reception of a listed packet refreshes its recency.

use std::collections::HashMap;

use crate::engine::SimTime;
use crate::geometry::Position;
use crate::protocols::PacketId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListKind {
    L1,
    L0,
}

/// Capacities of the two lists. Both must be at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketListConfig {
    pub l1_capacity: usize,
    pub l0_capacity: usize,
}

impl Default for PacketListConfig {
    fn default() -> PacketListConfig {
        PacketListConfig {
            l1_capacity: 64,
            l0_capacity: 64,
        }
    }
}

/// Per-packet record held by a node. An entry lives in exactly one list.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketListEntry {
    pub packet_id: PacketId,
    /// Position of the sender of the first-heard copy (self position for
    /// originated packets); the fixed reference arm of the angle test.
    pub first_sender_pos: Position,
    pub created_at: SimTime,
    pub list: ListKind,
    /// Whether a defer timer is currently armed for this entry. The engine
    /// ticket lives with the driver.
    pub timer_pending: bool,
    pub last_touch: SimTime,
    recency: u64,
}

/// Both lists of one node, with LRU bookkeeping.
#[derive(Debug, Default)]
pub struct PacketLists {
    cfg: PacketListConfig,
    entries: HashMap<PacketId, PacketListEntry>,
    l1_len: usize,
    l0_len: usize,
    next_recency: u64,
}

impl PacketLists {
    pub fn new(cfg: PacketListConfig) -> PacketLists {
        assert!(cfg.l1_capacity >= 1 && cfg.l0_capacity >= 1);
        PacketLists {
            cfg,
            ..PacketLists::default()
        }
    }

    pub fn get(&self, id: PacketId) -> Option<&PacketListEntry> {
        self.entries.get(&id)
    }

    pub fn len(&self, list: ListKind) -> usize {
        match list {
            ListKind::L1 => self.l1_len,
            ListKind::L0 => self.l0_len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn bump(&mut self) -> u64 {
        let r = self.next_recency;
        self.next_recency += 1;
        r
    }

    /// Refresh an entry's recency, keeping active packets in the lists.
    pub fn touch(&mut self, id: PacketId, now: SimTime) {
        let r = self.bump();
        if let Some(e) = self.entries.get_mut(&id) {
            e.last_touch = now;
            e.recency = r;
        }
    }

    /// Remove and return the least recently used entry of `list`. Recency
    /// counters are unique, so the victim is well defined.
    fn evict_lru(&mut self, list: ListKind) -> Option<PacketListEntry> {
        let victim = self
            .entries
            .values()
            .filter(|e| e.list == list)
            .min_by_key(|e| e.recency)
            .map(|e| e.packet_id)?;
        self.remove(victim)
    }

    pub fn remove(&mut self, id: PacketId) -> Option<PacketListEntry> {
        let e = self.entries.remove(&id)?;
        match e.list {
            ListKind::L1 => self.l1_len -= 1,
            ListKind::L0 => self.l0_len -= 1,
        }
        Some(e)
    }

    /// Insert a fresh L1 entry, evicting the LRU entry if L1 is full. The
    /// evicted entry is returned so its pending timer can be cancelled.
    pub fn insert_l1(
        &mut self,
        packet_id: PacketId,
        first_sender_pos: Position,
        created_at: SimTime,
        timer_pending: bool,
        now: SimTime,
    ) -> Option<PacketListEntry> {
        debug_assert!(!self.entries.contains_key(&packet_id));
        let evicted = if self.l1_len >= self.cfg.l1_capacity {
            self.evict_lru(ListKind::L1)
        } else {
            None
        };
        let recency = self.bump();
        self.entries.insert(
            packet_id,
            PacketListEntry {
                packet_id,
                first_sender_pos,
                created_at,
                list: ListKind::L1,
                timer_pending,
                last_touch: now,
                recency,
            },
        );
        self.l1_len += 1;
        evicted
    }

    /// Move an L1 entry into L0 (the second-chance list), evicting L0's LRU
    /// entry if needed. The moved entry's timer state is set by the caller
    /// afterwards.
    pub fn promote_to_l0(&mut self, id: PacketId, now: SimTime) -> Option<PacketListEntry> {
        debug_assert!(matches!(
            self.entries.get(&id).map(|e| e.list),
            Some(ListKind::L1)
        ));
        let evicted = if self.l0_len >= self.cfg.l0_capacity {
            self.evict_lru(ListKind::L0)
        } else {
            None
        };
        let r = self.bump();
        if let Some(e) = self.entries.get_mut(&id) {
            e.list = ListKind::L0;
            e.last_touch = now;
            e.recency = r;
            self.l1_len -= 1;
            self.l0_len += 1;
        }
        evicted
    }

    pub fn set_timer_pending(&mut self, id: PacketId, pending: bool) {
        if let Some(e) = self.entries.get_mut(&id) {
            e.timer_pending = pending;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::NodeId;

    fn id(seq: u32) -> PacketId {
        PacketId {
            origin: NodeId(0),
            seq,
        }
    }

    fn t(s: f64) -> SimTime {
        SimTime::from_secs(s)
    }

    fn lists(l1: usize, l0: usize) -> PacketLists {
        PacketLists::new(PacketListConfig {
            l1_capacity: l1,
            l0_capacity: l0,
        })
    }

    fn insert(l: &mut PacketLists, seq: u32, at: f64) -> Option<PacketListEntry> {
        l.insert_l1(id(seq), Position::default(), t(at), true, t(at))
    }

    #[test]
    fn oldest_entry_is_evicted_first() {
        let mut l = lists(2, 2);
        assert!(insert(&mut l, 1, 0.0).is_none());
        assert!(insert(&mut l, 2, 1.0).is_none());
        let evicted = insert(&mut l, 3, 2.0).expect("capacity exceeded");
        assert_eq!(evicted.packet_id, id(1));
        assert_eq!(l.len(ListKind::L1), 2);
    }

    #[test]
    fn touch_refreshes_recency() {
        let mut l = lists(2, 2);
        insert(&mut l, 1, 0.0);
        insert(&mut l, 2, 1.0);
        l.touch(id(1), t(2.0));
        let evicted = insert(&mut l, 3, 3.0).expect("capacity exceeded");
        assert_eq!(evicted.packet_id, id(2));
    }

    #[test]
    fn evicted_entry_reports_pending_timer() {
        let mut l = lists(1, 1);
        insert(&mut l, 1, 0.0);
        let evicted = insert(&mut l, 2, 1.0).unwrap();
        assert!(evicted.timer_pending);
    }

    #[test]
    fn promotion_moves_between_lists() {
        let mut l = lists(2, 1);
        insert(&mut l, 1, 0.0);
        insert(&mut l, 2, 1.0);
        assert!(l.promote_to_l0(id(1), t(2.0)).is_none());
        assert_eq!(l.len(ListKind::L1), 1);
        assert_eq!(l.len(ListKind::L0), 1);
        assert_eq!(l.get(id(1)).unwrap().list, ListKind::L0);
        // Promoting a second entry exceeds L0's capacity of 1.
        let evicted = l.promote_to_l0(id(2), t(3.0)).unwrap();
        assert_eq!(evicted.packet_id, id(1));
        assert_eq!(l.len(ListKind::L0), 1);
    }

    #[test]
    fn same_timestamp_evictions_fall_back_to_insertion_order() {
        let mut l = lists(2, 2);
        insert(&mut l, 1, 5.0);
        insert(&mut l, 2, 5.0);
        let evicted = insert(&mut l, 3, 5.0).unwrap();
        assert_eq!(evicted.packet_id, id(1));
    }
}

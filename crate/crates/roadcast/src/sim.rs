//! The simulation driver: owns the event queue, the vehicles, the medium,
//! one protocol state per node, and the global packet ledger, and turns
//! protocol actions into scheduled events.
//!
//! Everything a run produces is a pure function of (setup, seed): handlers
//! never read wall-clock time or unordered containers, so two runs with the
//! same inputs emit bit-identical event logs and metrics.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{EventKind, EventQueue, RngHub, SimTime, Ticket};
use crate::geometry::{Position, RoadMetric};
use crate::medium::{Medium, RadioConfig, Transmission};
use crate::metrics::{aggregate, MetricsTable, PacketRecord};
use crate::mobility::{init_vehicles, mobility_step, FlowParams, MobilityError, RoadConfig, Vehicle};
use crate::protocols::{
    new_protocol, AngleDecision, Ctx, DeferConfig, Packet, PacketId, PacketListConfig,
    ProtocolAction, ProtocolConfig, ProtocolState,
};
use crate::NodeId;

/// Which vehicle broadcasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceSelect {
    /// The vehicle nearest the road midpoint at the first send.
    Auto,
    Node(NodeId),
}

/// Periodic send schedule: one packet at `first`, then every `interval`
/// seconds up to and including `last`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SendSchedule {
    pub first: f64,
    pub interval: f64,
    pub last: f64,
}

impl SendSchedule {
    pub fn times(&self) -> Vec<SimTime> {
        let count = ((self.last - self.first) / self.interval).floor() as u32 + 1;
        (0..count)
            .map(|k| SimTime::from_secs(self.first + f64::from(k) * self.interval))
            .collect()
    }
}

/// The node population: either the moving highway or a fixed set of
/// positions (used by the oracle replays and topology tests).
#[derive(Debug, Clone)]
pub enum WorldSetup {
    Mobile {
        road: RoadConfig,
        vehicle_count: u32,
        gap: f64,
        flow1: FlowParams,
        flow2: FlowParams,
        dt: f64,
    },
    Static { positions: Vec<Position> },
}

#[derive(Debug, Clone)]
pub struct SimSetup {
    pub seed: u64,
    pub radio: RadioConfig,
    pub defer: DeferConfig,
    pub lists: PacketListConfig,
    pub protocol: ProtocolConfig,
    pub source: SourceSelect,
    pub schedule: SendSchedule,
    pub sim_end: SimTime,
    pub world: WorldSetup,
}

impl SimSetup {
    pub fn from_scenario(cfg: &crate::scenario::ScenarioConfig) -> SimSetup {
        SimSetup {
            seed: cfg.seed,
            radio: cfg.radio,
            defer: cfg.defer_config(),
            lists: cfg.lists,
            protocol: cfg.protocol.clone(),
            source: cfg
                .source_node
                .map(|n| SourceSelect::Node(NodeId(n)))
                .unwrap_or(SourceSelect::Auto),
            schedule: SendSchedule {
                first: cfg.first_send,
                interval: cfg.send_interval,
                last: cfg.last_send,
            },
            sim_end: SimTime::from_secs(cfg.sim_end),
            world: WorldSetup::Mobile {
                road: RoadConfig {
                    lane_count: cfg.lane_count,
                    road_length: cfg.road_length,
                    lane_width: cfg.lane_width,
                    min_gap: cfg.min_gap,
                },
                vehicle_count: cfg.vehicle_count,
                gap: cfg.vehicular_gap,
                flow1: cfg.flow1.params(),
                flow2: cfg.flow2.params(),
                dt: cfg.mobility_dt,
            },
        }
    }

    /// A fixed-position world with a single origination at `t = 0`.
    pub fn static_world(
        positions: Vec<Position>,
        origin: NodeId,
        radio: RadioConfig,
        defer: DeferConfig,
        lists: PacketListConfig,
        protocol: ProtocolConfig,
        sim_end: f64,
    ) -> SimSetup {
        SimSetup {
            seed: 1,
            radio,
            defer,
            lists,
            protocol,
            source: SourceSelect::Node(origin),
            schedule: SendSchedule {
                first: 0.0,
                interval: 1.0,
                last: 0.0,
            },
            sim_end: SimTime::from_secs(sim_end),
            world: WorldSetup::Static { positions },
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error("trace output failed: {0}")]
    Io(#[from] io::Error),
}

/// Optional trace outputs, written while the run progresses.
#[derive(Default)]
pub struct TraceSinks<'a> {
    /// One line per processed event.
    pub events: Option<&'a mut dyn Write>,
    /// CSV position dump per mobility tick.
    pub positions: Option<&'a mut dyn Write>,
}

pub const POSITIONS_HEADER: &str = "time,node_id,x,y,speed,lane";

/// Everything a finished run reports.
pub struct SimOutput {
    /// Per-packet ledger, in send order.
    pub records: Vec<PacketRecord>,
    pub source: NodeId,
    pub events_processed: u64,
    /// Receptions destroyed by airtime overlap.
    pub collisions: u64,
    /// Timer expiries that found their entry evicted. Zero in a healthy
    /// run: evictions cancel their timers.
    pub stale_timers: u64,
    /// Duplicates whose inhibition angle was degenerate.
    pub degenerate_angles: u64,
    /// Every angle decision taken by the dual-list protocol, in event
    /// order per node.
    pub angle_log: Vec<AngleDecision>,
}

impl SimOutput {
    pub fn metrics(&self) -> MetricsTable {
        aggregate(&self.records)
    }

    /// Nodes that received the packet with this sequence number.
    pub fn receivers(&self, seq: u32) -> Vec<NodeId> {
        self.records
            .iter()
            .find(|r| r.id.seq == seq)
            .map(|r| r.receptions.keys().copied().collect())
            .unwrap_or_default()
    }
}

struct MobilityParams {
    road: RoadConfig,
    dt: f64,
}

pub struct Simulation {
    queue: EventQueue,
    vehicles: Vec<Vehicle>,
    nodes: Vec<Box<dyn ProtocolState>>,
    medium: Medium,
    metric: RoadMetric,
    mobility: Option<MobilityParams>,
    timers: HashMap<(NodeId, PacketId), Ticket>,
    ledger: BTreeMap<PacketId, PacketRecord>,
    wpbm_rng: ChaCha8Rng,
    medium_rng: ChaCha8Rng,
    source_select: SourceSelect,
    source: Option<NodeId>,
    schedule: SendSchedule,
    sim_end: SimTime,
    io_error: Option<io::Error>,
}

impl Simulation {
    pub fn new(setup: SimSetup) -> Result<Simulation, SimError> {
        let hub = RngHub::new(setup.seed);
        let (vehicles, mobility) = match &setup.world {
            WorldSetup::Mobile {
                road,
                vehicle_count,
                gap,
                flow1,
                flow2,
                dt,
            } => {
                let vehicles = init_vehicles(*vehicle_count, *gap, road, *flow1, *flow2)?;
                (
                    vehicles,
                    Some(MobilityParams {
                        road: *road,
                        dt: *dt,
                    }),
                )
            }
            WorldSetup::Static { positions } => {
                let vehicles = positions
                    .iter()
                    .enumerate()
                    .map(|(i, p)| Vehicle {
                        id: NodeId(i as u32),
                        lane: 0,
                        pos: *p,
                        speed: 0.0,
                        flow: crate::mobility::Flow::Flow1,
                        target_speed: 0.0,
                        accel: 0.0,
                        decel: 0.0,
                    })
                    .collect();
                (vehicles, None)
            }
        };
        let metric = match &setup.world {
            WorldSetup::Mobile { road, .. } => RoadMetric::ring(road.road_length),
            WorldSetup::Static { .. } => RoadMetric::open_plane(),
        };
        let nodes = (0..vehicles.len())
            .map(|_| new_protocol(&setup.protocol, setup.defer, setup.lists))
            .collect();
        Ok(Simulation {
            queue: EventQueue::new(),
            vehicles,
            nodes,
            medium: Medium::new(setup.radio, metric),
            metric,
            mobility,
            timers: HashMap::new(),
            ledger: BTreeMap::new(),
            wpbm_rng: hub.stream("wpbm"),
            medium_rng: hub.stream("medium"),
            source_select: setup.source,
            source: None,
            schedule: setup.schedule,
            sim_end: setup.sim_end,
            io_error: None,
        })
    }

    fn resolve_source(&mut self) -> NodeId {
        if let Some(s) = self.source {
            return s;
        }
        let s = match self.source_select {
            SourceSelect::Node(n) => n,
            SourceSelect::Auto => {
                let midpoint = self
                    .mobility
                    .as_ref()
                    .map(|m| m.road.road_length / 2.0)
                    .unwrap_or(0.0);
                self.vehicles
                    .iter()
                    .min_by(|a, b| {
                        (a.pos.x - midpoint)
                            .abs()
                            .total_cmp(&(b.pos.x - midpoint).abs())
                            .then(a.id.0.cmp(&b.id.0))
                    })
                    .map(|v| v.id)
                    .expect("at least one vehicle")
            }
        };
        self.source = Some(s);
        s
    }

    fn trace_event(&mut self, sinks: &mut TraceSinks, line: String) {
        if self.io_error.is_some() {
            return;
        }
        if let Some(w) = sinks.events.as_deref_mut() {
            if let Err(e) = writeln!(w, "{line}") {
                self.io_error = Some(e);
            }
        }
    }

    fn trace_positions(&mut self, sinks: &mut TraceSinks, now: SimTime) {
        if self.io_error.is_some() {
            return;
        }
        if let Some(w) = sinks.positions.as_deref_mut() {
            for v in &self.vehicles {
                if let Err(e) = writeln!(
                    w,
                    "{},{},{:?},{:?},{:?},{}",
                    now, v.id, v.pos.x, v.pos.y, v.speed, v.lane
                ) {
                    self.io_error = Some(e);
                    return;
                }
            }
        }
    }

    fn apply_actions(
        &mut self,
        queue: &mut EventQueue,
        node: NodeId,
        now: SimTime,
        actions: Vec<ProtocolAction>,
    ) {
        for action in actions {
            match action {
                ProtocolAction::Forward(packet) => {
                    queue
                        .schedule(now, EventKind::TxStart { node, packet })
                        .expect("forward at current time");
                }
                ProtocolAction::SetTimer(packet_id, delay) => {
                    debug_assert!(
                        !self.timers.contains_key(&(node, packet_id)),
                        "protocol armed a second timer for the same packet"
                    );
                    let ticket = queue
                        .schedule(
                            now.offset(delay),
                            EventKind::TimerExpiry { node, packet_id },
                        )
                        .expect("timer delay is non-negative");
                    self.timers.insert((node, packet_id), ticket);
                }
                ProtocolAction::CancelTimer(packet_id) => {
                    if let Some(ticket) = self.timers.remove(&(node, packet_id)) {
                        queue.cancel(ticket);
                    }
                }
                ProtocolAction::Drop => {}
            }
        }
    }

    fn handle(&mut self, queue: &mut EventQueue, ev: crate::engine::Event, sinks: &mut TraceSinks) {
        if sinks.events.is_some() {
            let line = ev.trace_line();
            self.trace_event(sinks, line);
        }
        let now = ev.time;
        match ev.kind {
            EventKind::MobilityTick => {
                let (road, dt) = {
                    let m = self.mobility.as_ref().expect("tick only in mobile worlds");
                    (m.road, m.dt)
                };
                mobility_step(&mut self.vehicles, &road, dt);
                self.trace_positions(sinks, now);
                let next = now.offset(dt);
                if next <= self.sim_end {
                    queue
                        .schedule(next, EventKind::MobilityTick)
                        .expect("next tick is in the future");
                }
            }
            EventKind::TrafficSource { seq } => {
                let source = self.resolve_source();
                let pos = self.vehicles[source.0 as usize].pos;
                let id = PacketId {
                    origin: source,
                    seq,
                };
                let packet = Packet {
                    id,
                    hop_sender: source,
                    hop_sender_pos: pos,
                    created_at: now,
                };
                self.ledger
                    .insert(id, PacketRecord::new(id, now, self.vehicles.len() as u32));
                let mut ctx = Ctx {
                    now,
                    node: source,
                    self_pos: pos,
                    metric: self.metric,
                    rng: &mut self.wpbm_rng,
                };
                let actions = self.nodes[source.0 as usize]
                    .on_originate(&mut ctx, &packet)
                    .expect("source sequence numbers are unique");
                self.apply_actions(queue, source, now, actions);
            }
            EventKind::TxStart { node, packet } => {
                let rec = self
                    .ledger
                    .get_mut(&packet.id)
                    .expect("transmitted packets are in the ledger");
                *rec.tx_by_node.entry(node).or_insert(0) += 1;
                if node == rec.origin && !rec.origin_sent {
                    rec.origin_sent = true;
                } else {
                    rec.forwarders.insert(node);
                }
                let tx = Transmission {
                    tx_pos: self.vehicles[node.0 as usize].pos,
                    tx_node: node,
                    start: now,
                    airtime: self.medium.cfg.airtime(),
                    packet,
                };
                self.medium
                    .broadcast(queue, &tx, &self.vehicles, &mut self.medium_rng);
            }
            EventKind::Rx { node, packet } => {
                let rec = self
                    .ledger
                    .get_mut(&packet.id)
                    .expect("received packets are in the ledger");
                if node != rec.origin {
                    rec.receptions.entry(node).or_insert(now);
                }
                let mut ctx = Ctx {
                    now,
                    node,
                    self_pos: self.vehicles[node.0 as usize].pos,
                    metric: self.metric,
                    rng: &mut self.wpbm_rng,
                };
                let actions = self.nodes[node.0 as usize].on_receive(&mut ctx, &packet);
                self.apply_actions(queue, node, now, actions);
            }
            EventKind::TimerExpiry { node, packet_id } => {
                self.timers.remove(&(node, packet_id));
                let mut ctx = Ctx {
                    now,
                    node,
                    self_pos: self.vehicles[node.0 as usize].pos,
                    metric: self.metric,
                    rng: &mut self.wpbm_rng,
                };
                let actions = self.nodes[node.0 as usize].on_timer_expiry(&mut ctx, packet_id);
                self.apply_actions(queue, node, now, actions);
            }
            EventKind::TxEnd { .. } => {}
        }
    }

    /// Run to `sim_end` and collect the ledger.
    pub fn run(mut self, mut sinks: TraceSinks) -> Result<SimOutput, SimError> {
        if let Some(w) = sinks.positions.as_deref_mut() {
            writeln!(w, "{POSITIONS_HEADER}")?;
        }
        self.trace_positions(&mut sinks, SimTime::ZERO);

        for (k, t) in self.schedule.times().into_iter().enumerate() {
            if t <= self.sim_end {
                self.queue
                    .schedule(t, EventKind::TrafficSource { seq: k as u32 + 1 })
                    .expect("schedule starts at or after time zero");
            }
        }
        if let Some(m) = &self.mobility {
            let first = SimTime::from_secs(m.dt);
            if first <= self.sim_end {
                self.queue
                    .schedule(first, EventKind::MobilityTick)
                    .expect("first tick is in the future");
            }
        }

        let mut queue = std::mem::take(&mut self.queue);
        let sim_end = self.sim_end;
        let events_processed =
            queue.run_until(sim_end, |q, ev| self.handle(q, ev, &mut sinks));
        if let Some(e) = self.io_error.take() {
            return Err(SimError::Io(e));
        }

        let source = self.source.unwrap_or(NodeId(0));
        let stale_timers = self.nodes.iter().map(|n| n.stale_timer_count()).sum();
        let degenerate_angles = self.nodes.iter().map(|n| n.degenerate_angle_count()).sum();
        let angle_log = self
            .nodes
            .iter_mut()
            .flat_map(|n| n.take_angle_log())
            .collect();
        Ok(SimOutput {
            records: self.ledger.into_values().collect(),
            source,
            events_processed,
            collisions: self.medium.collisions,
            stale_timers,
            degenerate_angles,
            angle_log,
        })
    }
}

/// Convenience: build and run a scenario with no traces.
pub fn run_scenario(cfg: &crate::scenario::ScenarioConfig) -> Result<SimOutput, SimError> {
    Simulation::new(SimSetup::from_scenario(cfg))?.run(TraceSinks::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::CollisionModel;
    use crate::protocols::ProtocolKind;
    use crate::scenario::{preset, Preset};

    fn line_world(xs: &[f64]) -> Vec<Position> {
        xs.iter().map(|x| Position::new(*x, 0.0)).collect()
    }

    fn static_setup(xs: &[f64], kind: ProtocolKind) -> SimSetup {
        SimSetup::static_world(
            line_world(xs),
            NodeId(0),
            RadioConfig::default(),
            DeferConfig {
                max_defer_time: 0.05,
                epsilon: 2,
                range: 300.0,
            },
            PacketListConfig::default(),
            ProtocolConfig {
                kind,
                ..ProtocolConfig::default()
            },
            2.0,
        )
    }

    #[test]
    fn flooding_reaches_a_connected_line_once_each() {
        // Five nodes spaced 200 m apart, range 300: a chain.
        let setup = static_setup(&[0.0, 200.0, 400.0, 600.0, 800.0], ProtocolKind::Flooding);
        let out = Simulation::new(setup).unwrap().run(TraceSinks::default()).unwrap();
        let rec = &out.records[0];
        assert_eq!(rec.receptions.len(), 4, "all four non-origin nodes reached");
        // Everyone forwards exactly once.
        for n in rec.tx_by_node.values() {
            assert_eq!(*n, 1);
        }
        assert_eq!(rec.forwarders.len(), 4);
    }

    #[test]
    fn wpbm_p_zero_stops_after_one_hop() {
        let mut setup = static_setup(&[0.0, 200.0, 400.0, 600.0], ProtocolKind::Wpbm);
        setup.protocol.p_fwd = 0.0;
        let out = Simulation::new(setup).unwrap().run(TraceSinks::default()).unwrap();
        let rec = &out.records[0];
        // Only the origin transmits; only its direct neighbor receives.
        assert_eq!(rec.tx_count(), 1);
        assert_eq!(rec.receptions.len(), 1);
    }

    #[test]
    fn schedule_emits_expected_sends() {
        let s = SendSchedule {
            first: 600.0,
            interval: 50.0,
            last: 2000.0,
        };
        assert_eq!(s.times().len(), 29);
        assert_eq!(s.times()[0], SimTime::from_secs(600.0));
        assert_eq!(s.times()[28], SimTime::from_secs(2000.0));
    }

    #[test]
    fn auto_source_picks_midpoint_vehicle() {
        let mut cfg = preset(Preset::Scenario1);
        cfg.vehicle_count = 10;
        cfg.vehicular_gap = 100.0;
        cfg.lane_count = 1;
        cfg.road_length = 1000.0;
        cfg.first_send = 0.0;
        cfg.last_send = 0.0;
        cfg.sim_end = 0.5;
        // Vehicles start at 0, 100, ..., 900; midpoint 500.
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.source, NodeId(5));
    }

    #[test]
    fn explicit_source_is_respected() {
        let mut cfg = preset(Preset::Scenario1);
        cfg.vehicle_count = 10;
        cfg.source_node = Some(3);
        cfg.first_send = 0.0;
        cfg.last_send = 0.0;
        cfg.sim_end = 0.5;
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.source, NodeId(3));
    }

    #[test]
    fn odamc_run_has_no_stale_timers_under_tiny_lists() {
        let mut setup = static_setup(
            &[0.0, 150.0, 280.0, 430.0, 560.0],
            ProtocolKind::OdamC,
        );
        setup.lists = PacketListConfig {
            l1_capacity: 2,
            l0_capacity: 2,
        };
        setup.schedule = SendSchedule {
            first: 0.0,
            interval: 0.001,
            last: 0.04,
        };
        let out = Simulation::new(setup).unwrap().run(TraceSinks::default()).unwrap();
        assert_eq!(out.stale_timers, 0, "evictions must cancel their timers");
        assert!(out.records.len() > 20);
    }

    #[test]
    fn collision_counters_appear_under_airtime_overlap() {
        let mut setup = static_setup(
            &[0.0, 100.0, -100.0, 50.0, -50.0, 150.0],
            ProtocolKind::Flooding,
        );
        setup.radio.collision_model = CollisionModel::AirtimeOverlap;
        // Flooding relays all fire at the same instant; their frames overlap
        // at the common neighbors.
        let out = Simulation::new(setup).unwrap().run(TraceSinks::default()).unwrap();
        assert!(out.collisions > 0);
    }
}

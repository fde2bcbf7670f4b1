//! Vehicle placement and movement on a straight multi-lane one-way highway.
//!
//! The model is a minimal gap-based car follower with opportunistic lane
//! changes: a vehicle accelerates toward its flow's target speed, and when
//! it closes on a slower leader it first tries to move to an adjacent lane
//! and otherwise brakes toward a safe speed that settles at the leader's
//! speed once the gap reaches the desired headway (`min_gap` plus one
//! second of travel). Vehicles that reach the end of the road wrap back to
//! `x = 0`, so the node count and density stay constant over the whole
//! measurement window.

use thiserror::Error;

use crate::geometry::Position;
use crate::NodeId;

/// Which of the two speed populations a vehicle belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Flow1,
    Flow2,
}

/// Speed and acceleration limits of one flow. Speeds here are m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub target_speed: f64,
    pub accel: f64,
    pub decel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vehicle {
    pub id: NodeId,
    pub lane: u32,
    pub pos: Position,
    pub speed: f64,
    pub flow: Flow,
    pub target_speed: f64,
    pub accel: f64,
    pub decel: f64,
}

/// Road geometry and the follower threshold floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadConfig {
    pub lane_count: u32,
    pub road_length: f64,
    pub lane_width: f64,
    pub min_gap: f64,
}

impl RoadConfig {
    fn lane_y(&self, lane: u32) -> f64 {
        (f64::from(lane) + 0.5) * self.lane_width
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MobilityError {
    #[error(
        "cannot fit {vehicles} vehicles on {lanes} lanes of {road_length} m at a {gap} m gap"
    )]
    CapacityExceeded {
        vehicles: u32,
        lanes: u32,
        road_length: f64,
        gap: f64,
    },
}

/// Place `vehicle_count` vehicles on the road: lanes are filled round-robin,
/// consecutive same-lane vehicles sit `gap` meters apart, and flow
/// membership alternates by index (even -> Flow1, odd -> Flow2). Initial
/// speed is the flow's target speed.
///
/// Lanes are staggered by `gap / lane_count` so the formation is an echelon
/// rather than a lattice of side-by-side rows: combined longitudinal
/// density is uniform and no two vehicles start (and then stay forever) at
/// the same x.
pub fn init_vehicles(
    vehicle_count: u32,
    gap: f64,
    road: &RoadConfig,
    flow1: FlowParams,
    flow2: FlowParams,
) -> Result<Vec<Vehicle>, MobilityError> {
    let per_lane = vehicle_count.div_ceil(road.lane_count);
    let span = f64::from(per_lane.saturating_sub(1)) * gap;
    if span > road.road_length {
        return Err(MobilityError::CapacityExceeded {
            vehicles: vehicle_count,
            lanes: road.lane_count,
            road_length: road.road_length,
            gap,
        });
    }
    let stagger = gap / f64::from(road.lane_count);
    let mut vehicles = Vec::with_capacity(vehicle_count as usize);
    for i in 0..vehicle_count {
        let lane = i % road.lane_count;
        let slot = i / road.lane_count;
        let (flow, params) = if i % 2 == 0 {
            (Flow::Flow1, flow1)
        } else {
            (Flow::Flow2, flow2)
        };
        vehicles.push(Vehicle {
            id: NodeId(i),
            lane,
            pos: Position::new(
                f64::from(slot) * gap + f64::from(lane) * stagger,
                road.lane_y(lane),
            ),
            speed: params.target_speed,
            flow,
            target_speed: params.target_speed,
            accel: params.accel,
            decel: params.decel,
        });
    }
    Ok(vehicles)
}

/// Exact advance of piecewise-linear kinematics: ramp toward `target` at
/// `accel`, then cruise. Returns (distance covered, speed at the end of the
/// step). Splitting the step in two reproduces the same trajectory.
fn free_advance(speed: f64, target: f64, accel: f64, dt: f64) -> (f64, f64) {
    if speed >= target || accel <= 0.0 {
        return (speed * dt, speed);
    }
    let ramp = (target - speed) / accel;
    if ramp >= dt {
        let v1 = speed + accel * dt;
        ((speed + v1) / 2.0 * dt, v1)
    } else {
        ((speed + target) / 2.0 * ramp + target * (dt - ramp), target)
    }
}

#[derive(Clone, Copy)]
struct Snapshot {
    lane: u32,
    x: f64,
    speed: f64,
}

/// Forward gap from `from` to `to` along the ring.
fn ring_gap(from: f64, to: f64, road_length: f64) -> f64 {
    (to - from).rem_euclid(road_length)
}

/// Nearest vehicle ahead of `i` in `lane` (by ring distance), if any.
fn leader_in_lane(snap: &[Snapshot], i: usize, lane: u32, road_length: f64) -> Option<usize> {
    let x = snap[i].x;
    let mut best: Option<(f64, usize)> = None;
    for (j, s) in snap.iter().enumerate() {
        if j == i || s.lane != lane {
            continue;
        }
        let mut gap = ring_gap(x, s.x, road_length);
        if gap == 0.0 {
            // Co-located vehicle ordered behind us by id; treat the
            // higher id as following.
            if j > i {
                gap = road_length;
            }
        }
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, j));
        }
    }
    best.map(|(_, j)| j)
}

/// Nearest vehicle behind `i`'s position in `lane`.
fn follower_in_lane(snap: &[Snapshot], i: usize, lane: u32, road_length: f64) -> Option<usize> {
    let x = snap[i].x;
    let mut best: Option<(f64, usize)> = None;
    for (j, s) in snap.iter().enumerate() {
        if j == i || s.lane != lane {
            continue;
        }
        let gap = ring_gap(s.x, x, road_length);
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, j));
        }
    }
    best.map(|(_, j)| j)
}

/// Seconds of travel a follower keeps between itself and its leader.
const HEADWAY_S: f64 = 1.0;

/// Advance every vehicle by `dt` seconds. Decisions are taken against a
/// snapshot of the previous state, so the update is order-independent and
/// deterministic.
pub fn mobility_step(vehicles: &mut [Vehicle], road: &RoadConfig, dt: f64) {
    assert!(dt > 0.0, "mobility step requires dt > 0");
    let snap: Vec<Snapshot> = vehicles
        .iter()
        .map(|v| Snapshot {
            lane: v.lane,
            x: v.pos.x,
            speed: v.speed,
        })
        .collect();
    let len = road.road_length;

    for i in 0..vehicles.len() {
        let me = snap[i];
        let v = &mut vehicles[i];
        let desired_gap = road.min_gap + me.speed * HEADWAY_S;
        let leader = leader_in_lane(&snap, i, me.lane, len);
        let gap_ahead = leader.map(|j| ring_gap(me.x, snap[j].x, len));
        let too_close = gap_ahead.is_some_and(|g| g < desired_gap);
        // Overtaking desire: a leader inside twice the desired gap that is
        // slower than our flow target.
        let wants_past = leader.is_some_and(|j| {
            gap_ahead.unwrap() < 2.0 * desired_gap && snap[j].speed + 0.5 < v.target_speed
        });

        if too_close || wants_past {
            // Overtake if an adjacent lane has room ahead and behind.
            let mut changed = false;
            for cand in [me.lane.checked_add(1), me.lane.checked_sub(1)]
                .into_iter()
                .flatten()
            {
                if cand >= road.lane_count {
                    continue;
                }
                let ahead_ok = leader_in_lane(&snap, i, cand, len)
                    .map(|j| ring_gap(me.x, snap[j].x, len) >= desired_gap)
                    .unwrap_or(true);
                let behind_ok = follower_in_lane(&snap, i, cand, len)
                    .map(|j| {
                        ring_gap(snap[j].x, me.x, len)
                            >= road.min_gap + snap[j].speed * HEADWAY_S
                    })
                    .unwrap_or(true);
                if ahead_ok && behind_ok {
                    v.lane = cand;
                    v.pos.y = road.lane_y(cand);
                    changed = true;
                    break;
                }
            }
            if !changed && too_close {
                // Brake at our own decel rate toward the safe speed: the
                // leader's speed minus the headway deficit, which settles
                // the gap at desired_gap and matches speeds there.
                let j = leader.expect("too_close implies a leader");
                let lead = snap[j];
                let gap_now = ring_gap(me.x, lead.x, len);
                let v_safe = (lead.speed + (gap_now - desired_gap) / HEADWAY_S).max(0.0);
                let v1 = if v_safe < me.speed {
                    (me.speed - v.decel * dt).max(v_safe)
                } else {
                    // Too close but the leader is pulling away: creep up
                    // without exceeding the safe speed or the flow target.
                    (me.speed + v.accel * dt).min(v_safe).min(v.target_speed)
                }
                .max(0.0);
                let mut advance = (me.speed + v1) / 2.0 * dt;
                // Never pass the leader.
                let max_advance = gap_now + lead.speed * dt - road.min_gap;
                if advance > max_advance {
                    advance = max_advance.max(0.0);
                    v.speed = v1.min(lead.speed);
                } else {
                    v.speed = v1;
                }
                v.pos.x = (me.x + advance).rem_euclid(len);
                continue;
            }
        }

        let (dx, v1) = free_advance(me.speed, v.target_speed, v.accel, dt);
        v.speed = v1;
        v.pos.x = (me.x + dx).rem_euclid(len);
    }
}

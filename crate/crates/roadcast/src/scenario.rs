//! Scenario configuration: the three built-in highway presets, a flat
//! `key = value` config format with `#` comments and dotted namespaces, and
//! validation.
//!
//! A config file may start with `preset = scenario2` and then override
//! individual keys. Without a preset line, values start from the sparse
//! preset (`scenario1`). Unknown keys are rejected with their line number.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::medium::{CollisionModel, RadioConfig};
use crate::mobility::FlowParams;
use crate::protocols::{DeferConfig, PacketListConfig, ProtocolConfig, ProtocolKind};

/// One traffic flow as configured: speed in km/h, acceleration limits in
/// m/s².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub speed_kmh: f64,
    pub accel: f64,
    pub decel: f64,
}

impl FlowConfig {
    pub fn params(&self) -> FlowParams {
        FlowParams {
            target_speed: self.speed_kmh / 3.6,
            accel: self.accel,
            decel: self.decel,
        }
    }
}

/// Everything one run needs. Immutable after parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub vehicle_count: u32,
    /// Initial spacing between consecutive same-lane vehicles, meters.
    pub vehicular_gap: f64,
    pub lane_count: u32,
    pub road_length: f64,
    pub lane_width: f64,
    pub min_gap: f64,
    pub mobility_dt: f64,
    pub flow1: FlowConfig,
    pub flow2: FlowConfig,
    /// Broadcasting vehicle; `None` picks the vehicle nearest the road
    /// midpoint at the first send.
    pub source_node: Option<u32>,
    pub first_send: f64,
    pub send_interval: f64,
    pub last_send: f64,
    pub sim_end: f64,
    pub radio: RadioConfig,
    /// Defer-timer ceiling in seconds; `None` resolves to twice the
    /// single-hop communication delay (airtime plus edge-of-range
    /// propagation).
    pub defer_max: Option<f64>,
    pub defer_epsilon: u32,
    pub lists: PacketListConfig,
    pub protocol: ProtocolConfig,
    pub seed: u64,
}

impl ScenarioConfig {
    /// The resolved defer parameters for this scenario.
    pub fn defer_config(&self) -> DeferConfig {
        let max_defer_time = self.defer_max.unwrap_or_else(|| {
            2.0 * (self.radio.airtime() + self.radio.range / self.radio.prop_speed)
        });
        DeferConfig {
            max_defer_time,
            epsilon: self.defer_epsilon,
            range: self.radio.range,
        }
    }

    /// Number of packets the source will send.
    pub fn scheduled_sends(&self) -> u32 {
        ((self.last_send - self.first_send) / self.send_interval).floor() as u32 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 100 vehicles at 200 m gaps on 4 lanes: sparse traffic.
    Scenario1,
    /// 200 vehicles at 100 m gaps on 4 lanes: moderate traffic.
    Scenario2,
    /// 500 vehicles at 5 m gaps on 3 lanes: dense traffic.
    Scenario3,
}

impl FromStr for Preset {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scenario1" => Ok(Preset::Scenario1),
            "scenario2" => Ok(Preset::Scenario2),
            "scenario3" => Ok(Preset::Scenario3),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Scenario1 => "scenario1",
            Preset::Scenario2 => "scenario2",
            Preset::Scenario3 => "scenario3",
        })
    }
}

/// Build one of the three built-in scenarios. They share the 22 km road,
/// the two flows (120 km/h and 70 km/h), the 300 m radio range, and the
/// 600 s / every 50 s / until 2000 s send schedule; they differ in vehicle
/// count, initial gap, and lane count.
pub fn preset(name: Preset) -> ScenarioConfig {
    let (vehicle_count, vehicular_gap, lane_count) = match name {
        Preset::Scenario1 => (100, 200.0, 4),
        Preset::Scenario2 => (200, 100.0, 4),
        Preset::Scenario3 => (500, 5.0, 3),
    };
    ScenarioConfig {
        vehicle_count,
        vehicular_gap,
        lane_count,
        road_length: 22_000.0,
        lane_width: 3.5,
        min_gap: 2.0,
        mobility_dt: 0.5,
        flow1: FlowConfig {
            speed_kmh: 120.0,
            accel: 4.5,
            decel: 1.0,
        },
        flow2: FlowConfig {
            speed_kmh: 70.0,
            accel: 0.8,
            decel: 4.5,
        },
        source_node: None,
        first_send: 600.0,
        send_interval: 50.0,
        last_send: 2000.0,
        sim_end: 2100.0,
        radio: RadioConfig {
            range: 300.0,
            data_rate: 6.0e6,
            packet_size_bits: 8000.0,
            prop_speed: 3.0e8,
            collision_model: CollisionModel::AirtimeOverlap,
            edge_loss_prob: 0.0,
        },
        defer_max: None,
        defer_epsilon: 2,
        lists: PacketListConfig::default(),
        protocol: ProtocolConfig::default(),
        seed: 1,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {msg}")]
    Validation { msg: String },
    #[error("unknown preset `{0}` (scenario1|scenario2|scenario3)")]
    UnknownPreset(String),
}

fn parse_err(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        msg: msg.into(),
    }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    raw.parse()
        .map_err(|e| parse_err(line, format!("bad value for `{key}`: {e}")))
}

fn apply(cfg: &mut ScenarioConfig, line: usize, key: &str, raw: &str) -> Result<(), ConfigError> {
    match key {
        "seed" => cfg.seed = value(line, key, raw)?,
        "protocol" => {
            cfg.protocol.kind = raw
                .parse::<ProtocolKind>()
                .map_err(|e| parse_err(line, e))?
        }
        "protocol.p_fwd" => cfg.protocol.p_fwd = value(line, key, raw)?,
        "protocol.angle_vertex" => {
            cfg.protocol.angle_vertex = raw.parse().map_err(|e| parse_err(line, e))?
        }
        "protocol.branch_polarity" => {
            cfg.protocol.branch_polarity = raw.parse().map_err(|e| parse_err(line, e))?
        }
        "vehicle_count" => cfg.vehicle_count = value(line, key, raw)?,
        "vehicular_gap" => cfg.vehicular_gap = value(line, key, raw)?,
        "lane_count" => cfg.lane_count = value(line, key, raw)?,
        "road_length" => cfg.road_length = value(line, key, raw)?,
        "lane_width" => cfg.lane_width = value(line, key, raw)?,
        "min_gap" => cfg.min_gap = value(line, key, raw)?,
        "mobility_dt" => cfg.mobility_dt = value(line, key, raw)?,
        "flow1.speed_kmh" => cfg.flow1.speed_kmh = value(line, key, raw)?,
        "flow1.accel" => cfg.flow1.accel = value(line, key, raw)?,
        "flow1.decel" => cfg.flow1.decel = value(line, key, raw)?,
        "flow2.speed_kmh" => cfg.flow2.speed_kmh = value(line, key, raw)?,
        "flow2.accel" => cfg.flow2.accel = value(line, key, raw)?,
        "flow2.decel" => cfg.flow2.decel = value(line, key, raw)?,
        "source_node" => {
            cfg.source_node = if raw == "auto" {
                None
            } else {
                Some(value(line, key, raw)?)
            }
        }
        "first_send" => cfg.first_send = value(line, key, raw)?,
        "send_interval" => cfg.send_interval = value(line, key, raw)?,
        "last_send" => cfg.last_send = value(line, key, raw)?,
        "sim_end" => cfg.sim_end = value(line, key, raw)?,
        "radio.range" => cfg.radio.range = value(line, key, raw)?,
        "radio.data_rate" => cfg.radio.data_rate = value(line, key, raw)?,
        "radio.packet_size_bits" => cfg.radio.packet_size_bits = value(line, key, raw)?,
        "radio.prop_speed" => cfg.radio.prop_speed = value(line, key, raw)?,
        "radio.collision_model" => {
            cfg.radio.collision_model = match raw {
                "ideal" => CollisionModel::Ideal,
                "airtime-overlap" => CollisionModel::AirtimeOverlap,
                other => {
                    return Err(parse_err(
                        line,
                        format!("unknown collision model `{other}` (ideal|airtime-overlap)"),
                    ))
                }
            }
        }
        "radio.edge_loss_prob" => cfg.radio.edge_loss_prob = value(line, key, raw)?,
        "defer.max_defer_time" => {
            cfg.defer_max = if raw == "auto" {
                None
            } else {
                Some(value(line, key, raw)?)
            }
        }
        "defer.epsilon" => cfg.defer_epsilon = value(line, key, raw)?,
        "lists.l1_capacity" => cfg.lists.l1_capacity = value(line, key, raw)?,
        "lists.l0_capacity" => cfg.lists.l0_capacity = value(line, key, raw)?,
        other => return Err(parse_err(line, format!("unknown key `{other}`"))),
    }
    Ok(())
}

/// Parse the flat config format. A `preset = ...` line must come before any
/// override.
pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = preset(Preset::Scenario1);
    let mut saw_key = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, "expected `key = value`"))?;
        let (key, val) = (key.trim(), val.trim());
        if key.is_empty() || val.is_empty() {
            return Err(parse_err(line_no, "expected `key = value`"));
        }
        if key == "preset" {
            if saw_key {
                return Err(parse_err(
                    line_no,
                    "`preset` must come before any other key",
                ));
            }
            cfg = preset(val.parse()?);
        } else {
            apply(&mut cfg, line_no, key, val)?;
        }
        saw_key = true;
    }
    validate(&cfg)?;
    Ok(cfg)
}

/// Canonical, fully explicit rendering. `parse(render(c)) == c` for every
/// valid config.
pub fn render(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("seed", format!("{}", cfg.seed));
    kv("protocol", cfg.protocol.kind.to_string());
    kv("protocol.p_fwd", format!("{:?}", cfg.protocol.p_fwd));
    kv("protocol.angle_vertex", cfg.protocol.angle_vertex.to_string());
    kv(
        "protocol.branch_polarity",
        cfg.protocol.branch_polarity.to_string(),
    );
    kv("vehicle_count", format!("{}", cfg.vehicle_count));
    kv("vehicular_gap", format!("{:?}", cfg.vehicular_gap));
    kv("lane_count", format!("{}", cfg.lane_count));
    kv("road_length", format!("{:?}", cfg.road_length));
    kv("lane_width", format!("{:?}", cfg.lane_width));
    kv("min_gap", format!("{:?}", cfg.min_gap));
    kv("mobility_dt", format!("{:?}", cfg.mobility_dt));
    kv("flow1.speed_kmh", format!("{:?}", cfg.flow1.speed_kmh));
    kv("flow1.accel", format!("{:?}", cfg.flow1.accel));
    kv("flow1.decel", format!("{:?}", cfg.flow1.decel));
    kv("flow2.speed_kmh", format!("{:?}", cfg.flow2.speed_kmh));
    kv("flow2.accel", format!("{:?}", cfg.flow2.accel));
    kv("flow2.decel", format!("{:?}", cfg.flow2.decel));
    kv(
        "source_node",
        cfg.source_node
            .map(|n| n.to_string())
            .unwrap_or_else(|| "auto".to_string()),
    );
    kv("first_send", format!("{:?}", cfg.first_send));
    kv("send_interval", format!("{:?}", cfg.send_interval));
    kv("last_send", format!("{:?}", cfg.last_send));
    kv("sim_end", format!("{:?}", cfg.sim_end));
    kv("radio.range", format!("{:?}", cfg.radio.range));
    kv("radio.data_rate", format!("{:?}", cfg.radio.data_rate));
    kv(
        "radio.packet_size_bits",
        format!("{:?}", cfg.radio.packet_size_bits),
    );
    kv("radio.prop_speed", format!("{:?}", cfg.radio.prop_speed));
    kv(
        "radio.collision_model",
        match cfg.radio.collision_model {
            CollisionModel::Ideal => "ideal".to_string(),
            CollisionModel::AirtimeOverlap => "airtime-overlap".to_string(),
        },
    );
    kv(
        "radio.edge_loss_prob",
        format!("{:?}", cfg.radio.edge_loss_prob),
    );
    kv(
        "defer.max_defer_time",
        cfg.defer_max
            .map(|v| format!("{v:?}"))
            .unwrap_or_else(|| "auto".to_string()),
    );
    kv("defer.epsilon", format!("{}", cfg.defer_epsilon));
    kv("lists.l1_capacity", format!("{}", cfg.lists.l1_capacity));
    kv("lists.l0_capacity", format!("{}", cfg.lists.l0_capacity));
    out
}

fn invariant(ok: bool, msg: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Validation {
            msg: msg.to_string(),
        })
    }
}

pub fn validate(cfg: &ScenarioConfig) -> Result<(), ConfigError> {
    invariant(cfg.vehicle_count >= 2, "vehicle_count must be at least 2")?;
    invariant(cfg.lane_count >= 1, "lane_count must be at least 1")?;
    invariant(cfg.road_length > 0.0, "road_length must be positive")?;
    invariant(cfg.vehicular_gap > 0.0, "vehicular_gap must be positive")?;
    invariant(cfg.lane_width > 0.0, "lane_width must be positive")?;
    invariant(cfg.min_gap > 0.0, "min_gap must be positive")?;
    invariant(cfg.mobility_dt > 0.0, "mobility_dt must be positive")?;
    invariant(
        cfg.flow1.speed_kmh > 0.0 && cfg.flow2.speed_kmh > 0.0,
        "flow speeds must be positive",
    )?;
    invariant(
        cfg.flow1.accel > 0.0 && cfg.flow2.accel > 0.0,
        "flow accelerations must be positive",
    )?;
    invariant(
        cfg.flow1.decel > 0.0 && cfg.flow2.decel > 0.0,
        "flow decelerations must be positive",
    )?;
    invariant(
        cfg.first_send <= cfg.last_send,
        "first_send must not exceed last_send",
    )?;
    invariant(
        cfg.last_send <= cfg.sim_end,
        "last_send must not exceed sim_end",
    )?;
    invariant(cfg.first_send >= 0.0, "first_send must be non-negative")?;
    invariant(cfg.send_interval > 0.0, "send_interval must be positive")?;
    invariant(cfg.radio.range > 0.0, "radio.range must be positive")?;
    invariant(cfg.radio.data_rate > 0.0, "radio.data_rate must be positive")?;
    invariant(
        cfg.radio.packet_size_bits > 0.0,
        "radio.packet_size_bits must be positive",
    )?;
    invariant(
        cfg.radio.prop_speed > 0.0,
        "radio.prop_speed must be positive",
    )?;
    invariant(
        (0.0..=1.0).contains(&cfg.radio.edge_loss_prob),
        "radio.edge_loss_prob must be within [0, 1]",
    )?;
    invariant(cfg.defer_epsilon >= 1, "defer.epsilon must be at least 1")?;
    invariant(
        cfg.defer_max.is_none_or(|v| v > 0.0),
        "defer.max_defer_time must be positive",
    )?;
    invariant(
        cfg.lists.l1_capacity >= 1 && cfg.lists.l0_capacity >= 1,
        "list capacities must be at least 1",
    )?;
    invariant(
        (0.0..=1.0).contains(&cfg.protocol.p_fwd),
        "protocol.p_fwd must be within [0, 1]",
    )?;
    invariant(
        cfg.source_node.is_none_or(|n| n < cfg.vehicle_count),
        "source_node must name an existing vehicle",
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn preset_values_match_the_table() {
        assert_eq!(preset(Preset::Scenario1).vehicular_gap, 200.0);
        assert_eq!(preset(Preset::Scenario3).lane_count, 3);
        assert_eq!(preset(Preset::Scenario2).flow2.decel, 4.5);
        assert_eq!(preset(Preset::Scenario2).vehicle_count, 200);
        for p in [Preset::Scenario1, Preset::Scenario2, Preset::Scenario3] {
            let cfg = preset(p);
            assert_eq!(cfg.road_length, 22_000.0);
            assert_eq!(cfg.first_send, 600.0);
            assert_eq!(cfg.send_interval, 50.0);
            assert_eq!(cfg.last_send, 2000.0);
            assert_eq!(cfg.sim_end, 2100.0);
            assert_eq!(cfg.radio.range, 300.0);
            assert_eq!(cfg.scheduled_sends(), 29);
            validate(&cfg).unwrap();
        }
    }

    #[test]
    fn preset_line_alone_equals_preset() {
        let cfg = parse("preset = scenario1\n").unwrap();
        assert_eq!(cfg, preset(Preset::Scenario1));
    }

    #[test]
    fn vehicle_count_below_two_is_invalid() {
        let err = parse("vehicle_count = 1\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Validation {
                msg: "vehicle_count must be at least 2".to_string()
            }
        );
    }

    #[test]
    fn wpbm_override_parses() {
        let cfg = parse("preset = scenario2\nprotocol = wpbm\nprotocol.p_fwd = 1.0\n").unwrap();
        assert_eq!(cfg.protocol.kind, ProtocolKind::Wpbm);
        assert_eq!(cfg.protocol.p_fwd, 1.0);
    }

    #[test]
    fn unknown_key_reports_line_number() {
        let err = parse("seed = 1\nbogus = 3\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Parse {
                line: 2,
                msg: "unknown key `bogus`".to_string()
            }
        );
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert_eq!(
            parse("preset = scenario9\n").unwrap_err(),
            ConfigError::UnknownPreset("scenario9".to_string())
        );
    }

    #[test]
    fn preset_after_overrides_is_rejected() {
        let err = parse("seed = 1\npreset = scenario2\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let cfg = parse("# full line\n\nseed = 9 # trailing\n").unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn auto_defer_resolves_to_twice_the_hop_delay() {
        let cfg = preset(Preset::Scenario1);
        let expected = 2.0 * (8000.0 / 6.0e6 + 300.0 / 3.0e8);
        assert_eq!(cfg.defer_config().max_defer_time, expected);
    }

    #[test]
    fn presets_round_trip_through_render() {
        for p in [Preset::Scenario1, Preset::Scenario2, Preset::Scenario3] {
            let cfg = preset(p);
            assert_eq!(parse(&render(&cfg)).unwrap(), cfg);
        }
    }

    fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
        (
            2u32..500,
            1.0f64..500.0,
            1u32..6,
            (1u64..u64::MAX, 0.0f64..1.0, 1u32..4),
            prop::option::of(0.0001f64..10.0),
            prop::sample::select(vec![
                ProtocolKind::Flooding,
                ProtocolKind::Wpbm,
                ProtocolKind::Odam,
                ProtocolKind::OdamC,
            ]),
        )
            .prop_map(|(n, gap, lanes, (seed, p_fwd, eps), defer_max, kind)| {
                let mut cfg = preset(Preset::Scenario1);
                cfg.vehicle_count = n;
                cfg.vehicular_gap = gap;
                cfg.lane_count = lanes;
                cfg.seed = seed;
                cfg.protocol.kind = kind;
                cfg.protocol.p_fwd = p_fwd;
                cfg.defer_epsilon = eps;
                cfg.defer_max = defer_max;
                cfg
            })
    }

    proptest! {
        #[test]
        fn parse_render_round_trip(cfg in arb_config()) {
            prop_assert_eq!(parse(&render(&cfg)).unwrap(), cfg);
        }
    }
}

//! Command-line runner: single simulations, protocol/seed sweeps, and the
//! built-in interference replay.
//!
//! Exit codes: 0 on success, 2 on configuration errors (message on
//! stderr), 1 on internal failures or a failed replay contrast.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use roadcast::interference;
use roadcast::medium::CollisionModel;
use roadcast::metrics::{write_metrics_csv, write_summary_csv, MetricsTable};
use roadcast::protocols::{BranchPolarity, ProtocolKind};
use roadcast::scenario::{self, ScenarioConfig};
use roadcast::sim::{SimSetup, Simulation, TraceSinks};

#[derive(Parser)]
#[command(
    name = "roadcast",
    version,
    about = "Discrete-event simulator for multi-hop broadcast on highways"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its metrics.
    Run(RunArgs),
    /// Run every (protocol, seed) combination and summarize them.
    Sweep(SweepArgs),
    /// Replay the four-node interference geometry under the relay-selection
    /// baseline and the dual-list protocol, and report the contrast.
    ReplayInterference(ReplayArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to a config file (flat `key = value` format).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario: scenario1, scenario2, or scenario3.
    #[arg(long)]
    preset: Option<String>,
    /// Override the protocol: flooding, wpbm, odam, or odam-c.
    #[arg(long)]
    protocol: Option<String>,
    /// Override the random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the inhibition-angle vertex: receiver or sender.
    #[arg(long)]
    angle_vertex: Option<String>,
    /// Override the angle branch polarity: prose or pseudocode.
    #[arg(long)]
    branch_polarity: Option<String>,
    /// Override the collision model: ideal or airtime-overlap.
    #[arg(long)]
    collision_model: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            scenario::parse(&text)?
        } else if let Some(name) = &self.preset {
            scenario::preset(name.parse()?)
        } else {
            anyhow::bail!("either --config or --preset is required");
        };
        if let Some(p) = &self.protocol {
            cfg.protocol.kind = p.parse::<ProtocolKind>().map_err(anyhow::Error::msg)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(v) = &self.angle_vertex {
            cfg.protocol.angle_vertex = v.parse().map_err(anyhow::Error::msg)?;
        }
        if let Some(b) = &self.branch_polarity {
            cfg.protocol.branch_polarity = b.parse().map_err(anyhow::Error::msg)?;
        }
        if let Some(m) = &self.collision_model {
            cfg.radio.collision_model = parse_collision_model(m)?;
        }
        scenario::validate(&cfg)?;
        Ok(cfg)
    }
}

fn parse_collision_model(s: &str) -> anyhow::Result<CollisionModel> {
    match s {
        "ideal" => Ok(CollisionModel::Ideal),
        "airtime-overlap" => Ok(CollisionModel::AirtimeOverlap),
        other => anyhow::bail!("unknown collision model `{other}` (ideal|airtime-overlap)"),
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Also write events.log (one line per processed event).
    #[arg(long)]
    trace_events: bool,
    /// Also write positions.csv (per mobility tick).
    #[arg(long)]
    trace_positions: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Protocols to sweep, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    protocols: Vec<String>,
    /// Seeds: either `a..b` (inclusive) or a comma-separated list.
    #[arg(long, required = true)]
    seeds: String,
    /// Output directory; one subdirectory per (protocol, seed).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Optional directory for the two event logs and the receiver summary.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Angle branch polarity to replay: prose or pseudocode.
    #[arg(long)]
    branch_polarity: Option<String>,
    /// Not supported here: the replay always contrasts odam and odam-c.
    #[arg(long)]
    protocol: Option<String>,
}

/// Configuration problems exit with 2; internal failures with 1.
enum CliError {
    Config(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> CliError {
        CliError::Internal(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Internal(e.into())
    }
}

impl From<roadcast::sim::SimError> for CliError {
    fn from(e: roadcast::sim::SimError) -> CliError {
        CliError::Internal(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::ReplayInterference(args) => cmd_replay(args),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Execute one simulation into `dir`, writing metrics.csv and summary.csv
/// (plus optional traces). Returns the metrics table.
fn run_into_dir(
    cfg: &ScenarioConfig,
    dir: &Path,
    trace_events: bool,
    trace_positions: bool,
) -> anyhow::Result<MetricsTable> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let sim = Simulation::new(SimSetup::from_scenario(cfg))?;

    let mut events_file = if trace_events {
        Some(BufWriter::new(File::create(dir.join("events.log"))?))
    } else {
        None
    };
    let mut positions_file = if trace_positions {
        Some(BufWriter::new(File::create(dir.join("positions.csv"))?))
    } else {
        None
    };
    let sinks = TraceSinks {
        events: events_file.as_mut().map(|w| w as &mut dyn Write),
        positions: positions_file.as_mut().map(|w| w as &mut dyn Write),
    };
    let output = sim.run(sinks)?;
    if let Some(mut w) = events_file {
        w.flush()?;
    }
    if let Some(mut w) = positions_file {
        w.flush()?;
    }

    let table = output.metrics();
    let mut metrics = BufWriter::new(File::create(dir.join("metrics.csv"))?);
    write_metrics_csv(&table, &mut metrics)?;
    metrics.flush()?;
    let mut summary = BufWriter::new(File::create(dir.join("summary.csv"))?);
    write_summary_csv(&table, &mut summary)?;
    summary.flush()?;
    Ok(table)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, CliError> {
    let cfg = args.config.load().map_err(CliError::Config)?;
    run_into_dir(&cfg, &args.out, args.trace_events, args.trace_positions).map_err(|e| {
        // An infeasible vehicle layout is a configuration problem.
        match e.downcast_ref::<roadcast::sim::SimError>() {
            Some(roadcast::sim::SimError::Mobility(_)) => CliError::Config(e),
            _ => CliError::Internal(e),
        }
    })?;
    Ok(ExitCode::SUCCESS)
}

/// Parse `a..b` (inclusive) or `s1,s2,...`.
fn parse_seeds(spec: &str) -> anyhow::Result<Vec<u64>> {
    let seeds: Vec<u64> = if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().context("bad seed range start")?;
        let b: u64 = b.trim().parse().context("bad seed range end")?;
        anyhow::ensure!(a <= b, "seed range start exceeds end");
        (a..=b).collect()
    } else {
        spec.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse().context("bad seed"))
            .collect::<anyhow::Result<_>>()?
    };
    anyhow::ensure!(!seeds.is_empty(), "seed list is empty");
    Ok(seeds)
}

pub const COMPARISON_HEADER: &str =
    "protocol,packet_id,send_time_s,mean_pdr,mean_redundancy,mean_latency_s,mean_tx_count";

/// Cross-seed means per (protocol, packet), composed from the per-run rows.
/// Accumulated per-packet samples across the seeds of one protocol.
#[derive(Default)]
struct PacketSamples {
    send_time: f64,
    pdrs: Vec<f64>,
    redundancies: Vec<f64>,
    latencies: Vec<f64>,
    tx_counts: Vec<f64>,
}

fn write_comparison(
    w: &mut dyn Write,
    results: &BTreeMap<String, Vec<MetricsTable>>,
) -> anyhow::Result<()> {
    writeln!(w, "{COMPARISON_HEADER}")?;
    for (protocol, tables) in results {
        let mut per_packet: BTreeMap<u32, PacketSamples> = BTreeMap::new();
        for table in tables {
            for row in &table.rows {
                let slot = per_packet.entry(row.packet_seq).or_default();
                slot.send_time = row.send_time_s;
                slot.pdrs.push(row.pdr);
                slot.redundancies.push(row.redundancy);
                if let Some(l) = row.latency_s {
                    slot.latencies.push(l);
                }
                slot.tx_counts.push(f64::from(row.tx_count));
            }
        }
        for (packet, s) in per_packet {
            let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
            let lat_cell = if s.latencies.is_empty() {
                String::new()
            } else {
                format!("{:?}", mean(&s.latencies))
            };
            writeln!(
                w,
                "{},{},{:?},{:?},{:?},{},{:?}",
                protocol,
                packet,
                s.send_time,
                mean(&s.pdrs),
                mean(&s.redundancies),
                lat_cell,
                mean(&s.tx_counts)
            )?;
        }
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, CliError> {
    let base = args.config.load().map_err(CliError::Config)?;
    let protocols: Vec<ProtocolKind> = args
        .protocols
        .iter()
        .map(|p| p.parse::<ProtocolKind>().map_err(anyhow::Error::msg))
        .collect::<anyhow::Result<_>>()
        .map_err(CliError::Config)?;
    let seeds = parse_seeds(&args.seeds).map_err(CliError::Config)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))
        .map_err(CliError::Internal)?;

    let mut results: BTreeMap<String, Vec<MetricsTable>> = BTreeMap::new();
    let mut failed = 0u32;
    for protocol in &protocols {
        for seed in &seeds {
            let mut cfg = base.clone();
            cfg.protocol.kind = *protocol;
            cfg.seed = *seed;
            let cell = args.out.join(protocol.to_string()).join(format!("seed-{seed}"));
            match run_into_dir(&cfg, &cell, false, false) {
                Ok(table) => results.entry(protocol.to_string()).or_default().push(table),
                Err(e) => {
                    failed += 1;
                    eprintln!("cell {protocol}/seed-{seed} failed: {e:#}");
                    fs::create_dir_all(&cell).ok();
                    fs::write(cell.join("FAILED"), format!("{e:#}\n")).ok();
                }
            }
        }
    }

    let mut w = BufWriter::new(
        File::create(args.out.join("comparison.csv")).map_err(|e| CliError::Internal(e.into()))?,
    );
    write_comparison(&mut w, &results)?;
    w.flush().map_err(|e| CliError::Internal(e.into()))?;

    if failed > 0 {
        eprintln!("{failed} sweep cell(s) failed; see FAILED markers");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_replay(args: ReplayArgs) -> Result<ExitCode, CliError> {
    if args.protocol.is_some() {
        return Err(CliError::Config(anyhow::anyhow!(
            "--protocol cannot be combined with the interference replay; it always contrasts odam and odam-c"
        )));
    }
    let polarity: BranchPolarity = args
        .branch_polarity
        .as_deref()
        .unwrap_or("prose")
        .parse()
        .map_err(|e: String| CliError::Config(anyhow::Error::msg(e)))?;

    let report = if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let mut odam_log = BufWriter::new(File::create(dir.join("odam.events.log"))?);
        let mut odamc_log = BufWriter::new(File::create(dir.join("odam-c.events.log"))?);
        let report = interference::replay_with_traces(
            polarity,
            Some(&mut odam_log),
            Some(&mut odamc_log),
        )?;
        odam_log.flush()?;
        odamc_log.flush()?;
        report
    } else {
        interference::replay(polarity)?
    };

    let names = |set: &std::collections::BTreeSet<roadcast::NodeId>| {
        let labels = ["A", "B", "C", "D"];
        set.iter()
            .map(|n| labels[n.0 as usize])
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut lines = String::new();
    lines.push_str(&format!(
        "odam    received: {}{}\n",
        names(&report.odam.receivers),
        if report.odam.receivers.contains(&interference::FAR_NODE) {
            ""
        } else {
            "    (D unreached)"
        }
    ));
    lines.push_str(&format!(
        "odam-c  received: {}{}\n",
        names(&report.odamc.receivers),
        if report.odamc.receivers.contains(&interference::FAR_NODE) {
            ""
        } else {
            "    (D unreached)"
        }
    ));
    print!("{lines}");
    if let Some(dir) = &args.out {
        fs::write(dir.join("receivers.txt"), &lines).map_err(|e| CliError::Internal(e.into()))?;
    }

    if report.contrast_holds() {
        println!("contrast holds: the dual-list protocol reaches D, the baseline does not");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("contrast does NOT hold under this configuration");
        Ok(ExitCode::from(1))
    }
}

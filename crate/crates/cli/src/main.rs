// Copyright 2026 The ACP+ Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `acp`: live ACP+ endpoints over UDP, network simulations, rate sweeps
//! and closed-form age calculations.
//!
//! Exit status: 0 on success, 1 on a runtime failure, 2 on a usage error.

mod grid;
mod manifest;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use acp_core::analytics::{
    self, age_curve, aoi_mm1, aoi_tandem_with, curve_to_csv, optimal_lambda_mm1,
    optimal_lambda_tandem, packets_per_system_time_mm1, packets_per_system_time_tandem,
    TandemFormula, TandemParams,
};
use acp_core::controller::MdecBacklog;
use acp_core::endpoints::{
    run_monitor, run_source, EndpointError, Monitor, Policy, SourceConfig, SourceEndpoint, UdpLink,
};
use acp_core::parallel::Execution;
use acp_core::simkit::{self, RunSpec, SimConfig};
use anyhow::{anyhow, Context};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::manifest::{digest, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "acp",
    version,
    about = "ACP+ age-control endpoints, simulator and analytics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Receive updates on a UDP port and acknowledge the fresh ones.
    Monitor(MonitorArgs),
    /// Send updates to a monitor under a rate-control policy.
    Source(SourceArgs),
    /// Run a simulation described by a JSON config.
    Sim(SimArgs),
    /// Closed-form average age of M/M/1 and tandem queues.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Simulate a fixed-rate network over a grid of rates and write the age curve.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct MonitorArgs {
    /// UDP address to listen on, e.g. 127.0.0.1:5005 (port 0 picks a free port).
    #[arg(long)]
    bind: SocketAddr,
    /// JSON-lines file receiving one record per age reset.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Stop after this many seconds; runs until interrupted by default.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MdecArg {
    Instantaneous,
    TimeAverage,
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Monitor address.
    #[arg(long)]
    peer: SocketAddr,
    /// Local address; defaults to an ephemeral port on the matching interface.
    #[arg(long)]
    bind: Option<SocketAddr>,
    /// acp_plus, lazy, or fixed:RATE (updates per second).
    #[arg(long, default_value = "acp_plus")]
    policy: Policy,
    /// Update payload in bytes.
    #[arg(long, default_value_t = 1024)]
    payload: usize,
    /// Seconds to run, initialization included.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    /// Updates per control epoch.
    #[arg(long, default_value_t = 10)]
    eta: u32,
    /// EWMA weight of the newest RTT and ACK inter-arrival samples.
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    /// Stop-and-wait probes used to estimate the initial rate.
    #[arg(long, default_value_t = 10)]
    probe_count: u32,
    /// Seconds to wait for each probe's ACK.
    #[arg(long, default_value_t = 1.0)]
    probe_timeout: f64,
    /// Backlog figure scaled by multiplicative decrease.
    #[arg(long, value_enum, default_value = "instantaneous")]
    mdec_backlog: MdecArg,
    /// JSON-lines file receiving one record per control epoch.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Simulation config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Metrics output (one JSON line).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's duration (simulated seconds).
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Fixed-rate simulation config (JSON); its rate is replaced by each grid point.
    #[arg(long)]
    config: PathBuf,
    /// start:stop:step or a comma-separated list of rates.
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    /// CSV output with columns lambda,avg_age,ci_halfwidth.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration: Option<f64>,
    /// Evaluate grid points one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormulaArg {
    Assembled,
    Asymmetric,
}

#[derive(Debug, Subcommand)]
enum AnalyzeCommand {
    /// Average age of an M/M/1 queue.
    #[command(group(ArgGroup::new("what").required(true).args(["lambda", "sweep"])))]
    Mm1 {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        lambda: Option<f64>,
        /// Emit a CSV curve over start:stop:step or a list.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Average age of two M/M/1 queues in tandem.
    #[command(group(ArgGroup::new("what").required(true).args(["lambda", "sweep"])))]
    Tandem {
        #[arg(long)]
        mu1: f64,
        #[arg(long)]
        mu2: f64,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long, value_enum, default_value = "assembled")]
        formula: FormulaArg,
    },
    /// Age-minimizing rate.
    #[command(group(ArgGroup::new("net").required(true).args(["mm1", "tandem"])))]
    Optimum {
        #[arg(long)]
        mm1: bool,
        #[arg(long)]
        tandem: bool,
        #[arg(long, required_if_eq("mm1", "true"))]
        mu: Option<f64>,
        #[arg(long, required_if_eq("tandem", "true"))]
        mu1: Option<f64>,
        #[arg(long, required_if_eq("tandem", "true"))]
        mu2: Option<f64>,
    },
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Monitor(a) => cmd_monitor(a),
        Command::Source(a) => cmd_source(a),
        Command::Sim(a) => cmd_sim(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json_line<T: serde::Serialize>(w: &mut impl Write, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn cmd_monitor(a: MonitorArgs) -> CmdResult {
    if let Some(d) = a.duration {
        if !(d > 0.0) {
            return Err(usage("--duration must be positive"));
        }
    }
    let mut link = UdpLink::listen(a.bind).map_err(|e| anyhow!("cannot bind {}: {e}", a.bind))?;
    let local = link.local_addr().map_err(|e| anyhow!("{e}"))?;
    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        ctrlc::set_handler(move || stop.store(true, Ordering::Relaxed))
            .context("installing the SIGINT handler")?;
    }
    let manifest = RunManifest::begin(None, None, a.trace.iter().cloned().collect());
    let mut trace = match &a.trace {
        Some(p) => {
            manifest.write()?;
            Some(create(p)?)
        }
        None => None,
    };
    println!("listening on {local}");
    std::io::stdout().flush().ok();

    let mut monitor = Monitor::new();
    let until = a.duration.map_or(f64::INFINITY, |d| {
        acp_core::endpoints::DatagramLink::now(&link) + d
    });
    let mut write_err = None;
    let res = run_monitor(&mut link, &mut monitor, until, &stop, |r| {
        if let Some(w) = trace.as_mut() {
            if let Err(e) = write_json_line(w, r).and_then(|_| Ok(w.flush()?)) {
                write_err.get_or_insert(e);
            }
        }
    });
    if let Some(w) = trace.as_mut() {
        w.flush().context("flushing the trace")?;
    }
    if a.trace.is_some() {
        manifest.finish()?;
    }
    res.map_err(|e| anyhow!("monitor: {e}"))?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let c = monitor.counters();
    println!(
        "{}",
        json!({"accepted": c.accepted, "discarded": c.discarded, "malformed": c.malformed})
    );
    Ok(())
}

fn cmd_source(a: SourceArgs) -> CmdResult {
    if !(a.duration > 0.0) {
        return Err(usage("--duration must be positive"));
    }
    let cfg = SourceConfig {
        probe_count: a.probe_count,
        probe_timeout: a.probe_timeout,
        payload_size: a.payload,
        eta: a.eta,
        alpha: a.alpha,
        policy: a.policy,
        mdec_backlog: match a.mdec_backlog {
            MdecArg::Instantaneous => MdecBacklog::Instantaneous,
            MdecArg::TimeAverage => MdecBacklog::TimeAverage,
        },
    };
    let mut src = SourceEndpoint::new(cfg).map_err(|e| usage(e.to_string()))?;
    let bind = a.bind.unwrap_or_else(|| {
        let ip = if a.peer.ip().is_loopback() {
            IpAddr::V4(Ipv4Addr::LOCALHOST)
        } else {
            IpAddr::V4(Ipv4Addr::UNSPECIFIED)
        };
        SocketAddr::new(ip, 0)
    });
    let mut link =
        UdpLink::connect(bind, a.peer).map_err(|e| anyhow!("cannot bind {bind}: {e}"))?;
    let manifest = RunManifest::begin(None, None, a.trace.iter().cloned().collect());
    let mut trace = match &a.trace {
        Some(p) => {
            manifest.write()?;
            Some(create(p)?)
        }
        None => None,
    };
    let mut write_err = None;
    let res = run_source(&mut link, &mut src, a.duration, |r| {
        if let Some(w) = trace.as_mut() {
            if let Err(e) = write_json_line(w, r) {
                write_err.get_or_insert(e);
            }
        }
    });
    if let Some(w) = trace.as_mut() {
        w.flush().context("flushing the trace")?;
    }
    if a.trace.is_some() {
        manifest.finish()?;
    }
    let summary = match res {
        Ok(s) => s,
        Err(EndpointError::InitFailed(n)) => {
            return Err(anyhow!(
                "initialization failed: no ACK from {} for any of {n} probes",
                a.peer
            )
            .into())
        }
        Err(e) => return Err(anyhow!("source: {e}").into()),
    };
    if let Some(e) = write_err {
        return Err(e.into());
    }
    println!(
        "{}",
        serde_json::to_string(&summary).map_err(anyhow::Error::from)?
    );
    Ok(())
}

fn load_config(path: &Path) -> Result<(SimConfig, String), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let cfg = SimConfig::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok((cfg, digest(text.as_bytes())))
}

fn apply_overrides(cfg: &mut SimConfig, seed: Option<u64>, duration: Option<f64>) -> CmdResult {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = duration {
        cfg.duration = d;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))
}

fn cmd_sim(a: SimArgs) -> CmdResult {
    let (mut cfg, config_digest) = load_config(&a.config)?;
    apply_overrides(&mut cfg, a.seed, a.duration)?;
    let manifest = RunManifest::begin(Some(config_digest), Some(cfg.seed), vec![a.out.clone()]);
    let metrics = simkit::simulate(&cfg).map_err(|e| anyhow!("simulation failed: {e}"))?;
    let mut w = create(&a.out)?;
    write_json_line(&mut w, &metrics)?;
    w.flush().context("writing metrics")?;
    manifest.finish()?;
    let backlogs: Vec<String> = metrics
        .nodes
        .iter()
        .map(|n| format!("{:.3}", n.avg_backlog))
        .collect();
    println!(
        "{}: avg_age={} delivered={} node_backlog=[{}]{}",
        if cfg.name.is_empty() {
            "sim"
        } else {
            &cfg.name
        },
        metrics.avg_age.map_or("n/a".into(), |x| format!("{x:.6}")),
        metrics.delivered,
        backlogs.join(", "),
        if metrics.unstable {
            " (unstable load)"
        } else {
            ""
        }
    );
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    let grid = grid::parse_grid(&a.grid).map_err(usage)?;
    let (mut cfg, config_digest) = load_config(&a.config)?;
    apply_overrides(&mut cfg, a.seed, a.duration)?;
    let RunSpec::FixedRate { arrival, .. } = cfg.run else {
        return Err(usage("sweep needs a fixed_rate config"));
    };
    let exec = if a.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let manifest = RunManifest::begin(Some(config_digest), Some(cfg.seed), vec![a.out.clone()]);
    let sweep = simkit::sweep_lambda(&cfg.network, &grid, arrival, cfg.duration, cfg.seed, exec)
        .map_err(|e| anyhow!("sweep failed: {e}"))?;
    let mut w = create(&a.out)?;
    w.write_all(curve_to_csv(&sweep.curve).as_bytes())
        .context("writing the curve")?;
    w.flush().context("writing the curve")?;
    manifest.finish()?;
    println!(
        "{}",
        json!({"lambda": sweep.best.lambda, "avg_age": sweep.best.avg_age})
    );
    Ok(())
}

fn domain(e: analytics::DomainError) -> Failure {
    usage(e.to_string())
}

fn cmd_analyze(a: AnalyzeCommand) -> CmdResult {
    match a {
        AnalyzeCommand::Mm1 { mu, lambda, sweep } => {
            if let Some(l) = lambda {
                println!("{}", aoi_mm1(l, mu).map_err(domain)?);
            }
            if let Some(g) = sweep {
                let grid = grid::parse_grid(&g).map_err(usage)?;
                aoi_mm1(grid[0], mu).map_err(domain)?;
                print!("{}", curve_to_csv(&age_curve(&grid, |l| aoi_mm1(l, mu))));
            }
        }
        AnalyzeCommand::Tandem {
            mu1,
            mu2,
            lambda,
            sweep,
            formula,
        } => {
            let formula = match formula {
                FormulaArg::Assembled => TandemFormula::Assembled,
                FormulaArg::Asymmetric => TandemFormula::Asymmetric,
            };
            let age = |l: f64| {
                aoi_tandem_with(
                    &TandemParams {
                        lambda: l,
                        mu1,
                        mu2,
                    },
                    formula,
                )
            };
            if let Some(l) = lambda {
                println!("{}", age(l).map_err(domain)?);
            }
            if let Some(g) = sweep {
                let grid = grid::parse_grid(&g).map_err(usage)?;
                age(grid[0]).map_err(domain)?;
                print!("{}", curve_to_csv(&age_curve(&grid, age)));
            }
        }
        AnalyzeCommand::Optimum {
            mm1,
            tandem: _,
            mu,
            mu1,
            mu2,
        } => {
            let out = if mm1 {
                let mu = mu.ok_or_else(|| usage("--mm1 needs --mu"))?;
                let opt = optimal_lambda_mm1(mu).map_err(domain)?;
                let pps = packets_per_system_time_mm1(mu).map_err(domain)?;
                json!({"lambda": opt.lambda, "age": opt.age, "packets_per_system_time": pps})
            } else {
                let (mu1, mu2) = mu1
                    .zip(mu2)
                    .ok_or_else(|| usage("--tandem needs --mu1 and --mu2"))?;
                let opt = optimal_lambda_tandem(mu1, mu2).map_err(domain)?;
                let pps = packets_per_system_time_tandem(mu1, mu2).map_err(domain)?;
                json!({"lambda": opt.lambda, "age": opt.age, "packets_per_system_time": pps})
            };
            println!("{out}");
        }
    }
    Ok(())
}

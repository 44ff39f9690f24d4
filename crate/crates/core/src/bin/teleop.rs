//! `teleop` command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 config error,
//! 4 protocol (trace or frame) error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use teleop_core::config::{ClockMode, EngineConfig};
use teleop_core::perception::LayoutMode;
use teleop_core::retarget::RetargetMode;
use teleop_core::runtime::{LiveSession, RunOptions, RunSummary};
use teleop_core::session::{compare, compare_table, replay, Trace};

#[derive(Parser, Debug)]
#[command(name = "teleop", version, about = "Bimanual teleoperation engine")]
struct Cli {
    /// Engine config file (TOML). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the retargeting mode.
    #[arg(long, global = true)]
    mode: Option<RetargetMode>,
    /// Override the panel layout.
    #[arg(long, global = true)]
    layout: Option<LayoutMode>,
    /// Print the resolved config and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the live engine with its UDP listeners and console bridge.
    Run {
        #[command(flatten)]
        live: LiveArgs,
        /// Also record every input to this trace file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the live engine and record its inputs.
    Record {
        #[command(flatten)]
        live: LiveArgs,
        /// Trace file to write.
        #[arg(long)]
        trace: PathBuf,
    },
    /// Replay a trace and print metrics.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Write the command log here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Replay one trace under several configs, side by side.
    Compare {
        #[arg(long)]
        trace: PathBuf,
        /// Two or more config files, used as written (`--mode` and `--layout`
        /// do not apply).
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(clap::Args, Debug)]
struct LiveArgs {
    /// Run ticks back to back on the simulated clock instead of pacing them.
    #[arg(long)]
    sim_clock: bool,
    /// Stop after this many seconds of engine time.
    #[arg(long)]
    duration: Option<f64>,
    /// Write the command log here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Toml,
    Table,
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Config(anyhow::Error),
    Protocol(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Config(_) => 3,
            Failure::Protocol(_) => 4,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Config(e) | Failure::Protocol(e) | Failure::Runtime(e) => {
                e
            }
        }
    }
}

fn load_file(path: Option<&Path>) -> Result<EngineConfig, Failure> {
    match path {
        Some(p) => EngineConfig::load(p).map_err(|e| Failure::Config(e.into())),
        None => Ok(EngineConfig::default()),
    }
}

/// The config named by `--config` with `--mode` and `--layout` applied.
fn load_config(path: Option<&Path>, cli: &Cli) -> Result<EngineConfig, Failure> {
    let mut cfg = load_file(path)?;
    if let Some(m) = cli.mode {
        cfg.engine.retarget_mode = m;
    }
    if let Some(l) = cli.layout {
        cfg.engine.layout_mode = l;
    }
    cfg.validate().map_err(|e| Failure::Config(e.into()))?;
    Ok(cfg)
}

fn read_trace(path: &Path) -> Result<Trace, Failure> {
    Trace::read(path)
        .with_context(|| format!("reading trace {}", path.display()))
        .map_err(Failure::Protocol)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Runtime)
}

fn print_serialized<T: serde::Serialize>(value: &T, format: Format) -> Result<(), Failure> {
    let text = match format {
        Format::Toml => toml::to_string_pretty(value).map_err(|e| Failure::Runtime(e.into()))?,
        Format::Json | Format::Table => {
            serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.into()))?
        }
    };
    println!("{text}");
    Ok(())
}

fn run_live(cfg: EngineConfig, live: &LiveArgs, record: Option<&Path>) -> Result<(), Failure> {
    let duration_us = match live.duration {
        Some(d) if !(d > 0.0 && d.is_finite()) => {
            return Err(Failure::Usage(anyhow::anyhow!("--duration must be positive")))
        }
        Some(d) => Some((d * 1e6).round() as u64),
        None => None,
    };
    let clock = if live.sim_clock {
        ClockMode::Simulated
    } else {
        cfg.engine.clock
    };
    if clock == ClockMode::Simulated && duration_us.is_none() {
        return Err(Failure::Usage(anyhow::anyhow!(
            "the simulated clock runs unpaced and needs --duration"
        )));
    }
    let opts = RunOptions {
        clock,
        duration_us,
        record: record.is_some(),
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.into()))?;
    let summary: RunSummary = rt.block_on(async {
        let session = LiveSession::start(cfg, opts)
            .await
            .map_err(|e| Failure::Runtime(e.into()))?;
        let stop = session_stopper(&session);
        let result = session.join().await.map_err(|e| Failure::Runtime(e.into()));
        stop.abort();
        result
    })?;
    log::info!("engine stopped after {} ticks", summary.ticks);
    if let (Some(path), Some(trace)) = (record, &summary.trace) {
        trace
            .write(path)
            .with_context(|| format!("writing trace {}", path.display()))
            .map_err(Failure::Runtime)?;
    }
    if let Some(out) = &live.out {
        write_file(out, &summary.command_log)?;
    }
    print_serialized(&summary.metrics, Format::Json)
}

fn session_stopper(session: &LiveSession) -> tokio::task::JoinHandle<()> {
    let handle = session.shutdown_handle();
    tokio::spawn(async move {
        if tokio::signal::ctrl_c().await.is_ok() {
            log::info!("interrupt received, stopping");
            handle.shutdown();
        }
    })
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli.config.as_deref(), cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(Failure::Usage(anyhow::anyhow!(
            "no subcommand given (try `teleop --help`)"
        )));
    };
    match command {
        Command::Run { live, trace } => run_live(cfg, live, trace.as_deref()),
        Command::Record { live, trace } => run_live(cfg, live, Some(trace)),
        Command::Replay { trace, out, format } => {
            let t = read_trace(trace)?;
            let result = replay(&t, &cfg).map_err(|e| Failure::Config(e.into()))?;
            if result.config_mismatch {
                eprintln!("warning: trace config hash differs from the replay config");
            }
            if let Some(out) = out {
                write_file(out, &result.command_log)?;
            }
            #[derive(serde::Serialize)]
            struct Report<'a> {
                ticks: u64,
                config_mismatch: bool,
                command_log_sha256: String,
                metrics: &'a teleop_core::session::MetricsReport,
            }
            print_serialized(
                &Report {
                    ticks: result.ticks,
                    config_mismatch: result.config_mismatch,
                    command_log_sha256: result.command_log_sha256(),
                    metrics: &result.metrics,
                },
                *format,
            )
        }
        Command::Compare {
            trace,
            configs,
            format,
        } => {
            let t = read_trace(trace)?;
            let mut resolved = Vec::new();
            for path in configs {
                let label = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                resolved.push((label, load_file(Some(path))?));
            }
            let rows = compare(&t, &resolved).map_err(|e| Failure::Config(e.into()))?;
            match format {
                Format::Table => {
                    print!("{}", compare_table(&rows));
                    Ok(())
                }
                Format::Json => print_serialized(&rows, *format),
                Format::Toml => {
                    #[derive(serde::Serialize)]
                    struct Rows<'a> {
                        rows: &'a [teleop_core::session::CompareRow],
                    }
                    print_serialized(&Rows { rows: &rows }, *format)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

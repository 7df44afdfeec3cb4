//! `feedback-loom`: serve live sessions, simulate scripted ones, replay logs
//! and compute metrics.

mod serve;

use std::fs;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use feedback_loom::agents::{self, AgentParams, FeedbackPolicy, ScenarioOptions, ScriptedInput};
use feedback_loom::eventlog;
use feedback_loom::metrics;
use feedback_loom::server::LOG_DIR_ENV;
use feedback_loom::tic;
use feedback_loom::{Error, Mode, SessionConfig};

#[derive(Parser)]
#[command(name = "feedback-loom", version, about = "Meeting feedback-channel engine and session server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the session server (newline-delimited JSON over TCP, optionally WebSocket).
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Also accept WebSocket clients on this port.
        #[arg(long)]
        ws_port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Where session logs are written; logs are kept in memory only if unset.
        #[arg(long, env = LOG_DIR_ENV)]
        log_dir: Option<PathBuf>,
    },
    /// Run scripted agents through a session and write its log.
    Simulate {
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        #[arg(long)]
        seats: Option<u32>,
        /// Clock ticks to run; defaults to the whole phase plan.
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON array of per-seat agent parameters.
        #[arg(long)]
        agents: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PolicyArg::None)]
        policy: PolicyArg,
        /// JSON array of `{tick, event}` inputs for `--policy script`.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Session config JSON; `--mode`, `--seats` and `--seed` override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        review_interval: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Rebuild a session's final state from its log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Fail unless the replayed state has this digest.
        #[arg(long)]
        expect_digest: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Participation, equality and extremity report for a log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
        /// Coder annotations; defaults to the annotations recorded in the log.
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Draw an evaluator cycle for a table.
    GenAssignment {
        #[arg(long)]
        seats: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    None,
    EqualizeShares,
    Script,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}

/// Validation problems exit 1, file and network problems exit 2.
fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|cause| {
        cause.downcast_ref::<std::io::Error>().is_some() || matches!(cause.downcast_ref::<Error>(), Some(Error::Io(_)))
    });
    if io {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Serve { port, ws_port, host, log_dir } => {
            if let Some(dir) = &log_dir {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve::serve(host, port, ws_port, log_dir))
        }
        Command::Simulate { mode, seats, ticks, seed, agents, policy, script, config, review_interval, out, json } => {
            let mut cfg = match &config {
                Some(path) => SessionConfig::from_json(&read(path)?)?,
                None => SessionConfig::for_mode(mode),
            };
            cfg.mode = mode;
            if let Some(n) = seats {
                cfg.n_seats = n;
            }
            cfg.rng_seed = seed;
            let agents = match &agents {
                Some(path) => serde_json::from_str(&read(path)?).context("parsing agents")?,
                None => default_agents(cfg.n_seats, seed),
            };
            let policy = match (policy, &script) {
                (PolicyArg::None, _) => FeedbackPolicy::None,
                (PolicyArg::EqualizeShares, _) => FeedbackPolicy::EqualizeShares,
                (PolicyArg::Script, Some(path)) => {
                    let inputs: Vec<ScriptedInput> = serde_json::from_str(&read(path)?).context("parsing script")?;
                    FeedbackPolicy::Script(inputs)
                }
                (PolicyArg::Script, None) => anyhow::bail!("--policy script needs --script"),
            };
            let ticks = ticks.unwrap_or_else(|| cfg.phase_plan.iter().map(|p| p.duration_ticks).sum());
            let options = ScenarioOptions { review_interval, ..ScenarioOptions::default() };
            let run = agents::run_scenario(&cfg, &agents, ticks, &policy, &options)?;
            eventlog::write_log(&out, &run.log).with_context(|| format!("writing {}", out.display()))?;
            let summary = json!({
                "log": out,
                "events": run.log.len(),
                "ticks": run.state.tick,
                "phase": run.state.phase,
                "digest": run.state.digest(),
                "rejected_inputs": run.rejected.len(),
            });
            if json {
                println!("{summary}");
            } else {
                println!(
                    "wrote {} events over {} ticks to {} (phase {}, digest {})",
                    run.log.len(),
                    run.state.tick,
                    out.display(),
                    run.state.phase,
                    run.state.digest()
                );
            }
            Ok(())
        }
        Command::Replay { log, expect_digest, json } => {
            let records = eventlog::read_log(&log).with_context(|| format!("reading {}", log.display()))?;
            let state = eventlog::replay_log(&records)?;
            let digest = state.digest();
            let matches = expect_digest.as_ref().map(|d| *d == digest);
            if json {
                println!(
                    "{}",
                    json!({
                        "events": records.len(),
                        "mode": state.config.mode,
                        "phase": state.phase,
                        "ticks": state.tick,
                        "digest": digest,
                        "matches": matches,
                    })
                );
            } else {
                println!(
                    "replayed {} events: {:?} session, phase {}, {} ticks, digest {digest}",
                    records.len(),
                    state.config.mode,
                    state.phase,
                    state.tick
                );
            }
            if matches == Some(false) {
                anyhow::bail!("replayed digest {digest} does not match the expected digest");
            }
            Ok(())
        }
        Command::Metrics { log, annotations, report, json } => {
            let records = eventlog::read_log(&log).with_context(|| format!("reading {}", log.display()))?;
            let coded = match &annotations {
                Some(path) => {
                    Some(eventlog::read_annotations(path).with_context(|| format!("reading {}", path.display()))?)
                }
                None => None,
            };
            let built = metrics::build_report(&records, coded.as_deref())?;
            let text = serde_json::to_string_pretty(&built)?;
            match &report {
                Some(path) => {
                    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
                    if json {
                        println!("{}", json!({ "report": path, "gini": built.gini, "shares": built.shares }));
                    } else {
                        println!("report written to {} (gini {:.4})", path.display(), built.gini);
                    }
                }
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::GenAssignment { seats, seed, json } => {
            let cycle = tic::generate_assignment(seats, seed)?;
            let sigma: Vec<u32> = cycle.targets().iter().map(|s| s.0).collect();
            let report = tic::validate_assignment(&sigma, seats);
            if json {
                println!(
                    "{}",
                    json!({
                        "seats": seats,
                        "seed": seed,
                        "targets": sigma,
                        "cycle": cycle.to_string(),
                        "valid": report.is_ok(),
                    })
                );
            } else {
                println!("{cycle}");
                for (i, t) in sigma.iter().enumerate() {
                    println!("  seat {i} pedal -> seat {t} ball");
                }
                println!(
                    "valid: single cycle, no self, neighbor{} assignment",
                    if seats % 2 == 0 { " or opposite" } else { "" }
                );
            }
            Ok(())
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Conforming agents with talkativeness spread across the table.
fn default_agents(n: u32, seed: u64) -> Vec<AgentParams> {
    (0..n)
        .map(|i| {
            let spread = if n > 1 { f64::from(i) / f64::from(n - 1) } else { 0.0 };
            AgentParams::new(0.1 + 0.5 * spread, 0.8, seed.wrapping_mul(1000).wrapping_add(u64::from(i)))
        })
        .collect()
}

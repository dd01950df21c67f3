//! Command line: exit 0 on success, 1 when a verification fails, 2 on bad input.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fairslice_core::experiment::{
    metrics, simulate_batch, BatchConfig, SessionConfig, Tolerances, TraceStore,
};
use fairslice_core::fixtures::lab_profile_named;
use fairslice_core::learning::{plan, KnowledgeState};
use fairslice_core::profile::{Mode, ProfileFile};
use fairslice_core::strategy::{best_response, verify_lemma, LemmaReport};
use fairslice_core::{ProcedureId, Profile};
use serde_json::json;

use crate::api::{self, AppState};

#[derive(Debug, Parser)]
#[command(
    name = "fairslice",
    version,
    about = "Discrete cake cutting: sessions, simulation and analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory for JSONL session traces.
        #[arg(long, default_value = "traces")]
        traces: PathBuf,
        /// Zero the rest of a procedure once its time limit passes.
        #[arg(long)]
        enforce_time_limit: bool,
    },
    /// Simulate a batch of subjects and print metrics as CSV.
    Simulate {
        /// Batch config as JSON; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        repetitions: Option<u32>,
        #[arg(long)]
        rounds: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Procedures to run, e.g. 2ACC,3SC.
        #[arg(long, value_delimiter = ',')]
        procedures: Vec<ProcedureId>,
        /// Also write the simulated traces here.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive best response of one agent against truthful automata.
    BestResponse {
        /// Fixture name (2acc, ..., 3sc) or a profile JSON file.
        #[arg(long)]
        profile: String,
        /// Needed when the profile is a file.
        #[arg(long)]
        procedure: Option<ProcedureId>,
        #[arg(long, default_value_t = 0)]
        subject: usize,
    },
    /// Check a built-in manipulation result (3 or 4).
    VerifyLemma {
        #[arg(value_parser = clap::value_parser!(u8).range(3..=4))]
        lemma: u8,
    },
    /// Turn a directory of session traces into a metrics CSV.
    Audit {
        #[arg(long)]
        traces: PathBuf,
        /// Envy tolerances in points.
        #[arg(long, value_delimiter = ',', default_values_t = [0, 5, 10])]
        tolerance: Vec<u64>,
        /// Truthful-payoff tolerances in points.
        #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 15])]
        payoff_tolerance: Vec<u64>,
        /// Truthful-cut tolerance in pixels.
        #[arg(long, default_value_t = 5)]
        pixels: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Best first cut for a cutter still learning the chooser's half point.
    Plan {
        /// Fixture name or profile file; agent 0 is the cutter.
        #[arg(long, default_value = "2acc")]
        profile: String,
        #[arg(long, default_value_t = 1)]
        rounds: u32,
        /// Largest cut known to leave the right piece to the cutter.
        #[arg(long, default_value_t = 0)]
        s: u32,
        /// Smallest cut known to give the cutter the left piece; defaults to the width.
        #[arg(long)]
        t: Option<u32>,
    },
}

/// Bad input: exit status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve {
            addr,
            traces,
            enforce_time_limit,
        } => {
            let store = TraceStore::open(&traces).map_err(|e| usage(e.to_string()))?;
            let defaults = SessionConfig {
                enforce_time_limit,
                ..SessionConfig::default()
            };
            let state = AppState::new(store, defaults, api::system_clock());
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}");
            rt.block_on(api::serve(state, addr))
                .with_context(|| format!("serving on {addr}"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            config,
            alpha,
            repetitions,
            rounds,
            seed,
            procedures,
            traces,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => read_json::<BatchConfig>(&path)?,
                None => BatchConfig::default(),
            };
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            if let Some(r) = rounds {
                cfg.rounds = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if !procedures.is_empty() {
                cfg.procedures = procedures;
            }
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            let output = simulate_batch(&cfg, &Tolerances::default())?;
            if let Some(dir) = traces {
                let store = TraceStore::open(&dir)?;
                for r in &output.records {
                    store.save(r)?;
                }
            }
            write_out(out.as_deref(), &output.report.to_csv()?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::BestResponse {
            profile,
            procedure,
            subject,
        } => {
            let (p, named) = resolve_profile(&profile)?;
            let id = procedure
                .or(named)
                .ok_or_else(|| usage("--procedure is required with a profile file"))?;
            if p.len() != id.agents() {
                return Err(usage(format!(
                    "{id} needs {} agents, the profile has {}",
                    id.agents(),
                    p.len()
                )));
            }
            if subject >= p.len() {
                return Err(usage(format!("no agent {subject} in the profile")));
            }
            let br = best_response(id, &p, subject)?;
            println!("{}", serde_json::to_string_pretty(&br)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyLemma { lemma } => {
            let report = verify_lemma(lemma)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            let verdict = if report.pass() { "pass" } else { "FAIL" };
            match &report {
                LemmaReport::Gaps { checks, .. } => {
                    for c in checks {
                        println!(
                            "{}: gap {:.3} vs threshold {:.3} {}",
                            c.procedure,
                            c.gap,
                            c.threshold,
                            if c.pass { "pass" } else { "FAIL" }
                        );
                    }
                }
                LemmaReport::Envy { check, .. } => {
                    println!(
                        "3SC: optimum {} of {} (truthful {}), envious at optimum {}, envious profitable deviation {}",
                        check.payoff,
                        check.total,
                        check.truthful_payoff,
                        check.envious_at_optimum,
                        check
                            .envious_deviation
                            .as_ref()
                            .map_or("none".to_string(), |d| format!("{:?} earning {}", d.action, d.payoff))
                    );
                }
            }
            println!("lemma {lemma}: {verdict}");
            Ok(if report.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Audit {
            traces,
            tolerance,
            payoff_tolerance,
            pixels,
            out,
        } => {
            if !traces.is_dir() {
                return Err(usage(format!("{} is not a directory", traces.display())));
            }
            let records = TraceStore::open(&traces)?
                .load_all()
                .map_err(|e| usage(e.to_string()))?;
            let tol = Tolerances {
                envy: tolerance,
                payoff: payoff_tolerance,
                pixels,
            };
            write_out(out.as_deref(), &metrics(&records, &tol)?.to_csv()?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Plan {
            profile,
            rounds,
            s,
            t,
        } => {
            let (p, _) = resolve_profile(&profile)?;
            let v = p.agent(0);
            let t = t.unwrap_or(v.width());
            let k = KnowledgeState::new(s, t).map_err(|e| usage(e.to_string()))?;
            if t > v.width() {
                return Err(usage(format!(
                    "t = {t} is beyond the cake width {}",
                    v.width()
                )));
            }
            let plan = plan(v, rounds, k).map_err(|e| usage(e.to_string()))?;
            let total = plan.expected_total;
            let report = json!({
                "cut": plan.cut,
                "rounds": rounds,
                "knowledge": { "s": s, "t": t },
                "expected_total": format!("{}/{}", total.numer(), total.denom()),
                "expected_total_value": *total.numer() as f64 / *total.denom() as f64,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// A fixture by name, otherwise a profile file.
fn resolve_profile(arg: &str) -> Result<(Profile, Option<ProcedureId>)> {
    if let Some(p) = lab_profile_named(arg) {
        return Ok((p, arg.parse().ok()));
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(usage(format!(
            "{arg:?} is neither a fixture name (2acc, 2scc, 3ds, 4ds, 3ld, 4ld, 4ep, 3sc) nor a file"
        )));
    }
    let file = ProfileFile::load(path).map_err(|e| usage(format!("{arg}: {e}")))?;
    let p = Profile::from_file(&file, Mode::General).map_err(|e| usage(format!("{arg}: {e}")))?;
    Ok((p, None))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

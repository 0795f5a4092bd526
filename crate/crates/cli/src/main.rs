//! `minpair`: batch front end for the average-cost MDP toolkit.
//!
//! Exit status 0 when every check passes, 1 when a check fails (the failure
//! list goes to `failures.json` and stderr), 2 on configuration errors.

mod commands;
mod report;
mod reproduce;
mod source;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use commands::{CertifyArgs, DiagnoseArgs, Outcome, PolicyChoice, SimulateArgs};
use report::{write_json, write_rows, Failure, Kind};
use source::{Loaded, Preset};

#[derive(Parser, Debug)]
#[command(name = "minpair", version, about = "Minimum pairs, vanishing discount and recurrence diagnostics for average-cost MDPs")]
struct Cli {
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "minpair-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Model file in the JSON schema written by `generate`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// ex1-harris, ex1-nonharris, ex1-linearcost, ex1-harris-linear, ex2-gauss, ex2-step, single, random:N:M:SEED
    #[arg(long)]
    preset: Option<Preset>,
    /// Last state N of the truncated birth-reset chain.
    #[arg(long)]
    truncation: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the occupation-measure LP and verify the minimum pair.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        /// Horizon of the exact evaluations used in verification.
        #[arg(long, default_value_t = 2000)]
        horizon: usize,
    },
    /// Discounted value iteration over a list of discount factors.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.9,0.99,0.999")]
        alphas: Vec<f64>,
        /// Sup-norm stopping tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Exact and Monte Carlo running average costs.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
        #[arg(long, default_value_t = 100)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial state (default: 1 for ex1 presets, x = 0 for ex2, else 0).
        #[arg(long)]
        start: Option<usize>,
        #[arg(long, value_enum)]
        policy: Option<PolicyChoice>,
    },
    /// Check the cost, majorization and finite-cost assumptions.
    Certify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 5000)]
        horizon: usize,
        #[arg(long, default_value_t = 500)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of exhausting sets for the generator SU check.
        #[arg(long, default_value_t = 20)]
        su_depth: usize,
        /// Required infimum outside the last exhausting set.
        #[arg(long, default_value_t = 100.0)]
        su_threshold: f64,
        /// Radii j of the compacts K = [−j, j] for the density majorization check.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        radii: Vec<usize>,
    },
    /// Hitting probabilities, return times and regularity.
    Diagnose {
        #[command(flatten)]
        model: ModelArgs,
        /// Series depth for the exact birth-reset analysis.
        #[arg(long, default_value_t = 1_000_000)]
        depth: usize,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Target set for Monte Carlo hitting.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        target: Vec<usize>,
    },
    /// Write a preset model in the JSON schema.
    Generate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Composite report of every numeric claim for one worked example.
    Reproduce {
        #[arg(value_enum)]
        example: Example,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Example {
    Ex1,
    Ex2,
}

#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    args: Vec<String>,
    version: &'a str,
    started_unix_seconds: u64,
    elapsed_seconds: f64,
    threads: usize,
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("MINPAIR_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::config("cli", "thread-count-positive", format!("MINPAIR_THREADS={v}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::config("cli", "thread-pool", e.to_string()))
}

fn load(m: &ModelArgs, default_truncation: usize) -> Result<Loaded, Failure> {
    let src = source::load(m.model.as_deref(), m.preset.as_ref(), m.truncation.unwrap_or(default_truncation))?;
    println!("model {}: {} states, {} pairs", src.label, src.model.n_states(), src.model.n_pairs());
    Ok(src)
}

fn reproduce(example: Example, seed: u64, out: &Path) -> Outcome {
    let rows = match example {
        Example::Ex1 => reproduce::example1(seed)?,
        Example::Ex2 => reproduce::example2(seed)?,
    };
    println!("{:<44}  {:>22}  {:>14}  {:>10}  status", "check", "value", "target", "tolerance");
    for r in &rows {
        println!(
            "{:<44}  {:>22.15}  {:>14.9}  {:>10.3e}  {}",
            r.check,
            r.value,
            r.target,
            r.tolerance,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    write_rows(&out.join("report.csv"), &rows)?;
    Ok(rows.iter().filter_map(|r| r.failure()).collect())
}

fn run(cli: &Cli) -> Outcome {
    configure_threads()?;
    std::fs::create_dir_all(&cli.out).map_err(report::io_err(&cli.out))?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Solve { model, horizon } => commands::solve(&load(model, 200)?, out, *horizon),
        Command::Sweep { model, alphas, tol } => commands::sweep(&load(model, 200)?, out, alphas, *tol),
        Command::Simulate {
            model,
            horizon,
            paths,
            seed,
            start,
            policy,
        } => {
            // far enough that the truncation is out of reach
            let src = load(model, horizon + start.unwrap_or(1) + 2)?;
            let args = SimulateArgs {
                horizon: *horizon,
                paths: *paths,
                seed: *seed,
                start: *start,
                policy: *policy,
            };
            commands::simulate(&src, out, &args)
        }
        Command::Certify {
            model,
            horizon,
            paths,
            seed,
            su_depth,
            su_threshold,
            radii,
        } => {
            let args = CertifyArgs {
                horizon: *horizon,
                paths: *paths,
                seed: *seed,
                su_depth: *su_depth,
                su_threshold: *su_threshold,
                m_radii: radii.clone(),
            };
            commands::certify(&load(model, 200)?, out, &args)
        }
        Command::Diagnose {
            model,
            depth,
            horizon,
            paths,
            seed,
            target,
        } => {
            let args = DiagnoseArgs {
                depth: *depth,
                horizon: *horizon,
                paths: *paths,
                seed: *seed,
                target: target.clone(),
            };
            commands::diagnose(&load(model, 10)?, out, &args)
        }
        Command::Generate { model } => commands::generate(&load(model, 200)?, out),
        Command::Reproduce { example, seed } => reproduce(*example, *seed, out),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Solve { .. } => "solve",
        Command::Sweep { .. } => "sweep",
        Command::Simulate { .. } => "simulate",
        Command::Certify { .. } => "certify",
        Command::Diagnose { .. } => "diagnose",
        Command::Generate { .. } => "generate",
        Command::Reproduce { .. } => "reproduce",
    }
}

fn report_failures(out: &Path, failures: &[Failure]) {
    for f in failures {
        eprintln!("{}", serde_json::to_string(f).expect("failure record serializes"));
    }
    if out.is_dir() {
        let _ = write_json(&out.join("failures.json"), failures);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let result = run(&cli);
    let code = match &result {
        Ok(f) if f.is_empty() => ExitCode::SUCCESS,
        Ok(f) => {
            report_failures(&cli.out, f);
            ExitCode::from(1)
        }
        Err(f) => {
            report_failures(&cli.out, std::slice::from_ref(f));
            ExitCode::from(if f.kind == Kind::Config { 2 } else { 1 })
        }
    };
    if cli.out.is_dir() {
        let meta = Meta {
            command: command_name(&cli.command),
            args: std::env::args().skip(1).collect(),
            version: env!("CARGO_PKG_VERSION"),
            started_unix_seconds: started,
            elapsed_seconds: clock.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        };
        let _ = write_json(&cli.out.join("meta.json"), &meta);
    }
    code
}

//! `shadowbench`: simulate randomized-measurement datasets, estimate operator
//! entanglement from them, and produce plot-ready CSV.
//!
//! Every command takes an optional JSON config (`--config`); flags override its keys.
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid input, 3 flagged
//! primary output under `--strict`.

// Negated float comparisons also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use shadowbench::Execution;

use commands::{bounds, detect, estimate, export, ffchain, simulate};
use config::{Partition, StateSpec, TimeGrid, ValidationError};

#[derive(Parser)]
#[command(name = "shadowbench", version, about = "Operator-entanglement estimation from randomized measurements")]
struct Cli {
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Exit with status 3 when a primary output is flagged invalid.
    #[arg(long, global = true)]
    strict: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate randomized measurements and write JSONL datasets plus a manifest.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArg,
        /// JSON state specification; replaces `state` in the config.
        #[arg(long)]
        state_file: Option<PathBuf>,
        #[arg(long, value_parser = Partition::parse)]
        partition: Option<Partition>,
        /// `start:stop:step` or a comma-separated list, in 1/J0.
        #[arg(long, value_parser = TimeGrid::parse)]
        times: Option<TimeGrid>,
        #[arg(long)]
        ensemble: Option<String>,
        #[arg(long)]
        n_u: Option<usize>,
        #[arg(long)]
        n_m: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output prefix.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate OE, purity entropy and symmetry-resolved OE from datasets.
    Estimate {
        #[command(flatten)]
        cfg: ConfigArg,
        datasets: Vec<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_parser = Partition::parse)]
        partition: Option<Partition>,
        #[arg(long)]
        n_prime_oe: Option<usize>,
        #[arg(long)]
        n_prime_sroe: Option<usize>,
        /// Shuffle unitaries into batches with this seed.
        #[arg(long)]
        shuffle_seed: Option<u64>,
        #[arg(long)]
        no_jackknife: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Free-fermion chain OE after a Néel quench, with quasiparticle predictions.
    Ffchain {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        n_sites: Option<usize>,
        #[arg(long)]
        ell_a: Option<usize>,
        #[arg(long)]
        ell_b: Option<usize>,
        /// `start:stop:step` or a comma-separated list, in 1/J.
        #[arg(long, value_parser = TimeGrid::parse)]
        times: Option<TimeGrid>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        charges: Option<Vec<i64>>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Variance bounds, or Monte-Carlo error sweeps over shot and batch counts.
    Bounds {
        #[command(flatten)]
        cfg: ConfigArg,
        /// `analytic` or `sweep`.
        #[arg(long)]
        mode: Option<String>,
        /// `purity` or `fourth_moment`.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, value_delimiter = ',')]
        m_grid: Option<Vec<usize>>,
        /// Batch counts; `M` means one batch per unitary.
        #[arg(long, value_delimiter = ',')]
        n_primes: Option<Vec<String>>,
        #[arg(long)]
        n_qubits: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        state_file: Option<PathBuf>,
        #[arg(long, value_parser = Partition::parse)]
        partition: Option<Partition>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        ensembles: Option<Vec<String>>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Entanglement detection from a dataset or a known state.
    Detect {
        #[command(flatten)]
        cfg: ConfigArg,
        dataset: Option<PathBuf>,
        #[arg(long)]
        state_file: Option<PathBuf>,
        #[arg(long, value_parser = Partition::parse)]
        partition: Option<Partition>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        n_prime: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Long-format CSV joining manifest exact values with estimates.
    ExportPlotdata {
        #[command(flatten)]
        cfg: ConfigArg,
        manifest: Option<PathBuf>,
        #[arg(long)]
        estimates: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Default)]
struct Overrides(Vec<(&'static str, Value)>);

impl Overrides {
    fn set<T: Serialize>(&mut self, key: &'static str, value: Option<T>) -> anyhow::Result<()> {
        if let Some(v) = value {
            self.0.push((key, serde_json::to_value(v)?));
        }
        Ok(())
    }

    fn state_file(&mut self, key: &'static str, path: Option<PathBuf>) -> anyhow::Result<()> {
        self.set(key, path.map(|p| StateSpec::load_file(&p)).transpose()?)
    }
}

/// Outcome of a command: whether a primary output was flagged invalid.
type Flagged = bool;

fn dispatch(command: Command, exec: Execution) -> anyhow::Result<Flagged> {
    let mut o = Overrides::default();
    match command {
        Command::Simulate { cfg, state_file, partition, times, ensemble, n_u, n_m, seed, output } => {
            o.state_file("state", state_file)?;
            o.set("partition", partition)?;
            o.set("times", times)?;
            o.set("ensemble", ensemble)?;
            o.set("n_u", n_u)?;
            o.set("n_m", n_m)?;
            o.set("seed", seed)?;
            o.set("output", output)?;
            let c: simulate::SimulateConfig = config::load(cfg.config.as_deref(), o.0)?;
            simulate::run(&c, exec)?;
            Ok(false)
        }
        Command::Estimate { cfg, datasets, manifest, partition, n_prime_oe, n_prime_sroe, shuffle_seed, no_jackknife, output } => {
            o.set("datasets", (!datasets.is_empty()).then_some(datasets))?;
            o.set("manifest", manifest)?;
            o.set("partition", partition)?;
            o.set("n_prime_oe", n_prime_oe)?;
            o.set("n_prime_sroe", n_prime_sroe)?;
            o.set("order", shuffle_seed.map(|seed| shadowbench::shadows::BatchOrder::Shuffled { seed }))?;
            o.set("jackknife", no_jackknife.then_some(false))?;
            o.set("output", output)?;
            let c: estimate::EstimateConfig = config::load(cfg.config.as_deref(), o.0)?;
            let rows = estimate::run(&c, exec)?;
            Ok(rows.iter().any(|r| r.primary_flagged()))
        }
        Command::Ffchain { cfg, n_sites, ell_a, ell_b, times, alpha, charges, output } => {
            o.set("n_sites", n_sites)?;
            o.set("ell_a", ell_a)?;
            o.set("ell_b", ell_b)?;
            o.set("times", times)?;
            o.set("alpha", alpha)?;
            o.set("charges", charges)?;
            o.set("output", output)?;
            let c: ffchain::FfchainConfig = config::load(cfg.config.as_deref(), o.0)?;
            ffchain::run(&c, exec)?;
            Ok(false)
        }
        Command::Bounds {
            cfg,
            mode,
            target,
            m_grid,
            n_primes,
            n_qubits,
            eps,
            delta,
            state_file,
            partition,
            t,
            ensembles,
            repetitions,
            seed,
            output,
        } => {
            o.set("mode", mode)?;
            o.set("target", target)?;
            o.set("m_grid", m_grid)?;
            let n_primes = n_primes.map(|v| {
                v.into_iter()
                    .map(|s| s.parse::<usize>().map_or(Value::String(s), Value::from))
                    .collect::<Vec<_>>()
            });
            o.set("n_primes", n_primes)?;
            o.set("n_qubits", n_qubits)?;
            o.set("eps", eps)?;
            o.set("delta", delta)?;
            o.state_file("state", state_file)?;
            o.set("partition", partition)?;
            o.set("t", t)?;
            o.set("ensembles", ensembles)?;
            o.set("repetitions", repetitions)?;
            o.set("seed", seed)?;
            o.set("output", output)?;
            let c: bounds::BoundsConfig = config::load(cfg.config.as_deref(), o.0)?;
            bounds::run(&c, exec)?;
            Ok(false)
        }
        Command::Detect { cfg, dataset, state_file, partition, t, n_prime, output } => {
            o.set("dataset", dataset)?;
            o.state_file("state", state_file)?;
            o.set("partition", partition)?;
            o.set("t", t)?;
            o.set("n_prime", n_prime)?;
            o.set("output", output)?;
            let c: detect::DetectConfig = config::load(cfg.config.as_deref(), o.0)?;
            Ok(detect::run(&c, exec)?.flagged)
        }
        Command::ExportPlotdata { cfg, manifest, estimates, output } => {
            o.set("manifest", manifest)?;
            o.set("estimates", estimates)?;
            o.set("output", output)?;
            let c: export::ExportConfig = config::load(cfg.config.as_deref(), o.0)?;
            export::run(&c)?;
            Ok(false)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<ValidationError>() || e.is::<shadowbench::Error>()) {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Ok(v) = std::env::var("SHADOWBENCH_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                shadowbench::exec::init_thread_pool(n);
            }
            _ => {
                eprintln!("error: SHADOWBENCH_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };

    match dispatch(cli.command, exec) {
        Ok(true) if cli.strict => {
            eprintln!("error: a primary output is flagged invalid");
            ExitCode::from(3)
        }
        Ok(flagged) => {
            if flagged {
                log::warn!("a primary output is flagged invalid");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use olkm::harness::config::{ConfigOverrides, ExperimentConfig, GeneratorKind};
use olkm::harness::ftl::run_ftl_baseline;
use olkm::harness::output::{write_json, write_run};
use olkm::harness::runner::run_online;
use olkm::harness::verify::{verify_invariants, Fault, Suite};

#[derive(Parser)]
#[command(name = "olkm", version, about = "Online learning of k-median solutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML or JSON file with any configuration fields; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Det,
    Rand,
    Additive,
    Ftl,
}

#[derive(Subcommand)]
enum Command {
    /// Run the online learner on a generated or recorded stream.
    Run(RunArgs),
    /// Run the follow-the-leader baseline.
    Ftl(RunArgs),
    /// Run the invariant battery and print a JSON report.
    Verify {
        #[arg(long, value_enum, num_args = 1.., default_value = "all")]
        suite: Vec<Suite>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, value_enum)]
        fault: Option<Fault>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a lower-bound construction.
    Lowerbound {
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long = "T")]
        horizon: Option<usize>,
        #[arg(long)]
        lambda: Option<usize>,
        #[arg(long)]
        t0: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig> {
    let base = match &args.config {
        Some(p) => ConfigOverrides::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => ConfigOverrides::default(),
    };
    let merged = base.merged_with(&args.overrides);
    Ok(ExperimentConfig::from_overrides(&merged)?)
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn online(cfg: &ExperimentConfig) -> Result<()> {
    let out = run_online(cfg)?;
    if let Some(path) = &cfg.output_path {
        let summary = write_run(path, &out.records, &out.summary)?;
        eprintln!("wrote {} and {}", path.display(), summary.display());
    }
    print_json(&out.summary)
}

fn ftl(cfg: &ExperimentConfig) -> Result<()> {
    let out = run_ftl_baseline(cfg)?;
    if let Some(path) = &cfg.output_path {
        let rows: Vec<_> = out.records.iter().map(|r| r.to_round_record()).collect();
        let summary = write_run(path, &rows, &out.summary)?;
        eprintln!("wrote {} and {}", path.display(), summary.display());
    }
    print_json(&out.summary)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => online(&resolve(&args)?),
        Command::Ftl(args) => ftl(&resolve(&args)?),
        Command::Verify {
            suite,
            seed,
            cases,
            fault,
            out,
        } => {
            let report = verify_invariants(&suite, seed, cases, fault)?;
            if let Some(path) = out.as_deref() {
                write_json(path, &report)?;
            }
            print_json(&report)?;
            if !report.passed {
                bail!("invariant checks failed");
            }
            Ok(())
        }
        Command::Lowerbound {
            which,
            k,
            delta,
            horizon,
            lambda,
            t0,
            seed,
            out,
        } => {
            let generator = match which {
                Which::Det => GeneratorKind::LbDet,
                Which::Rand => GeneratorKind::LbRand,
                Which::Additive => GeneratorKind::LbAdditive,
                Which::Ftl => GeneratorKind::LbFtl,
            };
            let overrides = ConfigOverrides {
                generator: Some(generator),
                k,
                delta,
                horizon,
                lambda,
                t0,
                seed,
                output_path: out,
                ..Default::default()
            };
            let cfg = ExperimentConfig::from_overrides(&overrides)?;
            match which {
                Which::Ftl => ftl(&cfg),
                _ => online(&cfg),
            }
        }
    }
}

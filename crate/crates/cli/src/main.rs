use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qaoi_cli::files::{write_rows, CsvKind};
use qaoi_cli::{compare_runs, run_analytic, run_scenario, AnalyticSpec, Manifest, ScenarioSpec, Stage};
use qaoi_core::{CostKind, SolverOptions};

/// Solve, simulate and compare query-aware scheduling policies.
#[derive(Debug, Parser)]
#[command(name = "qaoi", version)]
struct Cli {
    /// Worker threads for sweep points and seeds (0 = all cores).
    #[arg(long, global = true, env = "QAOI_JOBS", default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Parent directory of run directories.
    #[arg(long, env = "QAOI_OUT_DIR", default_value = "runs")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SeedArgs {
    /// Override the number of seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Override the first seed.
    #[arg(long)]
    base_seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve every model of a scenario and write policy files.
    Solve {
        scenario: PathBuf,
        #[command(flatten)]
        out: OutArgs,
        /// Append the value function to policy files.
        #[arg(long)]
        values: bool,
    },
    /// Simulate previously solved policies.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        out: OutArgs,
        /// Directory holding the policy files (default: the run directory).
        #[arg(long)]
        policy_dir: Option<PathBuf>,
        #[command(flatten)]
        seeds: SeedArgs,
    },
    /// Solve and simulate a scenario, or replay a run from its manifest.
    Run {
        #[arg(required_unless_present = "manifest", conflicts_with = "manifest")]
        scenario: Option<PathBuf>,
        /// Manifest (or run directory) to reproduce.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        values: bool,
        #[command(flatten)]
        seeds: SeedArgs,
    },
    /// Write the closed-form laws of the feedback-free schedules.
    Analytic {
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Per-point average-age differences between two runs (a - b).
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Policy taken from run a.
        #[arg(long, default_value = "PQ")]
        policy_a: CostKind,
        /// Policy taken from run b (default: same as --policy-a).
        #[arg(long)]
        policy_b: Option<CostKind>,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn with_seeds(mut spec: ScenarioSpec, seeds: &SeedArgs) -> Result<ScenarioSpec> {
    if let Some(n) = seeds.seeds {
        spec.simulation.seeds = n;
    }
    if let Some(s) = seeds.base_seed {
        spec.simulation.base_seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

fn run_stage(spec: &ScenarioSpec, out: &Path, stage: Stage) -> Result<()> {
    let dir = out.join(&spec.name);
    let manifest = run_scenario(spec, &dir, &stage, &SolverOptions::default())
        .with_context(|| format!("scenario `{}`", spec.name))?;
    eprintln!("{}: {} models -> {}", manifest.command, manifest.points.len(), dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global().context("thread pool")?;

    match cli.command {
        Command::Solve { scenario, out, values } => {
            let spec = ScenarioSpec::load(&scenario)?;
            run_stage(&spec, &out.out, Stage::Solve { values })
        }
        Command::Simulate { scenario, out, policy_dir, seeds } => {
            let spec = with_seeds(ScenarioSpec::load(&scenario)?, &seeds)?;
            let policy_dir = policy_dir.unwrap_or_else(|| out.out.join(&spec.name));
            run_stage(&spec, &out.out, Stage::Simulate { policy_dir })
        }
        Command::Run { scenario, manifest, out, values, seeds } => {
            let spec = match (scenario, manifest) {
                (Some(path), _) => ScenarioSpec::load(&path)?,
                (None, Some(path)) => Manifest::load(&path)?.scenario,
                (None, None) => unreachable!("clap requires one of them"),
            };
            run_stage(&with_seeds(spec, &seeds)?, &out.out, Stage::Run { values })
        }
        Command::Analytic { config, out } => {
            let spec = AnalyticSpec::load(&config)?;
            for path in run_analytic(&spec, &out.out)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Compare { run_a, run_b, policy_a, policy_b, out } => {
            let rows = compare_runs(&run_a, &run_b, policy_a, policy_b.unwrap_or(policy_a))?;
            match out {
                Some(path) => qaoi_cli::files::write_csv(&path, CsvKind::Compare, &rows)?,
                None => {
                    let mut stdout = std::io::stdout().lock();
                    write_rows(&mut stdout, CsvKind::Compare, &rows)?;
                    stdout.flush()?;
                }
            }
            Ok(())
        }
    }
}

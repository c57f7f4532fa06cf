use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use qfilter::harness::{
    run_abscont_report, run_charfn_check, run_observability_report, run_stability,
    write_charfn_csv, write_json, write_stability_csv, write_trajectory_csv, Experiment,
    ExperimentConfig,
};
use qfilter::trajectories::{simulate_pair, SeedSpec};
use qfilter::Result;

#[derive(Parser)]
#[command(
    name = "qfilter",
    version,
    about = "Observability and filter-stability experiments for quantum filters"
)]
struct Cli {
    /// Override the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative rank tolerance for the observability test.
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    /// Absolute eigenvalue tolerance for kernels of density matrices.
    #[arg(long, global = true)]
    tol_kernel: Option<f64>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Observable space, its dimension and the observability verdict (JSON).
    CheckObservability { config: PathBuf },
    /// Absolute continuity of rho_true w.r.t. rho_filter (JSON).
    CheckAbscont { config: PathBuf },
    /// Simulate one filter pair and write trajectory.csv.
    Simulate {
        config: PathBuf,
        /// Path index within the master seed's streams.
        #[arg(long, default_value_t = 0)]
        path: u64,
    },
    /// Compare exact and Monte Carlo characteristic functions; writes charfn.csv.
    Charfn { config: PathBuf },
    /// Monte Carlo filter-stability run; writes stability.csv and stability_meta.json.
    Stability { config: PathBuf },
}

impl Command {
    fn config(&self) -> &PathBuf {
        match self {
            Command::CheckObservability { config }
            | Command::CheckAbscont { config }
            | Command::Simulate { config, .. }
            | Command::Charfn { config }
            | Command::Stability { config } => config,
        }
    }
}

fn load(cli: &Cli) -> Result<Experiment> {
    let mut cfg = ExperimentConfig::from_path(cli.command.config())?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.outputs.dir = out.clone();
    }
    if let Some(tol) = cli.tol_rank {
        cfg.tolerances.rank = tol;
    }
    if let Some(tol) = cli.tol_kernel {
        cfg.tolerances.kernel = tol;
    }
    cfg.build()
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let exp = load(cli)?;
    match &cli.command {
        Command::CheckObservability { .. } => print_json(&run_observability_report(&exp)?)?,
        Command::CheckAbscont { .. } => print_json(&run_abscont_report(&exp)?)?,
        Command::Simulate { path, .. } => {
            let pair = simulate_pair(
                &exp.model,
                &exp.rho_true,
                &exp.rho_filter,
                &exp.grid,
                SeedSpec::new(exp.master_seed, *path),
            )?;
            let file = exp.out_dir.join("trajectory.csv");
            write_trajectory_csv(&pair, &exp.observables, exp.grid.stride(), &file)?;
            info!("wrote {}", file.display());
        }
        Command::Charfn { .. } => {
            let rows = run_charfn_check(&exp)?;
            let file = exp.out_dir.join("charfn.csv");
            write_charfn_csv(&rows, &file)?;
            info!("wrote {}", file.display());
            let failed = rows.iter().filter(|r| !r.passes()).count();
            if failed > 0 {
                error!(
                    "{failed} of {} characteristic-function checks exceed the z-score limit",
                    rows.len()
                );
                return Ok(3);
            }
        }
        Command::Stability { .. } => {
            let report = run_stability(&exp)?;
            let file = exp.out_dir.join("stability.csv");
            write_stability_csv(&report, &file)?;
            write_json(&report.metadata, &exp.out_dir.join("stability_meta.json"))?;
            info!(
                "wrote {} ({} paths completed, {} aborted)",
                file.display(),
                report.metadata.completed_paths,
                report.metadata.aborted_paths
            );
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

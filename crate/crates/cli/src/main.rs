use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hamred::config::ExperimentConfig;
use hamred::pipeline;
use hamred::psd::Method;
use hamred::Error;

/// Structure-preserving model order reduction for Hamiltonian systems.
#[derive(Parser)]
#[command(name = "hamred", version)]
struct Cli {
    /// Experiment config (TOML, `config_version = 1`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full-order trajectories, snapshot file and energy CSV.
    Fom,
    /// Basis from the stored snapshots (greedy integrates on demand).
    Basis {
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Reduced simulation with a stored basis and diagnostics CSVs.
    Rom {
        #[arg(long)]
        basis: PathBuf,
        /// POD-Galerkin reduction instead of the structure-preserving one.
        #[arg(long)]
        pod: bool,
    },
    /// Offline/online comparison table over several methods.
    Compare {
        /// Comma-separated methods.
        #[arg(long, value_delimiter = ',', default_value = "pod,cotangent,complexsvd,svdlike,greedy")]
        methods: Vec<String>,
    },
    /// Dynamical low-rank run with structure-drift series.
    Dlr,
}

fn run(cli: Cli) -> hamred::Result<()> {
    let path = cli.config.ok_or_else(|| Error::Config {
        field: "--config".into(),
        message: "missing config path".into(),
    })?;
    let cfg = ExperimentConfig::load(&path).map_err(|e| match e {
        Error::Io(io) => Error::Config {
            field: "--config".into(),
            message: format!("{}: {io}", path.display()),
        },
        other => other,
    })?;
    match cli.command {
        Command::Fom => {
            let s = pipeline::run_fom(&cfg)?;
            println!(
                "wrote {} trajectories; max relative energy drift {:.3e}",
                s.trajectories.len(),
                s.max_energy_drift
            );
        }
        Command::Basis { method, k } => {
            let method = Method::parse(method.as_deref().unwrap_or(&cfg.basis.method))?;
            let s = pipeline::run_basis(&cfg, method, k.unwrap_or(cfg.basis.k))?;
            println!(
                "wrote {} ({}×{}); projection error {:.6e}",
                s.path.display(),
                s.row.rows,
                s.row.cols,
                s.row.projection_error
            );
        }
        Command::Rom { basis, pod } => {
            let s = pipeline::run_rom(&cfg, &basis, pod)?;
            for (mu, r) in s.samples.iter().zip(&s.records) {
                println!(
                    "mu = {mu:?}: max state error {:.3e}, max gap deviation {:.3e}",
                    r.max_state_error(),
                    r.max_gap_deviation()
                );
            }
        }
        Command::Compare { methods } => {
            let methods = methods.iter().map(|m| Method::parse(m.trim())).collect::<hamred::Result<Vec<_>>>()?;
            for r in pipeline::run_compare(&cfg, &methods)? {
                println!(
                    "{:<10} k={:<3} offline {:.3}s online {:.3}s state err {:.3e} H drift {:.3e}",
                    r.method.name(),
                    r.k,
                    r.offline_seconds,
                    r.online_seconds,
                    r.max_state_error,
                    r.max_h_drift
                );
            }
        }
        Command::Dlr => {
            let s = pipeline::run_dlr(&cfg)?;
            println!(
                "max symplecticity {:.3e}, max orthonormality {:.3e}, max state error {:.3e}",
                s.max_symplecticity, s.max_orthonormality, s.max_state_error
            );
        }
    }
    Ok(())
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("HAMRED_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("HAMRED_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

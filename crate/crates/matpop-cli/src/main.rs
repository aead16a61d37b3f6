//! `matpop` — simulate and verify the two-phase maturity-structured cell
//! population model.
//!
//! Exit codes: 0 success, 2 model hypothesis violations (bad parameters),
//! 1 anything else (including failed verification assertions).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use matpop_cli::commands;
use matpop_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "matpop", version, about = "Two-phase maturity-structured population model: simulation, analysis, verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full field simulation and write fields.csv, immature.csv,
    /// initial.csv and meta.json.
    Simulate {
        /// Configuration file (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's output.dir; the
        /// MATPOP_OUT environment variable overrides both).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every stability criterion and write stability.json.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named verification suite (or `all`).
    Verify {
        /// closed-forms | stability | instability | unbounded |
        /// dependence | extinction | all
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Run the twin-dependence or extinction experiment of the config's
    /// [experiment] section.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fan the [sweep] runs out over a worker pool.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Dump the characteristic tables (m, h, theta, delta, xi_bar, pi_bar)
    /// on the configured grid as CSV.
    DumpTables {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            // model hypothesis violations are configuration errors
            let is_hypothesis = err
                .chain()
                .any(|c| matches!(c.downcast_ref::<matpop::Error>(), Some(matpop::Error::HypothesisViolation { .. })));
            if is_hypothesis {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = RunConfig::from_path(&config)?;
            let base = config.parent().unwrap_or(std::path::Path::new("."));
            let out_dir = commands::resolve_out_dir(&cfg, out.as_deref());
            commands::cmd_simulate(&cfg, base, &out_dir)?;
            println!("wrote {}", out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { config, out } => {
            let cfg = RunConfig::from_path(&config)?;
            let out_dir = commands::resolve_out_dir(&cfg, out.as_deref());
            commands::cmd_analyze(&cfg, &out_dir)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite } => {
            let ok = commands::cmd_verify(&suite)?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Experiment { config, out } => {
            let cfg = RunConfig::from_path(&config)?;
            let base = config.parent().unwrap_or(std::path::Path::new("."));
            let out_dir = commands::resolve_out_dir(&cfg, out.as_deref());
            commands::cmd_experiment(&cfg, base, &out_dir)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            out,
            workers,
        } => {
            let cfg = RunConfig::from_path(&config)?;
            let base = config.parent().unwrap_or(std::path::Path::new("."));
            let out_dir = commands::resolve_out_dir(&cfg, out.as_deref());
            commands::cmd_sweep(&cfg, base, &out_dir, workers)?;
            println!("wrote {}", out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::DumpTables { config, out } => {
            let cfg = RunConfig::from_path(&config)?;
            let out_dir = commands::resolve_out_dir(&cfg, out.as_deref());
            commands::cmd_dump_tables(&cfg, &out_dir)?;
            println!("wrote {}", out_dir.join("tables.csv").display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bouss1d_cli::config::CHECK_NAMES;
use bouss1d_cli::oracles::execute_oracles;
use bouss1d_cli::run::CheckStatus;
use bouss1d_cli::{execute_run, execute_sweep, output_dir, CliError, RunConfig, SweepConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bouss1d", version, about = "Lagrangian blow-up experiments for a 1D Boussinesq-type model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write frames.csv, summary.json (and profile.csv).
    Run {
        config: PathBuf,
        /// Output directory; overrides OUTPUT_DIR and [output] dir.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a (beta1, beta2) grid and write sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write the oracle curves of a run configuration as CSV.
    Oracles {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run and require every applicable check to pass (exit 4 otherwise).
    Check {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn run_command(config: &Path, out: Option<&Path>, require_all: bool) -> Result<i32, CliError> {
    let cfg = RunConfig::load(config)?;
    let mut run = cfg.resolve()?;
    if require_all {
        run.require = CHECK_NAMES.iter().map(|s| s.to_string()).collect();
    }
    let dir = output_dir(out, &run.output.dir);
    let (result, code) = execute_run(&run, &dir)?;
    let s = &result.summary;
    println!(
        "{}: cause {}, t = {}, T_est = {}, {} frames -> {}",
        s.classification.as_str(),
        s.cause,
        s.t_final,
        s.t_est.map_or("-".into(), |t| t.to_string()),
        s.frames,
        dir.display()
    );
    for (name, check) in s.checks.all() {
        if check.status != CheckStatus::NotApplicable {
            println!("  {name}: {:?} ({})", check.status, check.detail);
        }
    }
    match code {
        3 => eprintln!("numerical abort: {} ({})", s.reason, s.detail),
        4 => {
            for name in result.failures() {
                if run.require.iter().any(|r| r == name) {
                    eprintln!("check `{name}` failed: {}", s.checks.get(name).unwrap().detail);
                }
            }
        }
        _ => {}
    }
    Ok(code)
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { config, out } => run_command(&config, out.as_deref(), false),
        Command::Check { config, out } => run_command(&config, out.as_deref(), true),
        Command::Sweep { config, out } => {
            let cfg = SweepConfig::load(&config)?;
            let dir = output_dir(out.as_deref(), &cfg.output.dir);
            let cells = execute_sweep(&cfg, &dir)?;
            for c in &cells {
                if let Some(e) = &c.error {
                    eprintln!("cell ({}, {}) aborted: {e}", c.beta1, c.beta2);
                }
            }
            println!("{} cells -> {}", cells.len(), dir.join("sweep.csv").display());
            Ok(0)
        }
        Command::Oracles { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let run = cfg.resolve()?;
            let dir = output_dir(out.as_deref(), &run.output.dir);
            let s = execute_oracles(&run, &dir)?;
            println!("T_G = {} (quadrature), {} (ode) -> {}", s.t_g_quadrature, s.t_g_ode, dir.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use speedlimit::commands::{self, CliError};
use speedlimit::suite::{run_suite, Status, SuiteOptions, REFERENCE_GRID};

#[derive(Parser)]
#[command(
    name = "speedlimit",
    version,
    about = "Phase-space quantum, semiclassical and classical speed limits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a scenario and write report.csv and summary.json.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write fig1.csv: |dB/dt|, the Mandelstam-Tamm comparator and the
    /// closed-form classical velocity under both b'' conventions.
    Fig1 {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite; exits nonzero on any failure.
    Validate {
        /// Nodes per axis; tolerances widen on coarser grids.
        #[arg(long, default_value_t = REFERENCE_GRID as u32, value_parser = clap::value_parser!(u32).range(32..=2048))]
        grid: u32,
        /// Compare against the published velocity formula with b'' = omega0^2.
        #[arg(long)]
        paper_bddot: bool,
    },
    /// Render a CSV as a simple SVG line chart.
    Plot { csv: PathBuf, svg: PathBuf },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SPEEDLIMIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Usage(format!(
            "SPEEDLIMIT_THREADS must be an integer, got {raw:?}"
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Run { config, out } => {
            for p in commands::run(&config, out.as_deref())? {
                println!("wrote {}", p.display());
            }
        }
        Command::Fig1 { config, out } => {
            let p = commands::fig1(&config, out.as_deref())?;
            println!("wrote {}", p.display());
        }
        Command::Validate { grid, paper_bddot } => {
            let opts = SuiteOptions {
                grid: grid as usize,
                paper_bddot,
            };
            let started = std::time::Instant::now();
            let checks = run_suite(opts, &mut |c| println!("{}", c.line()));
            let failed = checks.iter().filter(|c| c.status == Status::Fail).count();
            let passed = checks.iter().filter(|c| c.status == Status::Pass).count();
            println!(
                "{passed} passed, {failed} failed ({} x {} grid, {:.1} s)",
                grid,
                grid,
                started.elapsed().as_secs_f64()
            );
            if failed > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Plot { csv, svg } => {
            commands::plot(&csv, &svg)?;
            println!("wrote {}", svg.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

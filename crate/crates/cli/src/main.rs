use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subsuper_cli::{cmd_admissible, cmd_solve, cmd_sweep, Overrides};

#[derive(Parser)]
#[command(name = "subsuper", version, about = "Sub- and supersolution pipeline for singular quasilinear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Grid {
    /// Number of cells
    #[arg(long)]
    cells: Option<usize>,
    /// Geometric grading ratio toward the boundary
    #[arg(long)]
    grading: Option<f64>,
    /// Boundary layer width
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Fixed-point increment tolerance
    #[arg(long)]
    tol: Option<f64>,
}

impl Grid {
    fn overrides(&self) -> Overrides {
        Overrides {
            cells: self.cells,
            grading: self.grading,
            delta: self.delta,
            seed: self.seed,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the exponent conditions
    Admissible {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate barriers, iterate and verify
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        grid: Grid,
    },
    /// Run a parameter sweep, e.g. --sweep "eta1=0:0.5:6;alpha1=-0.2,0"
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sweep: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[command(flatten)]
        grid: Grid,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut stdout = std::io::stdout();
    let code = match &cli.command {
        Command::Admissible { config, out } => cmd_admissible(config, out.as_deref(), &mut stdout),
        Command::Solve { config, out, grid } => cmd_solve(config, &grid.overrides(), out, &mut stdout),
        Command::Sweep { config, sweep, out, parallel, grid } => {
            cmd_sweep(config, sweep, &grid.overrides(), out, *parallel, &mut stdout)
        }
    };
    ExitCode::from(code as u8)
}

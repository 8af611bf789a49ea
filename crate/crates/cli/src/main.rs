use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nsoc_cli::config::{parse_config, TaskKind};
use nsoc_cli::run::run;

/// Solve, optimize, and verify nonsmooth semilinear elliptic optimal
/// control problems on rectangular grids.
#[derive(Parser)]
#[command(name = "nsoc", version, about)]
struct Cli {
    #[command(subcommand)]
    task: Task,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Task {
    /// Solve the state equation for a given control pair.
    SolveState(Common),
    /// Projected gradient descent over the admissible set.
    Optimize(Common),
    /// Stationarity checks at a candidate control.
    Verify(Common),
    /// Convergence of Gâteaux derivatives along perturbed controls.
    BouligandLimit(Common),
    /// Second-order limit-set characterization check.
    WsetLimit(Common),
    /// Manufactured-solution grid-refinement study.
    ConvergenceStudy(Common),
}

impl Task {
    fn split(&self) -> (TaskKind, &Common) {
        match self {
            Task::SolveState(c) => (TaskKind::SolveState, c),
            Task::Optimize(c) => (TaskKind::Optimize, c),
            Task::Verify(c) => (TaskKind::Verify, c),
            Task::BouligandLimit(c) => (TaskKind::BouligandLimit, c),
            Task::WsetLimit(c) => (TaskKind::WsetLimit, c),
            Task::ConvergenceStudy(c) => (TaskKind::ConvergenceStudy, c),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = cli.task.split();

    let cfg = match parse_config(&common.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if cfg.task != kind {
        eprintln!(
            "error: config declares task '{}' but the '{}' subcommand was invoked",
            cfg.task.name(),
            kind.name()
        );
        return ExitCode::from(1);
    }

    match run(&cfg, common.out.clone(), common.seed) {
        Ok(outcome) => {
            println!("report: {}", outcome.report_path.display());
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

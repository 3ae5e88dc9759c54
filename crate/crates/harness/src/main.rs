use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boxed_bandit::allocation;
use boxed_bandit::bbsea;
use boxed_bandit_harness::report::{self, fmt_sig};
use boxed_bandit_harness::{load_config, run_experiment, ConfigError, ExperimentConfig};
use clap::{Parser, Subcommand};

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_CAPPED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "boxed-bandit",
    version,
    about = "Best arm identification with boxed bandits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured Monte Carlo experiment.
    Run {
        config: PathBuf,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: `output` from the config, else `results`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the characteristic time and an optimal allocation.
    Solve { config: PathBuf },
    /// Print the successive-elimination bounds over the delta grid.
    Bounds { config: PathBuf },
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    load_config(path).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            ConfigError::Io { .. } => ExitCode::from(EXIT_FAILURE),
            _ => ExitCode::from(EXIT_INVALID),
        }
    })
}

fn run(config_path: &Path, workers: Option<usize>, out: Option<PathBuf>) -> Result<(), ExitCode> {
    let config = load(config_path)?;
    let workers = workers
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1);
    let output = run_experiment(&config, workers).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_FAILURE)
    })?;
    print!("{}", report::summary_table(&output.rows));
    let dir = out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let written = report::write_outputs(&dir, &output).map_err(|e| {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        ExitCode::from(EXIT_FAILURE)
    })?;
    for path in written {
        println!("wrote {}", path.display());
    }
    let capped = output.capped_trials();
    if capped > 0 {
        eprintln!("{capped} trial(s) reached max_steps = {}", config.max_steps);
        return Err(ExitCode::from(EXIT_CAPPED));
    }
    Ok(())
}

fn solve(config_path: &Path) -> Result<(), ExitCode> {
    let config = load(config_path)?;
    let s = allocation::solve(&config.instance, 1e-10).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_FAILURE)
    })?;
    let w: Vec<String> = s.w_star.as_slice().iter().map(|&x| fmt_sig(x)).collect();
    println!("t_star = {}", fmt_sig(s.t_star));
    println!("upper_bound = {}", fmt_sig(s.upper_bound));
    println!("w_star = [{}]", w.join(", "));
    if s.degenerate {
        println!("degenerate: psi vanishes on the whole simplex");
    }
    Ok(())
}

fn bounds(config_path: &Path) -> Result<(), ExitCode> {
    let config = load(config_path)?;
    println!("delta,sum_beta,lower_bound,ratio");
    for &delta in &config.delta_grid {
        let r = bbsea::order_check(&config.instance, delta).map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        })?;
        println!(
            "{},{},{},{}",
            fmt_sig(delta),
            fmt_sig(r.bounds.upper_bound),
            fmt_sig(r.bounds.lower_bound),
            fmt_sig(r.ratio)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            workers,
            out,
        } => run(&config, workers, out),
        Command::Solve { config } => solve(&config),
        Command::Bounds { config } => bounds(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use cea_fim::experiment::{cmd_generate, cmd_run, cmd_sweep_lambda, Overrides};
use cea_fim::{FimError, Result};
use clap::{Parser, Subcommand};

/// Fair influence maximization experiments.
#[derive(Debug, Parser)]
#[command(name = "cea-fim", version)]
struct Cli {
    /// Master seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Live-edge samples per ensemble, overriding the config file.
    #[arg(long, global = true)]
    delta: Option<usize>,
    /// Report algorithm-only wall-clock time, without setup.
    #[arg(long, global = true)]
    split_timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write `<prefix>.edges` and `<prefix>.groups` from an SBM spec.
    Generate { spec: PathBuf, prefix: PathBuf },
    /// Compare the configured algorithms.
    Run { config: PathBuf },
    /// Run the community-based search for each configured λ.
    SweepLambda { config: PathBuf },
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("FIM_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| FimError::Validation(format!("FIM_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| FimError::Invariant(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
        delta: cli.delta,
        split_timings: cli.split_timings,
    };
    match cli.command {
        Command::Generate { spec, prefix } => {
            let (edges, groups) = cmd_generate(&spec, &prefix)?;
            println!("{}\n{}", edges.display(), groups.display());
        }
        Command::Run { config } => {
            let results = cmd_run(&config, &overrides)?;
            println!("algorithm,mean_influence,mean_mf,mean_dcv,mean_f,mean_pof");
            for s in &results.summary {
                println!(
                    "{},{:.4},{:.4},{:.4},{:.4},{:.4}",
                    s.algorithm.name(),
                    s.mean_influence,
                    s.mean_mf,
                    s.mean_dcv,
                    s.mean_f,
                    s.mean_pof
                );
            }
        }
        Command::SweepLambda { config } => {
            let results = cmd_sweep_lambda(&config, &overrides)?;
            println!("lambda,mean_mf,mean_dcv,mean_pof,mean_f");
            for r in &results.rows {
                println!("{},{:.4},{:.4},{:.4},{:.4}", r.lambda, r.mean_mf, r.mean_dcv, r.mean_pof, r.mean_f);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rulforge::cli::{cmd_analyze, cmd_compare, cmd_evaluate, cmd_prepare, cmd_train, CliError, Context};

#[derive(Parser)]
#[command(name = "rulforge", version, about = "Remaining-useful-life estimation on CMAPSS data")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seed, overriding the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, clean and window the dataset.
    Prepare(Common),
    /// Write exploratory CSV tables under `analysis/`.
    Analyze(Common),
    /// Train the configured model.
    Train(Common),
    /// Score a trained model on the test windows.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model file; defaults to `model.bin` in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train and score the full model roster.
    Compare(Common),
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("RULFORGE_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Config(format!("RULFORGE_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(args: Args) -> Result<(), CliError> {
    init_threads()?;
    let ctx = |c: Common| Context::load(&c.config, c.out, c.seed);
    match args.command {
        Command::Prepare(c) => {
            let m = cmd_prepare(&ctx(c)?)?;
            println!("prepare: wrote {} files", m.artifacts.len());
        }
        Command::Analyze(c) => {
            let m = cmd_analyze(&ctx(c)?)?;
            println!("analyze: wrote {} files", m.artifacts.len());
        }
        Command::Train(c) => {
            let m = cmd_train(&ctx(c)?)?;
            println!("train: wrote {} files", m.artifacts.len());
        }
        Command::Evaluate { common, model } => {
            for r in cmd_evaluate(&ctx(common)?, model.as_deref())? {
                println!(
                    "{} {}: rmse {:.4} r2 {:.4} nasa {:.4} (n = {})",
                    r.model,
                    r.mode.as_str(),
                    r.rmse,
                    r.r2,
                    r.nasa_score,
                    r.n
                );
            }
        }
        Command::Compare(c) => {
            let t = cmd_compare(&ctx(c)?)?;
            for r in &t.rows {
                match (&r.error, &r.last_cycle) {
                    (None, Some(s)) => println!("{:<15} last-cycle rmse {:.4} r2 {:.4}", r.model, s.rmse, s.r2),
                    (err, _) => println!("{:<15} failed: {}", r.model, err.as_deref().unwrap_or("")),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

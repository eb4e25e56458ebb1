use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use slope_core::harness::{banner, run, Command, ExperimentConfig, Preset, SEED_ENV};

/// Reproducible SLOPE experiments: prox separability, state evolution versus
/// Monte Carlo, and oracle regularization design against LASSO/BHq.
#[derive(Parser)]
#[command(name = "slope-harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML experiment configuration
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
    /// overrides SLOPE_SEED and the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV destination; companion tables are written next to it (default: stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Gap between the finite-p prox and its limiting scalar function
    ProxCheck,
    /// State-evolution MSE against SLOPE fits
    SeVsEmpirical,
    /// Optimal design against tuned LASSO and BHq over the sweep grid
    DesignCompare,
    /// Power and FDP of the max-power design (and BHq) across type-I levels
    FdrCurve,
    /// Solve one design and export η*, λ* and a summary row
    DesignSolve,
}

#[derive(ValueEnum, Clone, Copy)]
enum PresetArg {
    Fig2,
    Fig3,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn real_main(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let command = match cli.command {
        Cmd::ProxCheck => Command::ProxCheck,
        Cmd::SeVsEmpirical => Command::SeVsEmpirical,
        Cmd::DesignCompare => Command::DesignCompare,
        Cmd::FdrCurve => Command::FdrCurve,
        Cmd::DesignSolve => Command::DesignSolve,
    };
    let config = match (&cli.config, cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(PresetArg::Fig2)) => ExperimentConfig::preset(Preset::Fig2),
        (None, Some(PresetArg::Fig3)) | (None, None) => ExperimentConfig::preset(Preset::Fig3),
    };
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(v) => Some(v.parse::<u64>().map_err(|e| format!("{SEED_ENV}={v}: {e}"))?),
        Err(_) => None,
    };
    let (config, source) = match (cli.seed, env_seed) {
        (Some(s), _) => (config.with_seed(s), "--seed".to_string()),
        (None, Some(s)) => (config.with_seed(s), SEED_ENV.to_string()),
        (None, None) => (config, "config".to_string()),
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    eprintln!("{}", banner(command, &config, &source));
    let out = cli.out.or_else(|| config.output.clone());
    let report = run(command, &config)?;
    for path in report.write(out.as_deref())? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

//! Reproducible experiment runner behind the `slope-harness` binary.
//!
//! Every command turns a validated [`ExperimentConfig`] into CSV tables. Monte
//! Carlo trials run on the rayon pool but are seeded per trial index and
//! gathered in order, so output depends only on the configuration and seed.

mod commands;
mod config;
mod table;
mod trials;

use std::path::{Path, PathBuf};

pub use config::{
    BaselineBlock, DesignBlock, ExperimentConfig, FamilyName, ModeName, Preset, PriorBlock, ProxBlock, SweepBlock,
};
pub use table::CsvTable;
pub use trials::{run_trials, Stat, TrialSummary};

use crate::{Error, Result};

pub const SEED_ENV: &str = "SLOPE_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    ProxCheck,
    SeVsEmpirical,
    DesignCompare,
    FdrCurve,
    DesignSolve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ProxCheck => "prox-check",
            Command::SeVsEmpirical => "se-vs-empirical",
            Command::DesignCompare => "design-compare",
            Command::FdrCurve => "fdr-curve",
            Command::DesignSolve => "design-solve",
        }
    }
}

/// Output of one command: a main table plus named companion tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: Command,
    pub comment: String,
    pub main: CsvTable,
    pub companions: Vec<(&'static str, CsvTable)>,
}

/// `runs/out.csv` + `eta` → `runs/out.eta.csv`.
pub fn companion_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

impl Report {
    pub fn render(&self) -> String {
        self.main.render(&self.comment)
    }

    /// Writes the main table to `out` (stdout if `None`) and companions next
    /// to it. Returns the companion paths written.
    pub fn write(&self, out: Option<&Path>) -> Result<Vec<PathBuf>> {
        let io = |e: std::io::Error, p: &Path| Error::Io(format!("{}: {e}", p.display()));
        let Some(out) = out else {
            print!("{}", self.render());
            return Ok(Vec::new());
        };
        std::fs::write(out, self.render()).map_err(|e| io(e, out))?;
        let mut written = Vec::new();
        for (suffix, table) in &self.companions {
            let path = companion_path(out, suffix);
            std::fs::write(&path, table.render(&self.comment)).map_err(|e| io(e, &path))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Runs `command` with the seed already resolved into `config.sweep.seed`.
pub fn run(command: Command, config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let (main, companions) = match command {
        Command::ProxCheck => commands::prox_check(config)?,
        Command::SeVsEmpirical => commands::se_vs_empirical(config)?,
        Command::DesignCompare => commands::design_compare(config)?,
        Command::FdrCurve => commands::fdr_curve(config)?,
        Command::DesignSolve => commands::design_solve(config)?,
    };
    Ok(Report {
        command,
        comment: format!(
            "config_hash={} seed={} command={}",
            config.hash(),
            config.sweep.seed,
            command.name()
        ),
        main,
        companions,
    })
}

/// Run banner: command, seed and where it came from, then the resolved config.
pub fn banner(command: Command, config: &ExperimentConfig, seed_source: &str) -> String {
    format!(
        "slope-harness {} | config {} ({}) | seed {} from {}\n--- resolved config ---\n{}---",
        command.name(),
        config.name,
        config.hash(),
        config.sweep.seed,
        seed_source,
        config.to_toml()
    )
}

//! Experiment configuration: TOML with every block validated up front.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::design::{BaselineFamily, DesignMode};
use crate::distributions::{Atom, GaussianComponent, PriorSpec, QuantileTable};
use crate::{Error, Result};

const FIG2: &str = include_str!("../../presets/fig2.toml");
const FIG3: &str = include_str!("../../presets/fig3.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig2,
    Fig3,
}

impl Preset {
    pub fn source(self) -> &'static str {
        match self {
            Preset::Fig2 => FIG2,
            Preset::Fig3 => FIG3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub prior: PriorBlock,
    #[serde(default)]
    pub design: DesignBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub baselines: BaselineBlock,
    #[serde(default)]
    pub prox: ProxBlock,
    /// default output path when `--out` is absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorBlock {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub gaussians: Vec<GaussianComponent>,
    pub noise_sd: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    MinMse,
    MaxPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBlock {
    #[serde(default = "DesignBlock::default_mode")]
    pub mode: ModeName,
    #[serde(default = "DesignBlock::default_alpha")]
    pub alpha: f64,
    /// type-I levels swept by `fdr-curve`
    #[serde(default = "DesignBlock::default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "DesignBlock::default_grid")]
    pub grid_size: usize,
    #[serde(default = "DesignBlock::default_lambda_samples")]
    pub lambda_samples: usize,
}

impl DesignBlock {
    fn default_mode() -> ModeName {
        ModeName::MinMse
    }
    fn default_alpha() -> f64 {
        0.1
    }
    fn default_alphas() -> Vec<f64> {
        vec![0.0, 0.05, 0.1, 0.2]
    }
    fn default_grid() -> usize {
        crate::design::DEFAULT_GRID_SIZE
    }
    fn default_lambda_samples() -> usize {
        crate::design::DEFAULT_LAMBDA_SAMPLES
    }

    pub fn mode(&self) -> DesignMode {
        match self.mode {
            ModeName::MinMse => DesignMode::MinMse,
            ModeName::MaxPower => DesignMode::MaxPower { alpha: self.alpha },
        }
    }
}

impl Default for DesignBlock {
    fn default() -> Self {
        Self {
            mode: Self::default_mode(),
            alpha: Self::default_alpha(),
            alphas: Self::default_alphas(),
            grid_size: Self::default_grid(),
            lambda_samples: Self::default_lambda_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// SNR = E[β²]/σ_w²; with `rho` this replaces the prior's signal part
    #[serde(default)]
    pub snr: Vec<f64>,
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default = "SweepBlock::default_p")]
    pub p: usize,
    #[serde(default = "SweepBlock::default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "SweepBlock::default_lasso")]
    pub lasso_lambdas: Vec<f64>,
    #[serde(default)]
    pub bhq_scales: Vec<f64>,
}

impl SweepBlock {
    fn default_p() -> usize {
        1024
    }
    fn default_trials() -> usize {
        20
    }
    fn default_lasso() -> Vec<f64> {
        vec![1.0]
    }
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            snr: Vec::new(),
            rho: Vec::new(),
            p: Self::default_p(),
            trials: Self::default_trials(),
            seed: 0,
            lasso_lambdas: Self::default_lasso(),
            bhq_scales: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Lasso,
    Bhq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineBlock {
    #[serde(default = "BaselineBlock::default_families")]
    pub families: Vec<FamilyName>,
    #[serde(default = "BaselineBlock::default_q")]
    pub bhq_q: f64,
    /// tuning grid size
    #[serde(default = "BaselineBlock::default_grid")]
    pub grid: usize,
}

impl BaselineBlock {
    fn default_families() -> Vec<FamilyName> {
        vec![FamilyName::Lasso, FamilyName::Bhq]
    }
    fn default_q() -> f64 {
        0.1
    }
    fn default_grid() -> usize {
        64
    }

    pub fn has(&self, family: FamilyName) -> bool {
        self.families.contains(&family)
    }

    pub fn bhq(&self) -> BaselineFamily {
        BaselineFamily::Bhq { q: self.bhq_q }
    }
}

impl Default for BaselineBlock {
    fn default() -> Self {
        Self {
            families: Self::default_families(),
            bhq_q: Self::default_q(),
            grid: Self::default_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxBlock {
    #[serde(default = "ProxBlock::default_atoms")]
    pub lambda_atoms: Vec<Atom>,
    #[serde(default = "ProxBlock::default_p")]
    pub p: Vec<usize>,
    #[serde(default = "ProxBlock::default_seeds")]
    pub seeds: usize,
    #[serde(default = "ProxBlock::default_fraction")]
    pub sample_fraction: f64,
    /// regular-sequence length behind the limiting η
    #[serde(default = "ProxBlock::default_eta_grid")]
    pub eta_grid: usize,
}

impl ProxBlock {
    fn default_atoms() -> Vec<Atom> {
        vec![Atom { location: 0.2, mass: 0.5 }, Atom { location: 1.0, mass: 0.5 }]
    }
    fn default_p() -> Vec<usize> {
        vec![256, 1024, 4096]
    }
    fn default_seeds() -> usize {
        10
    }
    fn default_fraction() -> f64 {
        0.03
    }
    fn default_eta_grid() -> usize {
        1 << 14
    }

    pub fn lambda_table(&self) -> Result<QuantileTable> {
        let atoms: Vec<(f64, f64)> = self.lambda_atoms.iter().map(|a| (a.location, a.mass)).collect();
        QuantileTable::from_atoms(&atoms)
    }
}

impl Default for ProxBlock {
    fn default() -> Self {
        Self {
            lambda_atoms: Self::default_atoms(),
            p: Self::default_p(),
            seeds: Self::default_seeds(),
            sample_fraction: Self::default_fraction(),
            eta_grid: Self::default_eta_grid(),
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => bad(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn preset(preset: Preset) -> Self {
        Self::parse(preset.source()).expect("bundled preset is valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.base_prior()?;
        self.design.mode().validate()?;
        if self.design.grid_size < 16 {
            return Err(bad("design.grid_size must be >= 16"));
        }
        if self.design.lambda_samples < 2 {
            return Err(bad("design.lambda_samples must be >= 2"));
        }
        if self.design.alphas.iter().any(|&a| !(0.0..1.0).contains(&a)) {
            return Err(bad("design.alphas must lie in [0, 1)"));
        }
        let s = &self.sweep;
        if s.snr.is_empty() != s.rho.is_empty() {
            return Err(bad("sweep.snr and sweep.rho must be given together"));
        }
        if s.snr.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(bad("sweep.snr entries must be > 0"));
        }
        if s.rho.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(bad("sweep.rho entries must lie in (0, 1]"));
        }
        if s.p < 2 {
            return Err(bad("sweep.p must be >= 2"));
        }
        if s.lasso_lambdas.iter().chain(&s.bhq_scales).any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(bad("sweep.lasso_lambdas and sweep.bhq_scales must be finite and >= 0"));
        }
        let b = &self.baselines;
        if !(b.bhq_q > 0.0 && b.bhq_q <= 1.0) {
            return Err(bad("baselines.bhq_q must lie in (0, 1]"));
        }
        if b.grid < 2 {
            return Err(bad("baselines.grid must be >= 2"));
        }
        let x = &self.prox;
        x.lambda_table()?;
        if x.p.contains(&0) {
            return Err(bad("prox.p entries must be >= 1"));
        }
        if !(0.0..=1.0).contains(&x.sample_fraction) {
            return Err(bad("prox.sample_fraction must lie in [0, 1]"));
        }
        if x.eta_grid < 16 {
            return Err(bad("prox.eta_grid must be >= 16"));
        }
        Ok(())
    }

    pub fn base_prior(&self) -> Result<PriorSpec> {
        let p = &self.prior;
        PriorSpec::new(p.atoms.clone(), p.gaussians.clone(), p.noise_sd, p.delta)
    }

    /// `(snr, rho, prior)` for every sweep point; the base prior alone when no
    /// sweep grid is configured.
    pub fn sweep_priors(&self) -> Result<Vec<(f64, f64, PriorSpec)>> {
        let base = self.base_prior()?;
        if self.sweep.snr.is_empty() {
            return Ok(vec![(base.snr(), base.sparsity(), base)]);
        }
        let sw = base.noise_sd();
        let mut out = Vec::new();
        for &rho in &self.sweep.rho {
            for &snr in &self.sweep.snr {
                let prior = PriorSpec::sparse_point(rho, sw * (snr / rho).sqrt(), sw, base.delta())?;
                out.push((snr, rho, prior));
            }
        }
        Ok(out)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sweep.seed = seed;
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved configuration, first 16 hex digits.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

//! Constant (LASSO) and Benjamini–Hochberg style regularization families,
//! tuned by minimizing the state-evolution σ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{normal, PriorSpec, QuantileFunction, QuantileTable};
use crate::error::domain;
use crate::sorted_l1::RegularizationSequence;
use crate::state_evolution::{solve, SeOptions, StateEvolutionSolution};
use crate::{Error, Result};

/// Resolution of the tabulated BHq λ law.
const BHQ_TABLE: usize = 4096;

pub fn lasso_sequence(lambda0: f64, p: usize) -> Result<RegularizationSequence> {
    RegularizationSequence::constant(lambda0, p)
}

/// `scale·Φ⁻¹(1 − (p − i + 1)q/(2p))` for `i = 1..p`, clipped at zero.
pub fn bhq_sequence(q: f64, scale: f64, p: usize) -> Result<RegularizationSequence> {
    BhqLaw::new(q, scale)?;
    let pf = p as f64;
    let lambdas = (1..=p)
        .map(|i| scale * normal::inv_cdf(1.0 - (pf - i as f64 + 1.0) * q / (2.0 * pf)).max(0.0))
        .collect();
    RegularizationSequence::new(lambdas)
}

/// Continuum limit of the BHq sequence: `F⁻¹(u) = scale·Φ⁻¹(1 − q(1 − u)/2)⁺`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BhqLaw {
    q: f64,
    scale: f64,
}

impl BhqLaw {
    pub fn new(q: f64, scale: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0 || q == 1.0) {
            return Err(domain("q", format!("must lie in (0, 1], got {q}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(domain("scale", format!("must be > 0, got {scale}")));
        }
        Ok(Self { q, scale })
    }

    pub fn median(&self) -> f64 {
        self.quantile_at(0.5)
    }
}

impl QuantileFunction for BhqLaw {
    fn quantile_at(&self, u: f64) -> f64 {
        self.scale * normal::inv_cdf(1.0 - 0.5 * self.q * (1.0 - u)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineFamily {
    Lasso,
    Bhq { q: f64 },
}

impl BaselineFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineFamily::Lasso => "lasso",
            BaselineFamily::Bhq { .. } => "bhq",
        }
    }
}

/// λ law of a family member: the constant for LASSO, the scale for BHq.
pub fn baseline_table(family: BaselineFamily, param: f64) -> Result<QuantileTable> {
    match family {
        BaselineFamily::Lasso => QuantileTable::constant(param),
        BaselineFamily::Bhq { q } => QuantileTable::tabulate(&BhqLaw::new(q, param)?, BHQ_TABLE),
    }
}

/// Geometric grid whose typical λ (the median for BHq) spans `[0.02, 4]·σ_hi`.
pub fn parameter_grid(prior: &PriorSpec, family: BaselineFamily, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(domain("grid", "need at least two points"));
    }
    let (_, hi) = prior.sigma_bracket();
    let norm = match family {
        BaselineFamily::Lasso => 1.0,
        BaselineFamily::Bhq { q } => BhqLaw::new(q, 1.0)?.median(),
    };
    let (a, b) = (0.02 * hi / norm, 4.0 * hi / norm);
    let ratio = (b / a).ln();
    Ok((0..points)
        .map(|i| a * (ratio * i as f64 / (points - 1) as f64).exp())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineFit {
    pub family: BaselineFamily,
    pub param: f64,
    pub sigma: f64,
    pub tau: f64,
    /// E[(η(Y) − B)²] at the tuned parameter
    pub mse: f64,
    /// grid points where state evolution had no solution
    pub infeasible: usize,
    #[serde(skip)]
    pub solution: StateEvolutionSolution,
}

/// Grid search minimizing the state-evolution σ over the family parameter.
pub fn tune_baseline(prior: &PriorSpec, family: BaselineFamily, grid: usize) -> Result<BaselineFit> {
    let params = parameter_grid(prior, family, grid)?;
    tune_on(prior, family, &params)
}

pub(crate) fn tune_on(prior: &PriorSpec, family: BaselineFamily, params: &[f64]) -> Result<BaselineFit> {
    let opts = SeOptions::default();
    let fits: Vec<Option<StateEvolutionSolution>> = params
        .par_iter()
        .map(|&param| {
            let table = baseline_table(family, param).ok()?;
            solve(prior, &table, &opts).ok().filter(|s| s.converged)
        })
        .collect();
    let infeasible = fits.iter().filter(|f| f.is_none()).count();
    let (param, solution) = params
        .iter()
        .zip(fits)
        .filter_map(|(&p, f)| f.map(|s| (p, s)))
        .min_by(|a, b| a.1.sigma.total_cmp(&b.1.sigma))
        .ok_or(Error::NoFeasibleBaseline)?;
    Ok(BaselineFit {
        family,
        param,
        sigma: solution.sigma,
        tau: solution.tau,
        mse: solution.mse,
        infeasible,
        solution,
    })
}

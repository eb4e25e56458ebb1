//! Oracle-optimal regularization design and the LASSO/BHq baselines.
//!
//! For each σ the inner problem gives `L(σ)`, the least risk any η ∈ M with
//! `E[η′] ≤ δ` can reach. The smallest σ with `L(σ) = δ(σ² − σ_w²)` is the
//! best achievable noise level; the λ distribution realizing it follows from
//! the optimal η through `λ* ~ (|Y| − η*(|Y|))/τ_min`.

mod baselines;
mod inner;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{PriorSpec, QuantileTable};
use crate::error::domain;
use crate::limiting_scalar::ScalarFunction;
use crate::roots::brent;
use crate::state_evolution::{predicted_metrics, MetricsPrediction};
use crate::{Error, Result};

pub use baselines::{
    baseline_table, bhq_sequence, lasso_sequence, parameter_grid, tune_baseline, BaselineFamily, BaselineFit, BhqLaw,
};
pub use inner::{solve_inner, DesignMode, InnerProblem, InnerSolution};

pub const DEFAULT_GRID_SIZE: usize = 2048;
pub const DEFAULT_SCAN_POINTS: usize = 24;
pub const DEFAULT_LAMBDA_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub prior: PriorSpec,
    pub mode: DesignMode,
    pub grid_size: usize,
    pub sigma_bracket: (f64, f64),
    /// σ values probed before the root is polished
    pub scan_points: usize,
    /// size of the stratified |Y| sample behind the λ* table
    pub lambda_samples: usize,
}

impl DesignProblem {
    pub fn new(prior: PriorSpec, mode: DesignMode) -> Self {
        let sigma_bracket = prior.sigma_bracket();
        Self {
            prior,
            mode,
            grid_size: DEFAULT_GRID_SIZE,
            sigma_bracket,
            scan_points: DEFAULT_SCAN_POINTS,
            lambda_samples: DEFAULT_LAMBDA_SAMPLES,
        }
    }

    pub fn with_grid_size(mut self, grid_size: usize) -> Self {
        self.grid_size = grid_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.mode.validate()?;
        let (lo, hi) = self.sigma_bracket;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(domain("sigma_bracket", format!("need 0 < lo ≤ hi, got ({lo}, {hi})")));
        }
        if self.grid_size < 2 {
            return Err(domain("grid_size", "need at least two cells"));
        }
        if self.scan_points < 2 {
            return Err(domain("scan_points", "need at least two"));
        }
        if self.lambda_samples < 2 {
            return Err(domain("lambda_samples", "need at least two"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectivePoint {
    pub sigma: f64,
    /// L(σ)
    pub objective: f64,
    /// L(σ) − δ(σ² − σ_w²)
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignResult {
    pub mode: DesignMode,
    pub eta_star: ScalarFunction,
    pub sigma_min: f64,
    pub tau_min: f64,
    pub lambda_star: QuantileTable,
    pub objective_trace: Vec<ObjectivePoint>,
    /// approximate locations of every sign change seen on the scan
    pub crossings: Vec<f64>,
    /// no root inside the bracket; σ_min is the upper end with η ≡ 0
    pub boundary: bool,
    pub predicted: MetricsPrediction,
    pub budget_multiplier: f64,
}

impl DesignResult {
    pub fn write_eta_table<W: Write>(&self, out: W) -> std::io::Result<()> {
        self.eta_star.write_table(out)
    }

    pub fn write_lambda_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "u,lambda")?;
        for (u, l) in self.lambda_star.grid().iter().zip(self.lambda_star.values()) {
            writeln!(out, "{u},{l}")?;
        }
        Ok(())
    }

    pub const SUMMARY_HEADER: &'static str = "mode,alpha,sigma_min,tau_min,mse,type_i,power,fdr,mean_derivative,boundary";

    pub fn summary_row(&self) -> String {
        let (mode, alpha) = match self.mode {
            DesignMode::MinMse => ("min_mse", String::new()),
            DesignMode::MaxPower { alpha } => ("max_power", alpha.to_string()),
        };
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{mode},{alpha},{},{},{},{},{},{},{},{}",
            self.sigma_min,
            self.tau_min,
            self.predicted.mse,
            self.predicted.type_i,
            opt(self.predicted.power),
            opt(self.predicted.fdr),
            self.predicted.mean_derivative,
            self.boundary
        )
    }
}

fn converged_inner(problem: &DesignProblem, sigma: f64) -> Result<InnerSolution> {
    let sol = solve_inner(&problem.prior, sigma, problem.mode, problem.grid_size)?;
    if sol.converged {
        Ok(sol)
    } else {
        Err(Error::NoConvergence(format!("inner design problem at σ = {sigma}")))
    }
}

fn gap_at(problem: &DesignProblem, sigma: f64) -> Result<(InnerSolution, ObjectivePoint)> {
    let prior = &problem.prior;
    let sol = converged_inner(problem, sigma)?;
    let sw2 = prior.noise_sd() * prior.noise_sd();
    let gap = sol.objective - prior.delta() * (sigma * sigma - sw2);
    let point = ObjectivePoint {
        sigma,
        objective: sol.objective,
        gap,
    };
    Ok((sol, point))
}

/// Smallest σ in the bracket at which the best η in M reaches the state
/// evolution risk identity, with the λ distribution that attains it.
pub fn solve_design(problem: &DesignProblem) -> Result<DesignResult> {
    problem.validate()?;
    let prior = &problem.prior;
    let (lo, hi) = problem.sigma_bracket;
    let n = problem.scan_points;
    let sigmas: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let scan: Vec<ObjectivePoint> = sigmas
        .par_iter()
        .map(|&s| gap_at(problem, s).map(|(_, p)| p))
        .collect::<Result<_>>()?;
    let mut trace = scan.clone();
    let scale = prior.second_moment() + prior.noise_sd().powi(2);
    let flat = 1e-13 * scale;

    let mut crossings = Vec::new();
    for w in scan.windows(2) {
        if w[0].gap > flat && w[1].gap <= flat {
            let t = w[0].gap / (w[0].gap - w[1].gap);
            crossings.push(w[0].sigma + t * (w[1].sigma - w[0].sigma));
        }
    }

    let (sigma_min, boundary) = if scan[0].gap <= flat {
        (lo, false)
    } else if let Some(i) = scan.iter().position(|p| p.gap <= flat) {
        let (a, b) = (scan[i - 1], scan[i]);
        if b.gap.abs() <= flat {
            (b.sigma, i == n - 1)
        } else {
            let mut failure = None;
            let (root, _) = brent(
                |s| match gap_at(problem, s) {
                    Ok((_, p)) => {
                        trace.push(p);
                        p.gap
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                },
                a.sigma,
                b.sigma,
                a.gap,
                b.gap,
                1e-12 * hi,
                200,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            if let Some(c) = crossings.first_mut() {
                *c = root;
            }
            (root, false)
        }
    } else {
        (hi, true)
    };
    trace.sort_by(|x, y| x.sigma.total_cmp(&y.sigma));

    let (eta_star, mean_derivative, multiplier) = if boundary {
        (ScalarFunction::zero(), 0.0, f64::NAN)
    } else {
        let sol = converged_inner(problem, sigma_min)?;
        (sol.eta, sol.mean_derivative, sol.multiplier)
    };
    let delta = prior.delta();
    if mean_derivative >= delta * (1.0 - 1e-12) {
        return Err(Error::Infeasible(format!(
            "optimal η uses the whole derivative budget (E η′ = {mean_derivative}, δ = {delta})"
        )));
    }
    let tau_min = 1.0 / (1.0 - mean_derivative / delta);
    let lambda_star = lambda_table(prior, sigma_min, &eta_star, tau_min, problem.lambda_samples)?;
    let predicted = predicted_metrics(&eta_star, sigma_min, prior);
    Ok(DesignResult {
        mode: problem.mode,
        eta_star,
        sigma_min,
        tau_min,
        lambda_star,
        objective_trace: trace,
        crossings,
        boundary,
        predicted,
        budget_multiplier: multiplier,
    })
}

/// Quantile table of `(|Y| − η(|Y|))/τ` for `Y = B + σZ`, read at the
/// midpoints `(i − ½)/n`.
///
/// Several λ laws induce the same η. On η's zero set `|y| ≤ t` the formula
/// gives `λ = |y|/τ`, which leaves the pooled residuals exactly at zero so a
/// finite-p fit switches the whole null block on or off at random. There the
/// table holds `t/τ` instead: the residuals become strictly negative, η is
/// unchanged and the zero region is stable.
pub fn lambda_table(prior: &PriorSpec, sigma: f64, eta: &ScalarFunction, tau: f64, n: usize) -> Result<QuantileTable> {
    let law = prior.observation(sigma);
    let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let ys = law.abs_quantiles(&grid);
    let t = eta.zero_threshold();
    let t = if t.is_finite() { t } else { 0.0 };
    let mut values = Vec::with_capacity(n);
    let mut floor = 0.0_f64;
    for y in ys {
        let y = y.max(t);
        // η is 1-Lipschitz, so this only irons out rounding
        floor = floor.max((y - eta.eval(y)) / tau);
        values.push(floor);
    }
    QuantileTable::new(grid, values, crate::distributions::Interpolation::Linear)
}

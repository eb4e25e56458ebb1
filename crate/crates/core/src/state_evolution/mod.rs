//! The scalar fixed point `(σ, τ)` that predicts the risk of SLOPE.
//!
//! For `Y = B + σZ` and η built from `(F_|Y|, F_{τλ})`:
//!
//! ```text
//! σ² = σ_w² + E[(η(Y) − B)²] / δ
//! 1  = τ (1 − E[η′(Y)] / δ)
//! ```

use serde::Serialize;

use crate::distributions::{
    gauss_hermite, normal, ObservationLaw, PiecewiseRisk, PriorSpec, QuadratureRule, QuantileTable, Tail,
};
use crate::error::domain;
use crate::limiting_scalar::{EtaBuilder, ScalarFunction, DEFAULT_GRID};
use crate::roots::brent;
use crate::{Error, Result};

/// How expectations over `(B, Z)` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Integrator {
    /// Piecewise closed-form Gaussian integrals; exact up to rounding for piecewise-linear η.
    Exact,
    /// Gauss–Hermite with the given number of nodes per Gaussian dimension.
    GaussHermite(usize),
}

/// Outer iteration for σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Method {
    /// Brent's method on `r1(σ)` with τ solved exactly at every σ.
    Bracketed,
    /// Joint damped fixed-point updates of `(σ², τ)`; falls back to
    /// [`Method::Bracketed`] when it stalls or leaves the feasible region.
    Damped { damping: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// regular-sequence length behind each η
    pub grid: usize,
    pub method: Method,
    pub integrator: Integrator,
}

impl Default for SeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            grid: DEFAULT_GRID,
            method: Method::Bracketed,
            integrator: Integrator::Exact,
        }
    }
}

/// `E[(η(Y) − B)²]` and `E[η′(Y)]` for one η.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub eta: ScalarFunction,
    pub mse: f64,
    pub mean_derivative: f64,
}

/// Expectations of an arbitrary η ∈ M under `Y = B + σZ`.
pub fn evaluate_eta(prior: &PriorSpec, sigma: f64, eta: &ScalarFunction, integrator: Integrator) -> Result<(f64, f64)> {
    check_sigma(sigma)?;
    let law = prior.observation(sigma);
    match integrator {
        Integrator::Exact => {
            let form = PiecewiseRisk::new(&law, eta.knots(), Tail::Fixed(eta.tail_slope()));
            Ok((form.risk(eta.values()), form.mean_derivative(eta.values())))
        }
        Integrator::GaussHermite(n) => {
            let rule = gauss_hermite(n)?;
            Ok(gauss_hermite_expectations(prior, sigma, eta, &rule))
        }
    }
}

/// `(E[(η(Y) − B)²], E[η′(Y)])` by tensor Gauss–Hermite over the prior mixture.
/// The derivative term uses `E[Z η(Y)]/σ`, whose integrand is continuous.
pub fn gauss_hermite_expectations(prior: &PriorSpec, sigma: f64, eta: &ScalarFunction, rule: &QuadratureRule) -> (f64, f64) {
    let mut mse = 0.0;
    for c in prior.components() {
        if c.sd == 0.0 {
            mse += c.mass * rule.integrate(|z| (eta.eval(c.mean + sigma * z) - c.mean).powi(2));
        } else {
            for (&z1, &w1) in rule.nodes.iter().zip(&rule.weights) {
                let b = c.mean + c.sd * z1;
                mse += c.mass * w1 * rule.integrate(|z| (eta.eval(b + sigma * z) - b).powi(2));
            }
        }
    }
    (mse, stein_mean_derivative(prior, sigma, eta, rule))
}

/// `E[Z η(B + σZ)] / σ`, which equals `E[η′]` by Stein's identity.
pub fn stein_mean_derivative(prior: &PriorSpec, sigma: f64, eta: &ScalarFunction, rule: &QuadratureRule) -> f64 {
    let mut s = 0.0;
    for c in prior.components() {
        if c.sd == 0.0 {
            s += c.mass * rule.integrate(|z| z * eta.eval(c.mean + sigma * z));
        } else {
            for (&z1, &w1) in rule.nodes.iter().zip(&rule.weights) {
                let b = c.mean + c.sd * z1;
                s += c.mass * w1 * rule.integrate(|z| z * eta.eval(b + sigma * z));
            }
        }
    }
    s / sigma
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(domain("sigma", format!("must be > 0, got {sigma}")))
    }
}

/// Everything at a fixed σ that does not depend on τ.
#[derive(Debug, Clone)]
pub struct SigmaSlice {
    sigma: f64,
    delta: f64,
    prior: PriorSpec,
    law: ObservationLaw,
    builder: Option<EtaBuilder>,
    constant_lambda: Option<f64>,
    risk: Option<PiecewiseRisk>,
    rule: Option<QuadratureRule>,
}

impl SigmaSlice {
    pub fn new(prior: &PriorSpec, f_lambda: &QuantileTable, sigma: f64, grid: usize, integrator: Integrator) -> Result<Self> {
        check_sigma(sigma)?;
        if f_lambda.min_value() < 0.0 {
            return Err(Error::InvalidTable("λ distribution must be nonnegative".into()));
        }
        let law = prior.observation(sigma);
        let rule = match integrator {
            Integrator::Exact => None,
            Integrator::GaussHermite(n) => Some(gauss_hermite(n)?),
        };
        let (builder, constant_lambda, risk) = if f_lambda.is_constant() {
            (None, Some(f_lambda.min_value()), None)
        } else {
            let b = EtaBuilder::new(&law, f_lambda, grid)?;
            let risk = (integrator == Integrator::Exact).then(|| PiecewiseRisk::new(&law, b.knots(), Tail::Fixed(1.0)));
            (Some(b), None, risk)
        };
        Ok(Self {
            sigma,
            delta: prior.delta(),
            prior: prior.clone(),
            law,
            builder,
            constant_lambda,
            risk,
            rule,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn law(&self) -> &ObservationLaw {
        &self.law
    }

    pub fn eta(&self, tau: f64) -> ScalarFunction {
        match (&self.builder, self.constant_lambda) {
            (_, Some(l)) => ScalarFunction::soft_threshold(tau * l).expect("nonnegative threshold"),
            (Some(b), None) => b.build(tau).eta,
            (None, None) => unreachable!("slice has either a builder or a constant"),
        }
    }

    pub fn evaluate(&self, tau: f64) -> Evaluation {
        let eta = self.eta(tau);
        let (mse, mean_derivative) = match (&self.rule, &self.risk) {
            (Some(rule), _) => gauss_hermite_expectations(&self.prior, self.sigma, &eta, rule),
            (None, Some(form)) => (form.risk(eta.values()), form.mean_derivative(eta.values())),
            (None, None) => {
                let form = PiecewiseRisk::new(&self.law, eta.knots(), Tail::Fixed(eta.tail_slope()));
                (form.risk(eta.values()), form.mean_derivative(eta.values()))
            }
        };
        Evaluation {
            eta,
            mse,
            mean_derivative,
        }
    }

    /// Solves `τ(1 − E[η′_τ]/δ) = 1`; the left side is increasing in τ.
    pub fn solve_tau(&self) -> Result<(f64, Evaluation)> {
        let h = |tau: f64| -> f64 { tau * (1.0 - self.evaluate(tau).mean_derivative / self.delta) - 1.0 };
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut h_hi = h(hi);
        let mut doublings = 0;
        while h_hi <= 0.0 {
            lo = hi;
            hi *= 2.0;
            h_hi = h(hi);
            doublings += 1;
            if doublings > 64 {
                return Err(Error::Infeasible(format!(
                    "E[η'] ≥ δ = {} for every τ at σ = {}",
                    self.delta, self.sigma
                )));
            }
        }
        let h_lo = if lo == 0.0 { -1.0 } else { h(lo) };
        let (tau, _) = brent(h, lo, hi, h_lo, h_hi, 1e-14 * hi, 200);
        Ok((tau, self.evaluate(tau)))
    }
}

/// `r1 = σ_w² + E[(η − B)²]/δ − σ²` and `r2 = τ(1 − E[η′]/δ) − 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeResiduals {
    pub r1: f64,
    pub r2: f64,
    pub mse: f64,
    pub mean_derivative: f64,
    /// E[η′] ≥ δ: no finite τ can satisfy the second equation
    pub infeasible: bool,
}

pub fn se_rhs(prior: &PriorSpec, f_lambda: &QuantileTable, sigma: f64, tau: f64) -> Result<SeResiduals> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(domain("tau", format!("must be > 0, got {tau}")));
    }
    let slice = SigmaSlice::new(prior, f_lambda, sigma, DEFAULT_GRID, Integrator::Exact)?;
    let ev = slice.evaluate(tau);
    Ok(residuals(prior, sigma, tau, &ev))
}

fn residuals(prior: &PriorSpec, sigma: f64, tau: f64, ev: &Evaluation) -> SeResiduals {
    let d = prior.delta();
    SeResiduals {
        r1: prior.noise_sd().powi(2) + ev.mse / d - sigma * sigma,
        r2: tau * (1.0 - ev.mean_derivative / d) - 1.0,
        mse: ev.mse,
        mean_derivative: ev.mean_derivative,
        infeasible: ev.mean_derivative >= d,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub sigma: f64,
    pub tau: f64,
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateEvolutionSolution {
    pub sigma: f64,
    pub tau: f64,
    pub eta: ScalarFunction,
    pub residual1: f64,
    pub residual2: f64,
    pub converged: bool,
    /// E[(η(Y) − B)²]
    pub mse: f64,
    pub mean_derivative: f64,
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
    /// sign changes of `r1` seen among evaluated σ values; more than one hints
    /// at several fixed points
    pub crossings: usize,
}

impl StateEvolutionSolution {
    pub fn predicted_metrics(&self, prior: &PriorSpec) -> MetricsPrediction {
        predicted_metrics(&self.eta, self.sigma, prior)
    }
}

/// Outer σ-residual with τ chosen by `tau_rule` at every σ.
fn sigma_residual(
    prior: &PriorSpec,
    f_lambda: &QuantileTable,
    opts: &SeOptions,
    sigma: f64,
    fixed_tau: Option<f64>,
) -> Result<(f64, f64, Evaluation)> {
    let slice = SigmaSlice::new(prior, f_lambda, sigma, opts.grid, opts.integrator)?;
    let (tau, ev) = match fixed_tau {
        Some(t) => (t, slice.evaluate(t)),
        None => slice.solve_tau()?,
    };
    let r1 = prior.noise_sd().powi(2) + ev.mse / prior.delta() - sigma * sigma;
    Ok((r1, tau, ev))
}

fn bracketed(
    prior: &PriorSpec,
    f_lambda: &QuantileTable,
    opts: &SeOptions,
    fixed_tau: Option<f64>,
    mut trace: Vec<TracePoint>,
) -> Result<StateEvolutionSolution> {
    let mut seen: Vec<(f64, f64)> = Vec::new();
    let mut eval = |s: f64, trace: &mut Vec<TracePoint>| -> Result<(f64, f64, Evaluation)> {
        let out = sigma_residual(prior, f_lambda, opts, s, fixed_tau)?;
        let res = residuals(prior, s, out.1, &out.2);
        trace.push(TracePoint {
            sigma: s,
            tau: out.1,
            r1: res.r1,
            r2: res.r2,
        });
        seen.push((s, out.0));
        Ok(out)
    };
    let (lo, mut hi) = prior.sigma_bracket();
    let (r_lo, _, _) = eval(lo, &mut trace)?;
    let mut iterations = 1;
    let root = if r_lo <= 0.0 {
        lo
    } else {
        let (mut r_hi, _, _) = eval(hi, &mut trace)?;
        iterations += 1;
        while r_hi > 0.0 {
            if iterations > opts.max_iter || hi > 1e12 * lo {
                return Err(Error::Infeasible(format!("σ residual stays positive up to σ = {hi}")));
            }
            hi *= 2.0;
            r_hi = eval(hi, &mut trace)?.0;
            iterations += 1;
        }
        let mut err = None;
        let (root, used) = brent(
            |s| match eval(s, &mut trace) {
                Ok(v) => v.0,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            lo,
            hi,
            r_lo,
            r_hi,
            1e-13 * hi,
            opts.max_iter.max(2) - 1,
        );
        if let Some(e) = err {
            return Err(e);
        }
        iterations += used;
        root
    };
    let (_, tau, ev) = sigma_residual(prior, f_lambda, opts, root, fixed_tau)?;
    let res = residuals(prior, root, tau, &ev);
    seen.sort_by(|a, b| a.0.total_cmp(&b.0));
    let crossings = seen
        .windows(2)
        .filter(|w| (w[0].1 > 0.0) != (w[1].1 > 0.0))
        .count();
    let sw2 = prior.noise_sd().powi(2);
    let r2_scaled = if fixed_tau.is_some() { 0.0 } else { res.r2 * sw2 };
    Ok(StateEvolutionSolution {
        sigma: root,
        tau,
        converged: res.r1.abs().max(r2_scaled.abs()) < opts.tol,
        residual1: res.r1,
        residual2: res.r2,
        mse: ev.mse,
        mean_derivative: ev.mean_derivative,
        eta: ev.eta,
        iterations,
        trace,
        crossings,
    })
}

fn damped(prior: &PriorSpec, f_lambda: &QuantileTable, opts: &SeOptions, damping: f64) -> Result<StateEvolutionSolution> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(domain("damping", format!("must lie in (0, 1], got {damping}")));
    }
    let d = prior.delta();
    let sw2 = prior.noise_sd().powi(2);
    let mut s2 = prior.sigma_bracket().1.powi(2);
    let mut tau = 1.0;
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for it in 1..=opts.max_iter {
        let sigma = s2.sqrt();
        let slice = SigmaSlice::new(prior, f_lambda, sigma, opts.grid, opts.integrator)?;
        let ev = slice.evaluate(tau);
        let res = residuals(prior, sigma, tau, &ev);
        trace.push(TracePoint {
            sigma,
            tau,
            r1: res.r1,
            r2: res.r2,
        });
        let err = res.r1.abs().max(res.r2.abs() * sw2);
        if err < opts.tol {
            return Ok(StateEvolutionSolution {
                sigma,
                tau,
                residual1: res.r1,
                residual2: res.r2,
                converged: true,
                mse: ev.mse,
                mean_derivative: ev.mean_derivative,
                eta: ev.eta,
                iterations: it,
                trace,
                crossings: 0,
            });
        }
        if err < best {
            best = err;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if res.infeasible || since_best > 25 {
            break;
        }
        s2 = (1.0 - damping) * s2 + damping * (sw2 + ev.mse / d);
        tau = (1.0 - damping) * tau + damping / (1.0 - ev.mean_derivative / d);
    }
    bracketed(prior, f_lambda, opts, None, trace)
}

/// Solves the fixed point for a λ distribution.
pub fn solve(prior: &PriorSpec, f_lambda: &QuantileTable, opts: &SeOptions) -> Result<StateEvolutionSolution> {
    if !(opts.tol > 0.0) {
        return Err(domain("tol", "must be > 0"));
    }
    match opts.method {
        Method::Bracketed => bracketed(prior, f_lambda, opts, None, Vec::new()),
        Method::Damped { damping } => damped(prior, f_lambda, opts, damping),
    }
}

/// Solves only the σ equation with τ held fixed.
pub fn solve_sigma_at_tau(
    prior: &PriorSpec,
    f_lambda: &QuantileTable,
    tau: f64,
    opts: &SeOptions,
) -> Result<StateEvolutionSolution> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(domain("tau", format!("must be > 0, got {tau}")));
    }
    bracketed(prior, f_lambda, opts, Some(tau), Vec::new())
}

/// Asymptotic estimation and selection metrics implied by η at noise level σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsPrediction {
    pub mse: f64,
    pub type_i: f64,
    /// None for a prior without signal
    pub power: Option<f64>,
    /// expected share of false discoveries among discoveries
    pub fdr: Option<f64>,
    pub mean_derivative: f64,
    /// sup{y ≥ 0 : η(y) = 0}
    pub threshold: f64,
}

pub fn predicted_metrics(eta: &ScalarFunction, sigma: f64, prior: &PriorSpec) -> MetricsPrediction {
    let law = prior.observation(sigma);
    let form = PiecewiseRisk::new(&law, eta.knots(), Tail::Fixed(eta.tail_slope()));
    let t = eta.zero_threshold();
    let type_i = if t.is_finite() { 2.0 * normal::sf(t / sigma) } else { 0.0 };
    let rho = prior.sparsity();
    let mut signal_hits = 0.0;
    for c in law.components().iter().filter(|c| !c.is_null) {
        if t.is_finite() {
            signal_hits += c.mass * (normal::sf((t - c.mean) / c.sd) + normal::cdf((-t - c.mean) / c.sd));
        }
    }
    let power = (rho > 0.0).then(|| signal_hits / rho);
    let null_hits = (1.0 - rho) * type_i;
    let fdr = (null_hits + signal_hits > 0.0).then(|| null_hits / (null_hits + signal_hits));
    MetricsPrediction {
        mse: form.risk(eta.values()),
        type_i,
        power,
        fdr,
        mean_derivative: form.mean_derivative(eta.values()),
        threshold: t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Atom;

    fn fig3() -> PriorSpec {
        PriorSpec::sparse_point(0.25, 2.125, 0.25, 0.64).unwrap()
    }

    #[test]
    fn identity_case_closed_form() {
        let prior = PriorSpec::sparse_point(0.2, 1.0, 1.0, 2.0).unwrap();
        let zero = QuantileTable::constant(0.0).unwrap();
        let sol = solve(&prior, &zero, &SeOptions::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.sigma - 2.0_f64.sqrt()).abs() < 1e-8);
        assert!((sol.tau - 2.0).abs() < 1e-8);
        let r = se_rhs(&prior, &zero, 2.0_f64.sqrt(), 2.0).unwrap();
        assert!(r.r1.abs() < 1e-12 && r.r2.abs() < 1e-12);
    }

    #[test]
    fn identity_case_infeasible_when_delta_below_one() {
        let prior = PriorSpec::sparse_point(0.2, 1.0, 1.0, 0.8).unwrap();
        let zero = QuantileTable::constant(0.0).unwrap();
        assert!(matches!(solve(&prior, &zero, &SeOptions::default()), Err(Error::Infeasible(_))));
        assert!(se_rhs(&prior, &zero, 1.0, 1.0).unwrap().infeasible);
    }

    #[test]
    fn huge_lambda_hits_zero_eta_endpoint() {
        let prior = fig3();
        let big = QuantileTable::constant(1e6).unwrap();
        let sol = solve(&prior, &big, &SeOptions::default()).unwrap();
        let expect = (0.0625_f64 + 0.25 * 2.125 * 2.125 / 0.64).sqrt();
        assert!((sol.sigma - expect).abs() < 1e-9);
        assert!((sol.tau - 1.0).abs() < 1e-12);
        assert!((sol.sigma - 1.3515).abs() < 1e-4);
        let m = sol.predicted_metrics(&prior);
        assert_eq!(m.type_i, 0.0);
        assert_eq!(m.power, Some(0.0));
        assert!((m.mse - prior.second_moment()).abs() < 1e-12);
    }

    #[test]
    fn soft_threshold_type_i() {
        let prior = fig3();
        let eta = ScalarFunction::soft_threshold(1.3).unwrap();
        let m = predicted_metrics(&eta, 0.7, &prior);
        assert!((m.type_i - 2.0 * (1.0 - normal::cdf(1.3 / 0.7))).abs() < 1e-15);
    }

    #[test]
    fn zero_prior_solution_sits_at_noise_floor() {
        let prior = PriorSpec::new(vec![Atom { location: 0.0, mass: 1.0 }], vec![], 0.5, 0.7).unwrap();
        let lam = QuantileTable::constant(50.0).unwrap();
        let sol = solve(&prior, &lam, &SeOptions::default()).unwrap();
        assert!((sol.sigma - 0.5).abs() < 1e-9);
    }
}

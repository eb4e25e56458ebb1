//! The inner convex problem: minimize `E[(η(Y) − B)²]` over piecewise-linear η ∈ M
//! with `E[η′(Y)] ≤ δ`, parametrized by one slope per cell.
//!
//! Writing `v = P s` for the knot values, the risk is the tridiagonal quadratic
//! form of [`PiecewiseRisk`]. Bound constraints are handled by an active set;
//! on every face the knots of consecutive fixed cells collapse into one chain
//! variable, which keeps the reduced system tridiagonal. The budget is
//! enforced through its Lagrange multiplier.

use serde::Serialize;

use crate::distributions::{normal, PiecewiseRisk, PriorSpec, Tail};
use crate::error::domain;
use crate::limiting_scalar::ScalarFunction;
use crate::{Error, Result};

/// Which optimal design is sought.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DesignMode {
    MinMse,
    /// η is forced to vanish on `|y| ≤ Φ⁻¹(1 − α/2)·σ`.
    MaxPower { alpha: f64 },
}

impl DesignMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DesignMode::MinMse => Ok(()),
            DesignMode::MaxPower { alpha } if alpha > 0.0 && alpha < 1.0 => Ok(()),
            DesignMode::MaxPower { alpha } => Err(domain("alpha", format!("must lie in (0, 1), got {alpha}"))),
        }
    }

    /// Half-width of the forced zero region at noise level σ.
    pub fn zero_region(&self, sigma: f64) -> f64 {
        match *self {
            DesignMode::MinMse => 0.0,
            DesignMode::MaxPower { alpha } => normal::inv_cdf(1.0 - 0.5 * alpha) * sigma,
        }
    }
}

/// Grids at least twice this size are warm started from a half-size solve.
const COARSEST: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Lower,
    Upper,
    Free,
}

/// The discretized inner problem at one σ.
#[derive(Debug, Clone)]
pub struct InnerProblem {
    prior: PriorSpec,
    mode: DesignMode,
    grid: usize,
    sigma: f64,
    delta: f64,
    form: PiecewiseRisk,
    widths: Vec<f64>,
    weights: Vec<f64>,
    upper: Vec<f64>,
}

/// Optimum of the inner problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerSolution {
    pub eta: ScalarFunction,
    pub slopes: Vec<f64>,
    /// optimal value, including E Var(B | Y)
    pub objective: f64,
    /// E[η′(Y)]
    pub mean_derivative: f64,
    /// Lagrange multiplier of the budget constraint
    pub multiplier: f64,
    pub active_set_steps: usize,
    /// false if some active-set pass hit its step cap
    pub converged: bool,
}

impl InnerProblem {
    /// Cells at equal-mass quantiles of |Y| (above the forced zero region in
    /// max-power mode); the outermost knot sits at the `1 − 1/(4m)` quantile of
    /// the modelled part and the last slope continues beyond it.
    pub fn new(prior: &PriorSpec, sigma: f64, mode: DesignMode, grid: usize) -> Result<Self> {
        mode.validate()?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(domain("sigma", format!("must be > 0, got {sigma}")));
        }
        if grid < 2 {
            return Err(domain("grid", "need at least two cells"));
        }
        let law = prior.observation(sigma);
        let t = mode.zero_region(sigma);
        let u0 = if t > 0.0 { law.abs_cdf(t) } else { 0.0 };
        let m = grid as f64;
        let mut us: Vec<f64> = (1..grid).map(|k| u0 + (1.0 - u0) * k as f64 / m).collect();
        us.push(u0 + (1.0 - u0) * (1.0 - 0.25 / m));
        let mut knots = vec![0.0];
        if t > 0.0 {
            knots.push(t);
        }
        for q in law.abs_quantiles(&us) {
            if q > *knots.last().unwrap() {
                knots.push(q);
            }
        }
        if knots.len() < 3 {
            return Err(Error::Infeasible(format!("degenerate design grid at σ = {sigma}")));
        }
        let form = PiecewiseRisk::new(&law, &knots, Tail::ExtendLast);
        let widths: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let mut weights = form.cell_mass().to_vec();
        *weights.last_mut().unwrap() += form.tail_mass();
        let mut upper = vec![1.0; widths.len()];
        if t > 0.0 {
            upper[0] = 0.0;
        }
        Ok(Self {
            prior: prior.clone(),
            mode,
            grid,
            sigma,
            delta: prior.delta(),
            form,
            widths,
            weights,
            upper,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn cells(&self) -> usize {
        self.widths.len()
    }

    pub fn knots(&self) -> &[f64] {
        self.form.knots()
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Budget weights: `Σ w_k s_k = E[η′(Y)]`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Upper bounds on the slopes (0 on a forced zero cell, 1 elsewhere).
    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    pub fn risk_form(&self) -> &PiecewiseRisk {
        &self.form
    }

    pub fn knot_values(&self, slopes: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(slopes.len() + 1);
        v.push(0.0);
        let mut acc = 0.0;
        for (s, d) in slopes.iter().zip(&self.widths) {
            acc += s * d;
            v.push(acc);
        }
        v
    }

    /// `E[(η(Y) − B)²]` for the η with the given cell slopes.
    pub fn objective(&self, slopes: &[f64]) -> f64 {
        self.form.risk(&self.knot_values(slopes))
    }

    pub fn budget(&self, slopes: &[f64]) -> f64 {
        slopes.iter().zip(&self.weights).map(|(s, w)| s * w).sum()
    }

    pub fn eta(&self, slopes: &[f64]) -> ScalarFunction {
        let tail = *slopes.last().unwrap();
        ScalarFunction::new(self.knots().to_vec(), self.knot_values(slopes), tail).expect("valid grid")
    }

    /// Gradient of `objective + μ·budget` with respect to the slopes.
    fn gradient(&self, slopes: &[f64], mu: f64, out: &mut [f64]) {
        let v = self.knot_values(slopes);
        let mut hv = vec![0.0; v.len()];
        self.form.apply(&v, &mut hv);
        let lin = self.form.linear();
        let mut suffix = 0.0;
        for j in (0..slopes.len()).rev() {
            suffix += 2.0 * (hv[j + 1] - lin[j + 1]);
            out[j] = self.widths[j] * suffix + mu * self.weights[j];
        }
    }

    /// Minimizer over the face where non-free cells keep their current slopes.
    /// With `budget = Some(target)` the budget holds with equality and the
    /// returned multiplier is the one that achieves it.
    fn face_solve(&self, slopes: &[f64], status: &[Status], mu: f64, budget: Option<f64>) -> (Vec<f64>, f64) {
        let m = slopes.len();
        let diag = self.form.hessian_diag();
        let off = self.form.hessian_off();
        let lin = self.form.linear();
        // group of each knot: number of free cells to its left
        let mut group = vec![0usize; m + 1];
        let mut free_cells = Vec::new();
        let mut fixed_part = vec![0.0; m + 1];
        let mut acc = 0.0;
        for j in 0..m {
            group[j + 1] = group[j] + (status[j] == Status::Free) as usize;
            if status[j] == Status::Free {
                free_cells.push(j);
            } else {
                acc += slopes[j] * self.widths[j];
            }
            fixed_part[j + 1] = acc;
        }
        let r = free_cells.len();
        if r == 0 {
            return (slopes.to_vec(), mu);
        }
        let mut hc = vec![0.0; m + 1];
        self.form.apply(&fixed_part, &mut hc);
        let mut kd = vec![0.0; r + 1];
        let mut ko = vec![0.0; r + 1];
        let mut rhs = vec![0.0; r + 1];
        for k in 0..=m {
            let g = group[k];
            kd[g] += diag[k];
            rhs[g] += lin[k] - hc[k];
            if k < m {
                if group[k + 1] == g {
                    kd[g] += 2.0 * off[k];
                } else {
                    ko[g] += off[k];
                }
            }
        }
        // a_i: coefficient of x_i in the budget, Σ_i a_i x_i
        let mut a = vec![0.0; r + 1];
        for (i, &j) in free_cells.iter().enumerate() {
            let c = self.weights[j] / self.widths[j];
            a[i + 1] += c;
            a[i] -= c;
        }
        // drop the pinned group 0
        let kd = &kd[1..];
        let ko = &ko[1..r];
        let rhs = &rhs[1..];
        let a = &a[1..];
        let x = match budget {
            None => {
                let b: Vec<f64> = rhs.iter().zip(a).map(|(r, a)| r - 0.5 * mu * a).collect();
                (thomas(kd, ko, &b), mu)
            }
            Some(target) => {
                let fixed_budget: f64 = (0..m)
                    .filter(|&j| status[j] != Status::Free)
                    .map(|j| slopes[j] * self.weights[j])
                    .sum();
                let x0 = thomas(kd, ko, rhs);
                let x1 = thomas(kd, ko, a);
                let ax0: f64 = a.iter().zip(&x0).map(|(p, q)| p * q).sum();
                let ax1: f64 = a.iter().zip(&x1).map(|(p, q)| p * q).sum();
                let half_mu = (ax0 - (target - fixed_budget)) / ax1;
                let x: Vec<f64> = x0.iter().zip(&x1).map(|(p, q)| p - half_mu * q).collect();
                (x, 2.0 * half_mu)
            }
        };
        let (x, mu_out) = x;
        let mut out = slopes.to_vec();
        let mut prev = 0.0;
        for (i, &j) in free_cells.iter().enumerate() {
            out[j] = (x[i] - prev) / self.widths[j];
            prev = x[i];
        }
        (out, mu_out)
    }

    fn lagrangian(&self, slopes: &[f64], mu: f64) -> f64 {
        self.objective(slopes) + mu * self.budget(slopes)
    }

    /// Active-set minimization of `objective + μ·budget` over the box, warm
    /// started from `slopes`/`status`. Face minimizers are clipped to the box
    /// when that still descends; otherwise the step stops at the first bound.
    fn box_solve(&self, slopes: &mut Vec<f64>, status: &mut [Status], mu: f64) -> (usize, bool) {
        let m = slopes.len();
        let mut grad = vec![0.0; m];
        let mut single_release = false;
        let mut current = self.lagrangian(slopes, mu);
        let max_steps = 20 * m + 100;
        for step in 1..=max_steps {
            let (target, _) = self.face_solve(slopes, status, mu, None);
            let inside = (0..m)
                .filter(|&j| status[j] == Status::Free)
                .all(|j| target[j] >= 0.0 && target[j] <= self.upper[j]);
            if !inside {
                // projected backtracking along the clipped path
                let mut accepted = false;
                let mut alpha = 1.0;
                for _ in 0..8 {
                    let trial: Vec<f64> = (0..m)
                        .map(|j| match status[j] {
                            Status::Free => (slopes[j] + alpha * (target[j] - slopes[j])).clamp(0.0, self.upper[j]),
                            _ => slopes[j],
                        })
                        .collect();
                    let value = self.lagrangian(&trial, mu);
                    if value < current {
                        *slopes = trial;
                        current = value;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if accepted {
                    single_release = false;
                } else {
                    let alpha = self.blocked_step(slopes, status, &target);
                    current = self.lagrangian(slopes, mu);
                    single_release = alpha == 0.0;
                }
                for j in 0..m {
                    if status[j] == Status::Free {
                        if slopes[j] <= 0.0 {
                            slopes[j] = 0.0;
                            status[j] = Status::Lower;
                        } else if slopes[j] >= self.upper[j] {
                            slopes[j] = self.upper[j];
                            status[j] = Status::Upper;
                        }
                    }
                }
                continue;
            }
            for j in 0..m {
                if status[j] == Status::Free {
                    slopes[j] = target[j];
                }
            }
            current = self.lagrangian(slopes, mu);
            self.gradient(slopes, mu, &mut grad);
            let scale = grad.iter().fold(0.0_f64, |s, g| s.max(g.abs())).max(1e-300);
            let tol = 1e-11 * scale;
            let violation = |j: usize| match status[j] {
                Status::Lower if self.upper[j] > 0.0 => (-grad[j] - tol).max(0.0),
                Status::Upper => (grad[j] - tol).max(0.0),
                _ => 0.0,
            };
            if single_release {
                let worst = (0..m).map(|j| (j, violation(j))).max_by(|a, b| a.1.total_cmp(&b.1));
                match worst {
                    Some((j, v)) if v > 0.0 => status[j] = Status::Free,
                    _ => return (step, true),
                }
            } else {
                let release: Vec<usize> = (0..m).filter(|&j| violation(j) > 0.0).collect();
                if release.is_empty() {
                    return (step, true);
                }
                for j in release {
                    status[j] = Status::Free;
                }
            }
        }
        (max_steps, false)
    }

    /// Moves free slopes toward `target` until the first one reaches a bound,
    /// which is then pinned. Returns the step length.
    fn blocked_step(&self, slopes: &mut [f64], status: &mut [Status], target: &[f64]) -> f64 {
        let mut alpha = 1.0_f64;
        let mut blocking = None;
        for j in 0..slopes.len() {
            if status[j] != Status::Free {
                continue;
            }
            let d = target[j] - slopes[j];
            let room = if target[j] < 0.0 && d < 0.0 {
                -slopes[j] / d
            } else if target[j] > self.upper[j] && d > 0.0 {
                (self.upper[j] - slopes[j]) / d
            } else {
                continue;
            };
            if room < alpha {
                alpha = room;
                blocking = Some(j);
            }
        }
        let alpha = alpha.max(0.0);
        for j in 0..slopes.len() {
            if status[j] == Status::Free {
                slopes[j] += alpha * (target[j] - slopes[j]);
            }
        }
        if let Some(j) = blocking {
            if target[j] < slopes[j] {
                slopes[j] = 0.0;
                status[j] = Status::Lower;
            } else {
                slopes[j] = self.upper[j];
                status[j] = Status::Upper;
            }
        }
        alpha
    }

    /// Solves the inner problem.
    pub fn solve(&self) -> InnerSolution {
        let m = self.cells();
        let start = if self.grid >= 2 * COARSEST {
            match InnerProblem::new(&self.prior, self.sigma, self.mode, self.grid / 2) {
                Ok(coarse) => self.transfer(&coarse, &coarse.solve().slopes),
                Err(_) => vec![0.0; m],
            }
        } else {
            vec![0.0; m]
        };
        self.solve_from(start)
    }

    /// Reads each cell's slope off the coarse cell holding its midpoint.
    fn transfer(&self, coarse: &InnerProblem, slopes: &[f64]) -> Vec<f64> {
        let ck = coarse.knots();
        self.knots()
            .windows(2)
            .zip(&self.upper)
            .map(|(w, &u)| {
                let mid = 0.5 * (w[0] + w[1]);
                let c = ck.partition_point(|&x| x <= mid).saturating_sub(1).min(slopes.len() - 1);
                slopes[c].min(u)
            })
            .collect()
    }

    /// Solves the inner problem from the given starting slopes.
    pub fn solve_from(&self, start: Vec<f64>) -> InnerSolution {
        let mut slopes: Vec<f64> = start.iter().zip(&self.upper).map(|(&s, &u)| s.clamp(0.0, u)).collect();
        let mut status: Vec<Status> = slopes
            .iter()
            .zip(&self.upper)
            .map(|(&s, &u)| {
                if s == 0.0 {
                    Status::Lower
                } else if s == u {
                    Status::Upper
                } else {
                    Status::Free
                }
            })
            .collect();
        let mut steps = 0;
        let mut converged = true;
        let mut run = |s: &mut Vec<f64>, st: &mut [Status], mu: f64| {
            let (n, ok) = self.box_solve(s, st, mu);
            steps += n;
            converged &= ok;
        };
        run(&mut slopes, &mut status, 0.0);
        let mut mu = 0.0;
        if self.budget(&slopes) > self.delta {
            let (mut lo, mut hi) = (0.0, 1.0);
            let (mut s_hi, mut st_hi) = (slopes.clone(), status.clone());
            loop {
                run(&mut s_hi, &mut st_hi, hi);
                if self.budget(&s_hi) <= self.delta || hi > 1e12 {
                    break;
                }
                lo = hi;
                hi *= 4.0;
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                run(&mut slopes, &mut status, mid);
                if self.budget(&slopes) > self.delta {
                    lo = mid;
                } else {
                    hi = mid;
                    s_hi.clone_from(&slopes);
                    st_hi.clone_from(&status);
                }
                if hi - lo <= 1e-13 * hi {
                    break;
                }
            }
            // polish: budget as an equality on the final face
            let (polished, mu_eq) = self.face_solve(&s_hi, &st_hi, hi, Some(self.delta));
            let feasible = polished
                .iter()
                .zip(&self.upper)
                .all(|(&s, &u)| s >= -1e-12 && s <= u + 1e-12);
            if feasible && mu_eq >= 0.0 {
                slopes = polished
                    .iter()
                    .zip(&self.upper)
                    .map(|(&s, &u)| s.clamp(0.0, u))
                    .collect();
                mu = mu_eq;
            } else {
                slopes = s_hi;
                mu = hi;
            }
        }
        InnerSolution {
            eta: self.eta(&slopes),
            objective: self.objective(&slopes),
            mean_derivative: self.budget(&slopes),
            slopes,
            multiplier: mu,
            active_set_steps: steps,
            converged,
        }
    }
}

/// Solves a symmetric tridiagonal system with diagonal `d` and off-diagonal `e`.
fn thomas(d: &[f64], e: &[f64], b: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = d[0];
    x[0] = b[0] / denom;
    for i in 1..n {
        c[i - 1] = e[i - 1] / denom;
        denom = d[i] - e[i - 1] * c[i - 1];
        x[i] = (b[i] - e[i - 1] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// `L(σ)` and the optimal η on a grid of `grid` cells.
pub fn solve_inner(prior: &PriorSpec, sigma: f64, mode: DesignMode, grid: usize) -> Result<InnerSolution> {
    Ok(InnerProblem::new(prior, sigma, mode, grid)?.solve())
}

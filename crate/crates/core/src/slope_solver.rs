//! SLOPE regression on synthetic Gaussian designs.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::distributions::{PriorSpec, RngStream};
use crate::error::{check_dim, domain};
use crate::sorted_l1::{norm_unchecked, ProxWorkspace, RegularizationSequence};
use crate::{Error, Result};

/// Default magnitude below which a coefficient counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// `y = A β + w` with `A_ij ~ N(0, 1/n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInstance {
    pub a: Array2<f64>,
    pub y: Array1<f64>,
    pub beta_true: Array1<f64>,
    pub w: Array1<f64>,
    pub seed: RngStream,
}

impl LinearInstance {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.a.ncols()
    }
}

/// Number of rows for `p` columns at aspect ratio δ.
pub fn rows_for(delta: f64, p: usize) -> usize {
    ((delta * p as f64).round() as usize).max(1)
}

/// Draws β (i.i.d. from the prior), then `A` row by row, then the noise `w`.
pub fn generate_instance(prior: &PriorSpec, p: usize, seed: RngStream) -> Result<LinearInstance> {
    if p == 0 {
        return Err(domain("p", "must be >= 1"));
    }
    let n = rows_for(prior.delta(), p);
    let mut rng = seed.rng();
    let beta: Array1<f64> = (0..p).map(|_| prior.sample(&mut rng)).collect();
    let entry = Normal::new(0.0, 1.0 / (n as f64).sqrt()).expect("positive sd");
    let a = Array2::from_shape_fn((n, p), |_| entry.sample(&mut rng));
    let noise = Normal::new(0.0, prior.noise_sd()).expect("positive sd");
    let w: Array1<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
    let y = a.dot(&beta) + &w;
    Ok(LinearInstance {
        a,
        y,
        beta_true: beta,
        w,
        seed,
    })
}

/// Consecutive steps without a representable objective decrease before [`fit`] stops.
const STALL_STEPS: usize = 50;

/// Stopping controls for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub beta_hat: Vec<f64>,
    pub iterations: usize,
    /// Fixed-point residual ‖x − prox(x − ∇f/L)‖/√p at the last step.
    pub final_gap: f64,
    pub objective: f64,
    /// false when `max_iter` was reached first
    pub converged: bool,
}

/// Row-major dense matrix products without temporaries.
struct Design<'a> {
    data: &'a [f64],
    n: usize,
    p: usize,
}

impl Design<'_> {
    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (row, o) in self.data.chunks_exact(self.p).zip(out.iter_mut()) {
            *o = dot(row, x);
        }
    }

    fn mul_t(&self, r: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (row, &ri) in self.data.chunks_exact(self.p).zip(r) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += ri * a;
            }
        }
    }

    /// ‖A‖₂² by power iteration on AᵀA; a lower bound accurate to about 1e-4,
    /// which the 1% step safety margin absorbs.
    fn spectral_sq(&self) -> f64 {
        let mut v = vec![1.0 / (self.p as f64).sqrt(); self.p];
        let mut av = vec![0.0; self.n];
        let mut w = vec![0.0; self.p];
        let mut est = 0.0;
        for _ in 0..300 {
            self.mul(&v, &mut av);
            self.mul_t(&av, &mut w);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm;
            v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / norm);
            if (next - est).abs() <= 1e-5 * next {
                return next;
            }
            est = next;
        }
        est
    }
}

/// Dot product with independent partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn objective(y: &[f64], ax: &[f64], lambda: &[f64], x: &[f64]) -> f64 {
    let rss: f64 = y.iter().zip(ax).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * rss + norm_unchecked(lambda, x)
}

/// `argmin_b ½‖y − A b‖² + J_λ(b)` by accelerated proximal gradient with
/// restart whenever the objective would increase.
pub fn fit(inst: &LinearInstance, lambda: &RegularizationSequence, options: FitOptions) -> Result<FitResult> {
    let a = inst.a.as_standard_layout();
    fit_dense(
        a.as_slice().expect("standard layout"),
        inst.n(),
        inst.y.as_slice().expect("contiguous"),
        lambda,
        options,
    )
}

/// [`fit`] on a row-major `n × p` matrix given as a flat slice.
pub fn fit_dense(
    a: &[f64],
    n: usize,
    y: &[f64],
    lambda: &RegularizationSequence,
    options: FitOptions,
) -> Result<FitResult> {
    check_dim(n, y.len())?;
    let p = lambda.len();
    check_dim(n * p, a.len())?;
    if !(options.tol > 0.0) {
        return Err(domain("tol", format!("must be > 0, got {}", options.tol)));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response"));
    }
    let design = Design { data: a, n, p };
    let lip = design.spectral_sq() * 1.01;
    let lam = lambda.as_slice();
    if lip == 0.0 {
        return Ok(FitResult {
            beta_hat: vec![0.0; p],
            iterations: 0,
            final_gap: 0.0,
            objective: objective(y, &vec![0.0; n], lam, &vec![0.0; p]),
            converged: true,
        });
    }
    let step_lambda: Vec<f64> = lam.iter().map(|l| l / lip).collect();
    let mut ws = ProxWorkspace::new(p);

    let mut x = vec![0.0; p];
    let mut ax = vec![0.0; n];
    let mut fx = objective(y, &ax, lam, &x);
    let mut v = x.clone();
    let mut av = ax.clone();
    let mut momentum = false;
    let mut t = 1.0_f64;

    let mut z = vec![0.0; p];
    let mut az = vec![0.0; n];
    let mut resid = vec![0.0; n];
    let mut grad = vec![0.0; p];
    let mut point = vec![0.0; p];
    let sqrt_p = (p as f64).sqrt();
    let mut gap = f64::INFINITY;
    let mut stalled = 0;

    for iter in 1..=options.max_iter {
        resid.iter_mut().zip(av.iter().zip(y)).for_each(|(r, (a, b))| *r = a - b);
        design.mul_t(&resid, &mut grad);
        point
            .iter_mut()
            .zip(v.iter().zip(&grad))
            .for_each(|(q, (a, g))| *q = a - g / lip);
        ws.prox_into(&step_lambda, &point, &mut z);
        design.mul(&z, &mut az);
        let fz = objective(y, &az, lam, &z);
        if !fz.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        if momentum && fz > fx {
            v.copy_from_slice(&x);
            av.copy_from_slice(&ax);
            t = 1.0;
            momentum = false;
            continue;
        }
        gap = z.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / sqrt_p;
        let rel = (fx - fz) / fx.abs().max(f64::MIN_POSITIVE);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for i in 0..p {
            v[i] = z[i] + beta * (z[i] - x[i]);
        }
        for i in 0..n {
            av[i] = az[i] + beta * (az[i] - ax[i]);
        }
        momentum = beta > 0.0;
        std::mem::swap(&mut x, &mut z);
        std::mem::swap(&mut ax, &mut az);
        fx = fz.min(fx);
        t = t_next;
        // the objective gap is quadratic in the residual, hence tol² for it
        if rel.abs() < options.tol * options.tol {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if gap < options.tol || stalled >= STALL_STEPS {
            return Ok(FitResult {
                beta_hat: x,
                iterations: iter,
                final_gap: gap,
                objective: fx,
                converged: true,
            });
        }
    }
    Ok(FitResult {
        beta_hat: x,
        iterations: options.max_iter,
        final_gap: gap,
        objective: fx,
        converged: false,
    })
}

/// `½‖y − A b‖² + J_λ(b)`.
pub fn slope_objective(inst: &LinearInstance, lambda: &RegularizationSequence, b: &[f64]) -> Result<f64> {
    check_dim(inst.p(), b.len())?;
    check_dim(inst.p(), lambda.len())?;
    let ab = inst.a.dot(&Array1::from(b.to_vec()));
    Ok(objective(
        inst.y.as_slice().expect("contiguous"),
        ab.as_slice().expect("contiguous"),
        lambda.as_slice(),
        b,
    ))
}

/// Estimation and selection summary of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub mse: f64,
    /// None when the truth has no null coordinate
    pub type_i: Option<f64>,
    /// None when the truth has no signal coordinate
    pub power: Option<f64>,
    pub fdp: f64,
    pub discoveries: usize,
    pub false_discoveries: usize,
}

pub fn metrics(fit: &FitResult, inst: &LinearInstance, zero_tol: f64) -> Result<MetricsRecord> {
    metrics_from(&fit.beta_hat, inst.beta_true.as_slice().expect("contiguous"), zero_tol)
}

/// Metrics of an estimate against the truth.
pub fn metrics_from(beta_hat: &[f64], beta: &[f64], zero_tol: f64) -> Result<MetricsRecord> {
    check_dim(beta.len(), beta_hat.len())?;
    if !(zero_tol >= 0.0) {
        return Err(domain("zero_tol", "must be >= 0"));
    }
    let p = beta.len();
    let (mut nulls, mut signals, mut fd, mut td) = (0usize, 0usize, 0usize, 0usize);
    let mut sq = 0.0;
    for (&b, &h) in beta.iter().zip(beta_hat) {
        sq += (h - b) * (h - b);
        let selected = h.abs() > zero_tol;
        if b == 0.0 {
            nulls += 1;
            fd += selected as usize;
        } else {
            signals += 1;
            td += selected as usize;
        }
    }
    let frac = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(MetricsRecord {
        mse: sq / p as f64,
        type_i: frac(fd, nulls),
        power: frac(td, signals),
        fdp: fd as f64 / (fd + td).max(1) as f64,
        discoveries: fd + td,
        false_discoveries: fd,
    })
}

/// Draws a standard normal vector; shared by examples and tests that need raw noise.
pub fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rand_distr::StandardNormal.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Atom;

    fn fig3(delta: f64) -> PriorSpec {
        PriorSpec::sparse_point(0.25, 2.125, 0.25, delta).unwrap()
    }

    #[test]
    fn instance_shape_and_determinism() {
        let prior = PriorSpec::sparse_point(0.256, 3.0, 1.0, 0.64).unwrap();
        let a = generate_instance(&prior, 1024, RngStream::new(5, 1)).unwrap();
        assert_eq!(a.n(), 655);
        let b = generate_instance(&prior, 1024, RngStream::new(5, 1)).unwrap();
        assert_eq!(a, b);
        let zero = PriorSpec::new(vec![Atom { location: 0.0, mass: 1.0 }], vec![], 1.0, 0.5).unwrap();
        let z = generate_instance(&zero, 40, RngStream::new(1, 0)).unwrap();
        assert!(z.beta_true.iter().all(|&b| b == 0.0));
        let resid = &z.y - &z.a.dot(&z.beta_true) - &z.w;
        assert!(resid.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn huge_lambda_gives_zero() {
        let inst = generate_instance(&fig3(0.64), 50, RngStream::new(2, 0)).unwrap();
        let aty = inst.a.t().dot(&inst.y);
        let big = aty.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * 50.0 + 1.0;
        let lam = RegularizationSequence::constant(big, 50).unwrap();
        let fit = fit(&inst, &lam, FitOptions::default()).unwrap();
        assert!(fit.beta_hat.iter().all(|&b| b == 0.0));
        assert!(fit.converged);
    }

    #[test]
    fn zero_lambda_solves_least_squares() {
        let inst = generate_instance(&fig3(4.0), 10, RngStream::new(3, 0)).unwrap();
        let lam = RegularizationSequence::constant(0.0, 10).unwrap();
        let fit = fit(&inst, &lam, FitOptions { tol: 1e-12, max_iter: 100_000 }).unwrap();
        let x = Array1::from(fit.beta_hat.clone());
        let grad = inst.a.t().dot(&(inst.a.dot(&x) - &inst.y));
        let gn = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(gn < 1e-9, "gradient norm {gn}");
    }

    #[test]
    fn rejects_non_finite_data() {
        let mut inst = generate_instance(&fig3(1.0), 6, RngStream::new(3, 0)).unwrap();
        inst.y[0] = f64::NAN;
        let lam = RegularizationSequence::constant(1.0, 6).unwrap();
        assert_eq!(fit(&inst, &lam, FitOptions::default()), Err(Error::NonFinite("response")));
    }

    #[test]
    fn max_iter_is_flagged() {
        let inst = generate_instance(&fig3(0.64), 64, RngStream::new(9, 0)).unwrap();
        let lam = RegularizationSequence::constant(0.3, 64).unwrap();
        let fit = fit(&inst, &lam, FitOptions { tol: 1e-14, max_iter: 3 }).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 3);
    }

    #[test]
    fn metrics_examples() {
        let beta = [0.0, 2.0, 0.0, -1.0];
        let perfect = metrics_from(&beta, &beta, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(perfect.mse, 0.0);
        assert_eq!(perfect.type_i, Some(0.0));
        assert_eq!(perfect.power, Some(1.0));
        let empty = metrics_from(&[0.0; 4], &beta, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(empty.power, Some(0.0));
        assert_eq!(empty.fdp, 0.0);
        let noisy = metrics_from(&[0.5, 2.0, 0.0, 0.0], &beta, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(noisy.fdp, 0.5);
        assert_eq!(noisy.type_i, Some(0.5));
        let no_nulls = metrics_from(&[1.0], &[1.0], 0.0).unwrap();
        assert_eq!(no_nulls.type_i, None);
    }
}

//! The limiting scalar function η of the sorted-ℓ1 prox.
//!
//! When `y` and `λ` are regular sequences of the laws `F_|y|` and `F_λ`, the prox
//! acts coordinate-wise in the limit: `prox_λ(y)_i ≈ η(y_i)`. η is odd,
//! nondecreasing and 1-Lipschitz. It is built here by running the discrete
//! pooling on an `m`-point regular sequence.

use std::io::Write;

use serde::Serialize;

use crate::distributions::{regular_sequence, QuantileFunction};
use crate::error::{check_dim, domain};
use crate::sorted_l1::{pool_nondecreasing, prox, RegularizationSequence, Segment};
use crate::{Error, Result};

/// Tolerance on slopes when checking membership in the class of valid η.
pub const SLOPE_TOL: f64 = 1e-9;

/// Default number of regular-sequence points behind a built η.
pub const DEFAULT_GRID: usize = 4096;

/// Odd piecewise-linear function on knots `0 = y_0 < y_1 < … < y_m`, continued
/// linearly with `tail_slope` beyond `y_m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
    tail_slope: f64,
}

impl ScalarFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, tail_slope: f64) -> Result<Self> {
        check_dim(knots.len(), values.len())?;
        if knots.len() < 2 {
            return Err(domain("knots", "need at least two knots"));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) || !tail_slope.is_finite() {
            return Err(Error::NonFinite("scalar function"));
        }
        if knots[0] != 0.0 || values[0] != 0.0 {
            return Err(domain("knots", "first knot must be (0, 0)"));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("knots", "must be strictly increasing"));
        }
        Ok(Self {
            knots,
            values,
            tail_slope,
        })
    }

    pub fn zero() -> Self {
        Self {
            knots: vec![0.0, 1.0],
            values: vec![0.0, 0.0],
            tail_slope: 0.0,
        }
    }

    pub fn identity() -> Self {
        Self {
            knots: vec![0.0, 1.0],
            values: vec![0.0, 1.0],
            tail_slope: 1.0,
        }
    }

    /// `sign(y)·max(|y| − t, 0)`.
    pub fn soft_threshold(t: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(domain("threshold", format!("must be finite and >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(Self::identity());
        }
        Ok(Self {
            knots: vec![0.0, t],
            values: vec![0.0, 0.0],
            tail_slope: 1.0,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_slope(&self) -> f64 {
        self.tail_slope
    }

    /// Slope on each cell `[y_k, y_{k+1}]`.
    pub fn cell_slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(y, v)| (v[1] - v[0]) / (y[1] - y[0]))
            .collect()
    }

    pub fn eval(&self, y: f64) -> f64 {
        let a = y.abs();
        let m = self.knots.len() - 1;
        let v = if a >= self.knots[m] {
            self.values[m] + self.tail_slope * (a - self.knots[m])
        } else {
            let k = self.knots.partition_point(|&x| x <= a) - 1;
            let (y0, y1) = (self.knots[k], self.knots[k + 1]);
            let (v0, v1) = (self.values[k], self.values[k + 1]);
            v0 + (v1 - v0) * ((a - y0) / (y1 - y0))
        };
        if y < 0.0 {
            -v
        } else {
            v
        }
    }

    /// Right derivative η′(y⁺).
    pub fn eval_derivative(&self, y: f64) -> f64 {
        let m = self.knots.len() - 1;
        let a = y.abs();
        // cell index whose interior lies just right of y
        let k = if y >= 0.0 {
            self.knots.partition_point(|&x| x <= a)
        } else {
            self.knots.partition_point(|&x| x < a)
        };
        if k == 0 {
            return self.cell_slope(0);
        }
        if k > m {
            return self.tail_slope;
        }
        self.cell_slope(k - 1)
    }

    fn cell_slope(&self, k: usize) -> f64 {
        (self.values[k + 1] - self.values[k]) / (self.knots[k + 1] - self.knots[k])
    }

    /// `sup{y ≥ 0 : η(y) = 0}`; infinite for η ≡ 0.
    pub fn zero_threshold(&self) -> f64 {
        let j = self.values.partition_point(|&v| v <= 0.0);
        if j == self.values.len() {
            if self.tail_slope > 0.0 {
                self.knots[j - 1]
            } else {
                f64::INFINITY
            }
        } else {
            self.knots[j - 1]
        }
    }

    /// `y ↦ c·η(y)`.
    pub fn scale_values(&self, c: f64) -> Self {
        Self {
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            tail_slope: self.tail_slope * c,
        }
    }

    /// Two-column `y,eta` table with a header line.
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "y,eta")?;
        for (y, v) in self.knots.iter().zip(&self.values) {
            writeln!(out, "{y:.17e},{v:.17e}")?;
        }
        Ok(())
    }
}

/// Output of [`build_limiting_eta`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitingEta {
    pub eta: ScalarFunction,
    /// Pooled blocks of the discrete construction, as index ranges of the
    /// regular sequence; empty for closed-form cases.
    pub segments: Vec<Segment>,
    /// Set when `F_y` is a point mass at 0 and η was returned as zero.
    pub degenerate: bool,
}

/// Reusable builder for a fixed `F_y`: scaling the λ law by τ only re-runs the pooling.
#[derive(Debug, Clone)]
pub struct EtaBuilder {
    ys: Vec<f64>,
    ls: Vec<f64>,
    knots: Vec<f64>,
    /// first regular-sequence index of each knot after 0
    group_start: Vec<usize>,
    constant_lambda: Option<f64>,
}

impl EtaBuilder {
    pub fn new<Y, L>(f_y: &Y, f_lambda: &L, m: usize) -> Result<Self>
    where
        Y: QuantileFunction + ?Sized,
        L: QuantileFunction + ?Sized,
    {
        if m < 16 {
            return Err(domain("m", format!("must be >= 16, got {m}")));
        }
        let ys: Vec<f64> = regular_sequence(f_y, m)?.into_iter().map(|v| v.max(0.0)).collect();
        let ls: Vec<f64> = regular_sequence(f_lambda, m)?.into_iter().map(|v| v.max(0.0)).collect();
        if ys.iter().chain(&ls).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regular sequence"));
        }
        Ok(Self::from_sequences(ys, ls))
    }

    /// From already sorted nonnegative sequences of equal length.
    pub fn from_sequences(ys: Vec<f64>, ls: Vec<f64>) -> Self {
        assert_eq!(ys.len(), ls.len());
        let mut knots = vec![0.0];
        let mut group_start = Vec::new();
        for (i, &y) in ys.iter().enumerate() {
            if y > *knots.last().unwrap() {
                knots.push(y);
                group_start.push(i);
            }
        }
        let constant_lambda = (ls[0] == ls[ls.len() - 1]).then_some(ls[0]);
        Self {
            ys,
            ls,
            knots,
            group_start,
            constant_lambda,
        }
    }

    pub fn abs_sequence(&self) -> &[f64] {
        &self.ys
    }

    pub fn lambda_sequence(&self) -> &[f64] {
        &self.ls
    }

    /// Knots shared by every non-closed-form η this builder produces.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// η for the λ law scaled by `tau`.
    pub fn build(&self, tau: f64) -> LimitingEta {
        if self.knots.len() < 2 {
            return LimitingEta {
                eta: ScalarFunction::zero(),
                segments: Vec::new(),
                degenerate: true,
            };
        }
        if let Some(l) = self.constant_lambda {
            return LimitingEta {
                eta: ScalarFunction::soft_threshold(tau * l).expect("nonnegative threshold"),
                segments: Vec::new(),
                degenerate: false,
            };
        }
        let mut g: Vec<f64> = self.ys.iter().zip(&self.ls).map(|(y, l)| y - tau * l).collect();
        let mut segments = Vec::new();
        pool_nondecreasing(&mut g, &mut segments);
        let mut values = Vec::with_capacity(self.knots.len());
        values.push(0.0);
        for (gi, &start) in self.group_start.iter().enumerate() {
            let end = self.group_start.get(gi + 1).copied().unwrap_or(self.ys.len());
            let mean = g[start..end].iter().sum::<f64>() / (end - start) as f64;
            values.push(mean.max(0.0));
        }
        for i in 1..values.len() {
            // pooled values are nondecreasing; this only removes averaging dust
            if values[i] < values[i - 1] {
                values[i] = values[i - 1];
            }
        }
        LimitingEta {
            eta: ScalarFunction::new(self.knots.clone(), values, 1.0).expect("valid knots"),
            segments,
            degenerate: false,
        }
    }
}

/// η(·; F_y, F_λ) from `m`-point regular sequences, where `f_y` is the law of |Y|.
pub fn build_limiting_eta<Y, L>(f_y: &Y, f_lambda: &L, m: usize) -> Result<LimitingEta>
where
    Y: QuantileFunction + ?Sized,
    L: QuantileFunction + ?Sized,
{
    Ok(EtaBuilder::new(f_y, f_lambda, m)?.build(1.0))
}

/// `(1/p) Σ (prox_λ(y)_i − η(y_i))²`.
pub fn separability_gap(lambda: &RegularizationSequence, y: &[f64], eta: &ScalarFunction) -> Result<f64> {
    let x = prox(lambda, y)?;
    let p = y.len() as f64;
    Ok(x.iter().zip(y).map(|(a, &b)| (a - eta.eval(b)).powi(2)).sum::<f64>() / p)
}

/// A broken membership condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Violation {
    /// η(0) ≠ 0.
    NonzeroOrigin { value: f64 },
    /// cell `[y_k, y_{k+1}]` has slope outside [0, 1]
    Slope { knot: usize, y: f64, slope: f64 },
    /// slope beyond the last knot outside [0, 1]
    TailSlope { slope: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub violations: Vec<Violation>,
}

impl MembershipReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that η is nondecreasing and 1-Lipschitz (oddness holds by construction).
pub fn validate_membership(eta: &ScalarFunction) -> MembershipReport {
    let mut violations = Vec::new();
    if eta.values[0] != 0.0 {
        violations.push(Violation::NonzeroOrigin { value: eta.values[0] });
    }
    let ok = |s: f64| (-SLOPE_TOL..=1.0 + SLOPE_TOL).contains(&s);
    for (k, s) in eta.cell_slopes().into_iter().enumerate() {
        if !ok(s) {
            violations.push(Violation::Slope {
                knot: k,
                y: eta.knots[k],
                slope: s,
            });
        }
    }
    if !ok(eta.tail_slope) {
        violations.push(Violation::TailSlope { slope: eta.tail_slope });
    }
    MembershipReport { violations }
}

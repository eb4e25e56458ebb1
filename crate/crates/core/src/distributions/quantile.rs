use serde::Serialize;

use super::normal;
use super::prior::ObservationLaw;
use crate::error::domain;
use crate::{Error, Result};

/// Anything with a generalized inverse CDF u ↦ inf{x : F(x) ≥ u}.
pub trait QuantileFunction {
    /// Unchecked evaluation; callers guarantee u ∈ (0, 1).
    fn quantile_at(&self, u: f64) -> f64;

    /// Evaluation at an increasing list of probabilities.
    fn quantiles_at(&self, us: &[f64]) -> Vec<f64> {
        us.iter().map(|&u| self.quantile_at(u)).collect()
    }
}

/// How a [`QuantileTable`] is read between its grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Atomic law: value `q_i` is returned on the whole cell `(u_{i-1}, u_i]`.
    Step,
    /// Continuous law: linear interpolation between `(u_i, q_i)`, flat outside the grid.
    Linear,
}

/// Tabulated quantile function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileTable {
    grid: Vec<f64>,
    values: Vec<f64>,
    interp: Interpolation,
}

impl QuantileTable {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, interp: Interpolation) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::InvalidTable(format!(
                "grid has {} points, values {}",
                grid.len(),
                values.len()
            )));
        }
        if grid.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quantile table"));
        }
        if grid[0] < 0.0 || grid[grid.len() - 1] > 1.0 {
            return Err(Error::InvalidTable("grid must lie in [0, 1]".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTable("grid must be strictly increasing".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidTable("values must be nondecreasing".into()));
        }
        Ok(Self { grid, values, interp })
    }

    /// Step table of a finite discrete law given as `(location, mass)` pairs.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.iter().copied().filter(|a| a.1 > 0.0).collect();
        if atoms.is_empty() {
            return Err(Error::InvalidTable("no atom with positive mass".into()));
        }
        if atoms.iter().any(|a| !a.0.is_finite() || !a.1.is_finite()) {
            return Err(Error::NonFinite("atom table"));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidTable(format!("atom masses sum to {total}")));
        }
        let mut grid = Vec::with_capacity(atoms.len());
        let mut values = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for (loc, mass) in atoms {
            acc += mass;
            if values.last() == Some(&loc) {
                *grid.last_mut().unwrap() = acc.min(1.0);
            } else {
                grid.push(acc.min(1.0));
                values.push(loc);
            }
        }
        *grid.last_mut().unwrap() = 1.0;
        Self::new(grid, values, Interpolation::Step)
    }

    /// Point mass at `c`.
    pub fn constant(c: f64) -> Result<Self> {
        Self::from_atoms(&[(c, 1.0)])
    }

    /// Linear table of an arbitrary quantile function on `u_i = (i − ½)/n`.
    pub fn tabulate<Q: QuantileFunction + ?Sized>(q: &Q, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(domain("n", "table needs at least one point"));
        }
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let values = q.quantiles_at(&grid);
        Self::new(grid, values, Interpolation::Linear)
    }

    /// Linear table through sorted samples at the plotting positions `(i − ½)/n`.
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("samples"));
        }
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let grid = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        Self::new(grid, samples, Interpolation::Linear)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interp
    }

    /// The table of c·X.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(domain("scale", format!("must be finite and >= 0, got {c}")));
        }
        Self::new(
            self.grid.clone(),
            self.values.iter().map(|v| v * c).collect(),
            self.interp,
        )
    }

    pub fn min_value(&self) -> f64 {
        self.values[0]
    }

    pub fn max_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Whether every value is the same number.
    pub fn is_constant(&self) -> bool {
        self.min_value() == self.max_value()
    }

    fn eval(&self, u: f64) -> f64 {
        let n = self.grid.len();
        // first index with grid[i] >= u
        let i = self.grid.partition_point(|&g| g < u);
        match self.interp {
            Interpolation::Step => self.values[i.min(n - 1)],
            Interpolation::Linear => {
                if i == 0 {
                    self.values[0]
                } else if i == n {
                    self.values[n - 1]
                } else {
                    let (u0, u1) = (self.grid[i - 1], self.grid[i]);
                    let (q0, q1) = (self.values[i - 1], self.values[i]);
                    let t = (u - u0) / (u1 - u0);
                    (q0 + t * (q1 - q0)).clamp(q0, q1)
                }
            }
        }
    }
}

impl QuantileFunction for QuantileTable {
    fn quantile_at(&self, u: f64) -> f64 {
        self.eval(u)
    }
}

/// N(0, 1).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StandardNormal;

impl QuantileFunction for StandardNormal {
    fn quantile_at(&self, u: f64) -> f64 {
        normal::inv_cdf(u)
    }
}

/// |Z| for Z ~ N(0, s²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfNormal {
    pub scale: f64,
}

impl QuantileFunction for HalfNormal {
    fn quantile_at(&self, u: f64) -> f64 {
        self.scale * normal::inv_cdf(0.5 + 0.5 * u)
    }
}

/// Uniform on [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    pub lo: f64,
    pub hi: f64,
}

impl QuantileFunction for Uniform {
    fn quantile_at(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }
}

/// |Y| for Y = B + σZ.
impl QuantileFunction for ObservationLaw {
    fn quantile_at(&self, u: f64) -> f64 {
        self.abs_quantile(u)
    }

    fn quantiles_at(&self, us: &[f64]) -> Vec<f64> {
        self.abs_quantiles(us)
    }
}

impl<Q: QuantileFunction + ?Sized> QuantileFunction for &Q {
    fn quantile_at(&self, u: f64) -> f64 {
        (**self).quantile_at(u)
    }

    fn quantiles_at(&self, us: &[f64]) -> Vec<f64> {
        (**self).quantiles_at(us)
    }
}

/// F⁻¹(u) for u ∈ (0, 1).
pub fn quantile<Q: QuantileFunction + ?Sized>(q: &Q, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(domain("u", format!("must lie in (0, 1), got {u}")));
    }
    Ok(q.quantile_at(u))
}

/// The grid `i/(p+1)`, `i = 1..=p`.
pub fn regular_grid(p: usize) -> Vec<f64> {
    let d = (p + 1) as f64;
    (1..=p).map(|i| i as f64 / d).collect()
}

/// `(F⁻¹(i/(p+1)))_{i=1..p}`.
pub fn regular_sequence<Q: QuantileFunction + ?Sized>(q: &Q, p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(domain("p", "must be >= 1"));
    }
    let mut out = q.quantiles_at(&regular_grid(p));
    // guard against round-off in non-tabulated quantile functions
    for i in 1..out.len() {
        if out[i] < out[i - 1] {
            out[i] = out[i - 1];
        }
    }
    Ok(out)
}

//! Exact Gaussian-mixture expectations of piecewise-linear odd functions.
//!
//! For η odd and linear between knots `0 = y_0 < … < y_m`, with values `v` and a
//! linear tail beyond `y_m`, the risk `E[(η(Y) − B)²]` under `Y = B + σZ` is a
//! quadratic form `vᵀHv − 2bᵀv + c` with tridiagonal `H`. Every entry is an
//! integral of a polynomial against a Gaussian density over one cell.

use super::normal;
use super::prior::ObservationLaw;
use super::quadrature::{legendre8, QuadratureRule};

/// Behaviour of η beyond the last knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// η(y) = v_m + slope·(y − y_m).
    Fixed(f64),
    /// The last cell's slope continues.
    ExtendLast,
}

/// A folded mixture component on y ≥ 0: density `mass·φ((y − mean)/sd)/sd` and
/// posterior mean `intercept + slope·y`.
#[derive(Debug, Clone, Copy)]
struct Folded {
    mass: f64,
    mean: f64,
    sd: f64,
    intercept: f64,
    slope: f64,
}

fn fold(law: &ObservationLaw) -> Vec<Folded> {
    let mut out = Vec::with_capacity(2 * law.components().len());
    for c in law.components() {
        for s in [1.0, -1.0] {
            out.push(Folded {
                mass: c.mass,
                mean: s * c.mean,
                sd: c.sd,
                intercept: s * c.post_intercept,
                slope: c.post_slope,
            });
        }
    }
    out
}

/// `[∫ ξ^j f(x) dx]_{j=0,1,2}` with `ξ = (x − origin)/scale` over `[lo, hi]`
/// for the N(mean, sd²) density `f`.
fn local_moments(lo: f64, hi: f64, origin: f64, scale: f64, mean: f64, sd: f64) -> [f64; 3] {
    let width = hi - lo;
    if width.is_finite() && width <= 0.5 * sd {
        // the closed form cancels badly on short pieces
        rule_moments(legendre8(), lo, hi, origin, scale, mean, sd)
    } else {
        closed_moments(lo, hi, origin, scale, mean, sd)
    }
}

fn rule_moments(rule: &QuadratureRule, lo: f64, hi: f64, origin: f64, scale: f64, mean: f64, sd: f64) -> [f64; 3] {
    let width = hi - lo;
    let mut m = [0.0; 3];
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let x = lo + width * t;
        let f = w * width * normal::pdf((x - mean) / sd) / sd;
        let xi = (x - origin) / scale;
        m[0] += f;
        m[1] += f * xi;
        m[2] += f * xi * xi;
    }
    m
}

fn closed_moments(lo: f64, hi: f64, origin: f64, scale: f64, mean: f64, sd: f64) -> [f64; 3] {
    let za = (lo - mean) / sd;
    let zb = (hi - mean) / sd;
    let j0 = normal::interval_prob(za, zb);
    let j1 = normal::pdf_ext(za) - normal::pdf_ext(zb);
    let j2 = j0 + normal::x_pdf(za) - normal::x_pdf(zb);
    let c = (mean - origin) / scale;
    let d = sd / scale;
    [j0, c * j0 + d * j1, c * c * j0 + 2.0 * c * d * j1 + d * d * j2]
}

/// E over a piece of the product of two linear functions of ξ.
fn pair(m: &[f64; 3], x: (f64, f64), y: (f64, f64)) -> f64 {
    x.0 * y.0 * m[0] + (x.0 * y.1 + x.1 * y.0) * m[1] + x.1 * y.1 * m[2]
}

/// Precomputed quadratic form of the risk over a fixed knot grid.
#[derive(Debug, Clone)]
pub struct PiecewiseRisk {
    knots: Vec<f64>,
    tail: Tail,
    diag: Vec<f64>,
    off: Vec<f64>,
    lin: Vec<f64>,
    constant: f64,
    within: f64,
    cell_mass: Vec<f64>,
    tail_mass: f64,
}

impl PiecewiseRisk {
    /// `knots` must start at 0 and be strictly increasing, with at least two entries.
    pub fn new(law: &ObservationLaw, knots: &[f64], tail: Tail) -> Self {
        assert!(knots.len() >= 2 && knots[0] == 0.0, "grid must start at 0 and have a cell");
        assert!(knots.windows(2).all(|w| w[1] > w[0]), "knots must be strictly increasing");
        let m = knots.len() - 1;
        let mut diag = vec![0.0; m + 1];
        let mut off = vec![0.0; m];
        let mut lin = vec![0.0; m + 1];
        let mut constant = 0.0;
        let mut cell_mass = vec![0.0; m];
        let mut tail_mass = 0.0;
        for c in fold(law) {
            for k in 0..m {
                let (lo, hi) = (knots[k], knots[k + 1]);
                let width = hi - lo;
                let mo = local_moments(lo, hi, lo, width, c.mean, c.sd);
                let mo = mo.map(|v| v * c.mass);
                let left = (1.0, -1.0);
                let right = (0.0, 1.0);
                let target = (c.intercept + c.slope * lo, c.slope * width);
                diag[k] += pair(&mo, left, left);
                diag[k + 1] += pair(&mo, right, right);
                off[k] += pair(&mo, left, right);
                lin[k] += pair(&mo, left, target);
                lin[k + 1] += pair(&mo, right, target);
                constant += pair(&mo, target, target);
                cell_mass[k] += mo[0];
            }
            let ym = knots[m];
            let mo = local_moments(ym, f64::INFINITY, ym, 1.0, c.mean, c.sd).map(|v| v * c.mass);
            tail_mass += mo[0];
            match tail {
                Tail::Fixed(t) => {
                    let basis = (1.0, 0.0);
                    let target = (c.intercept + c.slope * ym, c.slope - t);
                    diag[m] += pair(&mo, basis, basis);
                    lin[m] += pair(&mo, basis, target);
                    constant += pair(&mo, target, target);
                }
                Tail::ExtendLast => {
                    let d = knots[m] - knots[m - 1];
                    let left = (0.0, -1.0 / d);
                    let right = (1.0, 1.0 / d);
                    let target = (c.intercept + c.slope * ym, c.slope);
                    diag[m - 1] += pair(&mo, left, left);
                    diag[m] += pair(&mo, right, right);
                    off[m - 1] += pair(&mo, left, right);
                    lin[m - 1] += pair(&mo, left, target);
                    lin[m] += pair(&mo, right, target);
                    constant += pair(&mo, target, target);
                }
            }
        }
        Self {
            knots: knots.to_vec(),
            tail,
            diag,
            off,
            lin,
            constant,
            within: law.within_component_variance(),
            cell_mass,
            tail_mass,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// P(|Y| ∈ [y_k, y_{k+1})) for each cell.
    pub fn cell_mass(&self) -> &[f64] {
        &self.cell_mass
    }

    /// P(|Y| ≥ y_m).
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Diagonal of H (index 0 belongs to the pinned value η(0) = 0).
    pub fn hessian_diag(&self) -> &[f64] {
        &self.diag
    }

    /// Super-diagonal of H.
    pub fn hessian_off(&self) -> &[f64] {
        &self.off
    }

    pub fn linear(&self) -> &[f64] {
        &self.lin
    }

    /// E[(η(Y) − E(B|Y))²]-part constant plus E Var(B | Y).
    pub fn constant(&self) -> f64 {
        self.constant + self.within
    }

    /// (Hv)_k.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let m = self.diag.len();
        for k in 0..m {
            let mut s = self.diag[k] * v[k];
            if k > 0 {
                s += self.off[k - 1] * v[k - 1];
            }
            if k + 1 < m {
                s += self.off[k] * v[k + 1];
            }
            out[k] = s;
        }
    }

    /// E[(η(Y) − B)²] for knot values `v` (with `v[0] = 0`).
    pub fn risk(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.knots.len());
        let m = self.diag.len();
        let mut q = 0.0;
        for k in 0..m {
            q += v[k] * (self.diag[k] * v[k] - 2.0 * self.lin[k]);
            if k + 1 < m {
                q += 2.0 * self.off[k] * v[k] * v[k + 1];
            }
        }
        (q + self.constant + self.within).max(0.0)
    }

    /// Slope of η in each cell and in the tail.
    pub fn slopes(&self, v: &[f64]) -> (Vec<f64>, f64) {
        let s: Vec<f64> = self
            .knots
            .windows(2)
            .zip(v.windows(2))
            .map(|(y, v)| (v[1] - v[0]) / (y[1] - y[0]))
            .collect();
        let t = match self.tail {
            Tail::Fixed(t) => t,
            Tail::ExtendLast => s[s.len() - 1],
        };
        (s, t)
    }

    /// E[η′(Y)].
    pub fn mean_derivative(&self, v: &[f64]) -> f64 {
        let (s, t) = self.slopes(v);
        s.iter().zip(&self.cell_mass).map(|(a, b)| a * b).sum::<f64>() + t * self.tail_mass
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::prior::{GaussianComponent, PriorSpec};
    use crate::distributions::quadrature::gauss_hermite;

    fn eval(knots: &[f64], v: &[f64], tail: f64, y: f64) -> f64 {
        let a = y.abs();
        let m = knots.len() - 1;
        let val = if a >= knots[m] {
            v[m] + tail * (a - knots[m])
        } else {
            let k = knots.partition_point(|&x| x <= a) - 1;
            v[k] + (v[k + 1] - v[k]) * (a - knots[k]) / (knots[k + 1] - knots[k])
        };
        if y < 0.0 {
            -val
        } else {
            val
        }
    }

    /// E[(η(B+σZ) − B)²] by brute-force composite Simpson in y over each mixture
    /// component.
    fn brute_risk(prior: &PriorSpec, sigma: f64, knots: &[f64], v: &[f64], tail: f64) -> f64 {
        let law = prior.observation(sigma);
        let mut total = 0.0;
        for c in law.components() {
            let lo = c.mean - 12.0 * c.sd;
            let hi = c.mean + 12.0 * c.sd;
            let n = 400_000;
            let h = (hi - lo) / n as f64;
            let mut s = 0.0;
            for i in 0..=n {
                let y = lo + i as f64 * h;
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let e = eval(knots, v, tail, y) - c.post_intercept - c.post_slope * y;
                s += w * normal::pdf((y - c.mean) / c.sd) / c.sd * (e * e + c.post_var);
            }
            total += c.mass * s * h / 3.0;
        }
        total
    }

    #[test]
    fn risk_matches_brute_force_integration() {
        let prior = PriorSpec::new(
            vec![crate::distributions::Atom { location: 0.0, mass: 0.6 }],
            vec![GaussianComponent { mean: 1.5, sd: 0.7, mass: 0.4 }],
            0.5,
            0.8,
        )
        .unwrap();
        let sigma = 0.9;
        let knots = [0.0, 0.1, 0.35, 0.4, 1.2, 2.0, 5.0];
        let v = [0.0, 0.0, 0.1, 0.12, 0.8, 1.5, 4.2];
        let law = prior.observation(sigma);
        let form = PiecewiseRisk::new(&law, &knots, Tail::Fixed(1.0));
        let exact = form.risk(&v);
        let brute = brute_risk(&prior, sigma, &knots, &v, 1.0);
        assert!((exact - brute).abs() < 1e-10, "{exact} vs {brute}");

        let ext = PiecewiseRisk::new(&law, &knots, Tail::ExtendLast);
        let brute_ext = brute_risk(&prior, sigma, &knots, &v, (4.2 - 1.5) / 3.0);
        assert!((ext.risk(&v) - brute_ext).abs() < 1e-10);
    }

    #[test]
    fn short_piece_rule_order_is_immaterial() {
        let g16 = crate::distributions::quadrature::gauss_legendre_unit(16);
        for &(lo, width, mean, sd) in &[(0.0, 0.3, 0.0, 1.0), (1.2, 0.05, 2.125, 0.25), (-3.0, 0.4, 0.5, 0.8), (4.0, 0.1, 0.0, 0.3)] {
            let hi = lo + width;
            let a = rule_moments(legendre8(), lo, hi, lo, width, mean, sd);
            let b = rule_moments(&g16, lo, hi, lo, width, mean, sd);
            let c = closed_moments(lo, hi, lo, width, mean, sd);
            for j in 0..3 {
                let scale = c[0].abs().max(1e-300);
                assert!((a[j] - b[j]).abs() <= 1e-10 * scale, "{j}: {} vs {}", a[j], b[j]);
                assert!((a[j] - c[j]).abs() <= 1e-14, "{j}: {} vs {}", a[j], c[j]);
            }
        }
    }

    #[test]
    fn masses_and_derivative() {
        let prior = PriorSpec::sparse_point(0.3, 2.0, 1.0, 1.0).unwrap();
        let law = prior.observation(1.0);
        let knots = [0.0, 0.5, 1.0, 3.0];
        let form = PiecewiseRisk::new(&law, &knots, Tail::Fixed(1.0));
        let total: f64 = form.cell_mass().iter().sum::<f64>() + form.tail_mass();
        assert!((total - 1.0).abs() < 1e-14);
        assert!((form.tail_mass() - law.abs_sf(3.0)).abs() < 1e-15);
        // soft threshold at 0.5: E η' = P(|Y| > 0.5)
        let v = [0.0, 0.0, 0.5, 2.5];
        assert!((form.mean_derivative(&v) - law.abs_sf(0.5)).abs() < 1e-14);
    }

    #[test]
    fn stein_identity_cross_check() {
        // σ E[η'(Y)] = E[Z η(Y)] for Y = B + σZ, checked with Gauss-Hermite on a smooth-ish η
        let prior = PriorSpec::sparse_point(0.25, 2.125, 0.25, 0.64).unwrap();
        let sigma = 0.8;
        let knots: Vec<f64> = (0..=400).map(|i| i as f64 * 0.02).collect();
        let v: Vec<f64> = knots.iter().map(|&y| y - (y * 1.3).tanh()).collect();
        let law = prior.observation(sigma);
        let form = PiecewiseRisk::new(&law, &knots, Tail::Fixed(1.0));
        let lhs = sigma * form.mean_derivative(&v);
        let gh = gauss_hermite(200).unwrap();
        let rhs: f64 = prior
            .atoms()
            .iter()
            .map(|a| a.mass * gh.integrate(|z| z * eval(&knots, &v, 1.0, a.location + sigma * z)))
            .sum();
        assert!((lhs - rhs).abs() < 1e-4, "{lhs} vs {rhs}");
    }
}

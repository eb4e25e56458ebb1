//! Gaussian quadrature rules.

use std::sync::OnceLock;

use crate::{Error, Result};

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Σ wᵢ f(xᵢ).
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Guess for the (i+1)-th largest root of the physicists' H_n: solve
/// θ − sin θ cos θ = (4i + 3)π/(4n + 2) and take √(2n+1)·cos θ.
fn initial_root(n: usize, i: usize) -> f64 {
    let r = (2.0 * n as f64 + 1.0).sqrt();
    let target = (4.0 * i as f64 + 3.0) * std::f64::consts::PI / (4.0 * n as f64 + 2.0);
    let mut theta = target.cbrt().min(std::f64::consts::FRAC_PI_2);
    for _ in 0..60 {
        let f = theta - theta.sin() * theta.cos() - target;
        let d = 2.0 * theta.sin().powi(2);
        if d == 0.0 {
            break;
        }
        let next = (theta - f / d).clamp(1e-12, std::f64::consts::FRAC_PI_2);
        if (next - theta).abs() < 1e-15 {
            theta = next;
            break;
        }
        theta = next;
    }
    r * theta.cos()
}

/// Gauss–Hermite rule for E[f(Z)], Z ~ N(0, 1): weights sum to one and the rule is
/// exact for polynomials of degree ≤ 2n − 1.
///
/// Roots of the orthonormal Hermite recurrence are located by Newton's method
/// from WKB initial guesses. Orders above 256 are rejected.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > 256 {
        return Err(Error::QuadratureOrder(n));
    }
    // π^{-1/4}
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = initial_root(n, i);
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z1.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // Physicists' rule (weight e^{-x²}) → probabilists' (standard normal density).
    let scale = std::f64::consts::PI.sqrt().recip();
    let mut nodes: Vec<f64> = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let mut weights: Vec<f64> = w.iter().map(|v| v * scale).collect();
    nodes.reverse();
    weights.reverse();
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Gauss–Legendre rule on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> QuadratureRule {
    assert!(n >= 1);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        // map [-1, 1] → [0, 1]
        nodes[i] = 0.5 * (1.0 - z);
        nodes[n - 1 - i] = 0.5 * (1.0 + z);
        let wi = 1.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = wi;
        weights[n - 1 - i] = wi;
    }
    QuadratureRule { nodes, weights }
}

/// Shared 8-point Gauss–Legendre rule on [0, 1] used for short integration pieces.
pub(crate) fn legendre8() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_unit(8))
}

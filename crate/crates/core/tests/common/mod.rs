//! Reference solvers shared by the integration tests. Everything here goes
//! through a generic interior-point QP solver, independent of the crate's own
//! algorithms.
#![allow(dead_code)]

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SupportedConeT};
use slope_core::design::InnerProblem;

fn settings() -> DefaultSettings<f64> {
    DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-12,
        tol_gap_rel: 1e-12,
        tol_feas: 1e-12,
        max_iter: 400,
        ..DefaultSettings::default()
    }
}

/// Triplet builder for `A z ≤ b`.
#[derive(Default)]
struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    fn push(&mut self, entries: &[(usize, f64)], rhs: f64) {
        let r = self.b.len();
        for &(j, v) in entries {
            self.i.push(r);
            self.j.push(j);
            self.v.push(v);
        }
        self.b.push(rhs);
    }
}

/// `argmin_x ½xᵀQx + qᵀx + J_λ(x)` with `Q` dense symmetric positive semidefinite.
///
/// The sorted-ℓ1 norm enters through its top-k representation:
/// `J_λ(x) = Σ_k (λ_k − λ_{k−1}) top_{p−k+1}(|x|)` and
/// `top_r(u) = min_t r·t + Σ_i (u_i − t)⁺`.
pub fn sorted_l1_qp(quad: &[Vec<f64>], lin: &[f64], lambda: &[f64]) -> Vec<f64> {
    let p = lin.len();
    let mut levels = Vec::new();
    let mut prev = 0.0;
    for (k, &l) in lambda.iter().enumerate() {
        if l - prev > 0.0 {
            levels.push((p - k, l - prev));
        }
        prev = l;
    }
    // z = [x, u, (t_k, s_k1..s_kp) per level]
    let nvar = 2 * p + levels.len() * (p + 1);
    let (mut pi, mut pj, mut pv) = (vec![], vec![], vec![]);
    for j in 0..p {
        for i in 0..=j {
            if quad[i][j] != 0.0 {
                pi.push(i);
                pj.push(j);
                pv.push(quad[i][j]);
            }
        }
    }
    let pm = CscMatrix::new_from_triplets(nvar, nvar, pi, pj, pv);
    let mut q = vec![0.0; nvar];
    q[..p].copy_from_slice(lin);
    let mut rows = Rows::default();
    for i in 0..p {
        rows.push(&[(i, 1.0), (p + i, -1.0)], 0.0);
        rows.push(&[(i, -1.0), (p + i, -1.0)], 0.0);
    }
    for (l, &(r, c)) in levels.iter().enumerate() {
        let t = 2 * p + l * (p + 1);
        q[t] = c * r as f64;
        for i in 0..p {
            let s = t + 1 + i;
            q[s] = c;
            rows.push(&[(p + i, 1.0), (t, -1.0), (s, -1.0)], 0.0);
            rows.push(&[(s, -1.0)], 0.0);
        }
    }
    let m = rows.b.len();
    let a = CscMatrix::new_from_triplets(m, nvar, rows.i, rows.j, rows.v);
    let cones = [SupportedConeT::NonnegativeConeT(m)];
    let mut solver = DefaultSolver::new(&pm, &q, &a, &rows.b, &cones, settings()).unwrap();
    solver.solve();
    solver.solution.x[..p].to_vec()
}

/// `argmin_x ½‖y − x‖² + J_λ(x)`.
pub fn prox_oracle(lambda: &[f64], y: &[f64]) -> Vec<f64> {
    let p = y.len();
    let quad: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let lin: Vec<f64> = y.iter().map(|v| -v).collect();
    sorted_l1_qp(&quad, &lin, lambda)
}

/// `argmin_b ½‖y − A b‖² + J_λ(b)` for a row-major `n × p` matrix.
pub fn slope_oracle(a: &[f64], n: usize, y: &[f64], lambda: &[f64]) -> Vec<f64> {
    let p = lambda.len();
    let mut quad = vec![vec![0.0; p]; p];
    let mut lin = vec![0.0; p];
    for r in 0..n {
        let row = &a[r * p..(r + 1) * p];
        for i in 0..p {
            lin[i] -= row[i] * y[r];
            for j in 0..p {
                quad[i][j] += row[i] * row[j];
            }
        }
    }
    sorted_l1_qp(&quad, &lin, lambda)
}

/// Plain sorted-ℓ1 norm, pairing the smallest weight with the smallest magnitude.
pub fn sorted_l1(lambda: &[f64], x: &[f64]) -> f64 {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(f64::total_cmp);
    a.iter().zip(lambda).map(|(u, l)| u * l).sum()
}

/// Dense slope-space form of the design inner objective: `sᵀ M s − 2 cᵀ s + const`.
fn dense_form(p: &InnerProblem) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = p.cells();
    let form = p.risk_form();
    let widths = p.widths();
    let pull_back = |hv: &[f64]| {
        let mut out = vec![0.0; m];
        let mut suffix = 0.0;
        for j in (0..m).rev() {
            suffix += hv[j + 1];
            out[j] = widths[j] * suffix;
        }
        out
    };
    let mut cols = Vec::with_capacity(m);
    for j in 0..m {
        let v: Vec<f64> = (0..=m).map(|k| if k > j { widths[j] } else { 0.0 }).collect();
        let mut hv = vec![0.0; m + 1];
        form.apply(&v, &mut hv);
        cols.push(pull_back(&hv));
    }
    (cols, pull_back(form.linear()))
}

/// Slopes minimizing the inner objective over the box and the derivative budget.
pub fn inner_qp_oracle(p: &InnerProblem, delta: f64) -> Vec<f64> {
    let m = p.cells();
    let (cols, c) = dense_form(p);
    let (mut pi, mut pj, mut pv) = (vec![], vec![], vec![]);
    for j in 0..m {
        for i in 0..=j {
            pi.push(i);
            pj.push(j);
            pv.push(cols[j][i] + cols[i][j]);
        }
    }
    let pm = CscMatrix::new_from_triplets(m, m, pi, pj, pv);
    let q: Vec<f64> = c.iter().map(|x| -2.0 * x).collect();
    let mut rows = Rows::default();
    for j in 0..m {
        rows.push(&[(j, -1.0)], 0.0);
    }
    for j in 0..m {
        rows.push(&[(j, 1.0)], p.upper_bounds()[j]);
    }
    let budget: Vec<(usize, f64)> = p.weights().iter().copied().enumerate().collect();
    rows.push(&budget, delta);
    let a = CscMatrix::new_from_triplets(2 * m + 1, m, rows.i, rows.j, rows.v);
    let cones = [SupportedConeT::NonnegativeConeT(2 * m + 1)];
    let mut solver = DefaultSolver::new(&pm, &q, &a, &rows.b, &cones, settings()).unwrap();
    solver.solve();
    solver.solution.x.iter().zip(p.upper_bounds()).map(|(&s, &u)| s.clamp(0.0, u)).collect()
}

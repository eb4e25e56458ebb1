//! Sorted-ℓ1 norm, its proximal operator and Moreau envelope.
//!
//! Convention: the λ sequence is nondecreasing and the smallest λ is paired with
//! the smallest |x|, so `J_λ(x) = Σ λ_i |x|_(i)` with `|x|_(1) ≤ … ≤ |x|_(p)`.

use serde::Serialize;

use crate::distributions::{regular_sequence, QuantileFunction};
use crate::error::{check_dim, domain};
use crate::{Error, Result};

/// A nondecreasing, nonnegative regularization sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizationSequence {
    lambdas: Vec<f64>,
}

impl RegularizationSequence {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidSequence("empty sequence".into()));
        }
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("regularization sequence"));
        }
        if lambdas[0] < 0.0 {
            return Err(Error::InvalidSequence(format!("negative entry {}", lambdas[0])));
        }
        if let Some(i) = lambdas.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidSequence(format!(
                "decreasing at index {}: {} > {}",
                i + 1,
                lambdas[i],
                lambdas[i + 1]
            )));
        }
        Ok(Self { lambdas })
    }

    /// λ0 repeated p times.
    pub fn constant(lambda0: f64, p: usize) -> Result<Self> {
        Self::new(vec![lambda0; p])
    }

    /// The regular converging sequence `F_λ⁻¹(i/(p+1))` of a λ distribution.
    pub fn from_distribution<Q: QuantileFunction + ?Sized>(q: &Q, p: usize) -> Result<Self> {
        Self::new(regular_sequence(q, p)?.into_iter().map(|v| v.max(0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.lambdas
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(domain("scale", format!("must be finite and >= 0, got {c}")));
        }
        Ok(Self {
            lambdas: self.lambdas.iter().map(|l| l * c).collect(),
        })
    }

    pub fn is_constant(&self) -> bool {
        self.lambdas[0] == self.lambdas[self.lambdas.len() - 1]
    }

    pub fn max(&self) -> f64 {
        self.lambdas[self.lambdas.len() - 1]
    }
}

/// `Σ λ_i |x|_(i)`.
pub fn sorted_l1_norm(lambda: &RegularizationSequence, x: &[f64]) -> Result<f64> {
    check_dim(lambda.len(), x.len())?;
    Ok(norm_unchecked(lambda.as_slice(), x))
}

pub(crate) fn norm_unchecked(lambda: &[f64], x: &[f64]) -> f64 {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_unstable_by(f64::total_cmp);
    a.iter().zip(lambda).map(|(a, l)| a * l).sum()
}

/// A run of sorted coordinates that share one averaged value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    /// first index, inclusive
    pub start: usize,
    /// last index, exclusive
    pub end: usize,
    pub mean: f64,
}

/// Replaces `g` by its nondecreasing least-squares fit (pooling adjacent
/// violators) and records the pooled blocks. Block means are strictly increasing.
pub fn pool_nondecreasing(g: &mut [f64], segments: &mut Vec<Segment>) {
    segments.clear();
    let mut sums: Vec<f64> = Vec::with_capacity(g.len());
    for (i, &v) in g.iter().enumerate() {
        let mut seg = Segment { start: i, end: i + 1, mean: v };
        let mut sum = v;
        while let Some(top) = segments.last() {
            if top.mean < seg.mean {
                break;
            }
            sum += sums.pop().unwrap();
            seg.start = top.start;
            seg.mean = sum / (seg.end - seg.start) as f64;
            segments.pop();
        }
        segments.push(seg);
        sums.push(sum);
    }
    for s in segments.iter() {
        g[s.start..s.end].fill(s.mean);
    }
}

/// Reusable buffers for repeated prox evaluations of one dimension.
#[derive(Debug, Clone, Default)]
pub struct ProxWorkspace {
    perm: Vec<usize>,
    work: Vec<f64>,
    segments: Vec<Segment>,
}

impl ProxWorkspace {
    pub fn new(p: usize) -> Self {
        Self {
            perm: Vec::with_capacity(p),
            work: Vec::with_capacity(p),
            segments: Vec::with_capacity(p),
        }
    }

    /// Permutation sorting |y| ascending from the last call (ties by index).
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Pooled blocks of the last call, in sorted order, before clipping at 0.
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Writes `prox_λ(y)` into `out`. Dimensions are not checked.
    pub fn prox_into(&mut self, lambda: &[f64], y: &[f64], out: &mut [f64]) {
        let p = y.len();
        self.perm.clear();
        self.perm.extend(0..p);
        self.perm.sort_by(|&a, &b| y[a].abs().total_cmp(&y[b].abs()));
        self.work.clear();
        self.work
            .extend(self.perm.iter().zip(lambda).map(|(&i, &l)| y[i].abs() - l));
        pool_nondecreasing(&mut self.work, &mut self.segments);
        for (&i, &v) in self.perm.iter().zip(&self.work) {
            out[i] = v.max(0.0).copysign(y[i]);
        }
    }
}

/// `argmin_x ½‖y − x‖² + J_λ(x)`.
pub fn prox(lambda: &RegularizationSequence, y: &[f64]) -> Result<Vec<f64>> {
    check_dim(lambda.len(), y.len())?;
    let mut out = vec![0.0; y.len()];
    ProxWorkspace::new(y.len()).prox_into(lambda.as_slice(), y, &mut out);
    Ok(out)
}

/// `min_v ‖x − v‖²/(2τ) + J_λ(v)`, attained at `v = prox_{τλ}(x)`.
pub fn moreau_envelope(lambda: &RegularizationSequence, x: &[f64], tau: f64) -> Result<f64> {
    check_dim(lambda.len(), x.len())?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(domain("tau", format!("must be > 0, got {tau}")));
    }
    let v = prox(&lambda.scaled(tau)?, x)?;
    let dist: f64 = x.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(dist / (2.0 * tau) + norm_unchecked(lambda.as_slice(), &v))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Whether `‖prox_{λ1}(y1) − prox_{λ2}(y2)‖ ≤ 2(‖λ1 − λ2‖ + ‖y1 − y2‖)`; when the
/// two sequences are equal the 1-Lipschitz bound `‖Δprox‖ ≤ ‖y1 − y2‖` is checked too.
pub fn prox_perturbation_bound_check(
    lambda1: &RegularizationSequence,
    lambda2: &RegularizationSequence,
    y1: &[f64],
    y2: &[f64],
) -> Result<bool> {
    let p = lambda1.len();
    check_dim(p, lambda2.len())?;
    check_dim(p, y1.len())?;
    check_dim(p, y2.len())?;
    let a = prox(lambda1, y1)?;
    let b = prox(lambda2, y2)?;
    let lhs = dist(&a, &b);
    let dl = dist(lambda1.as_slice(), lambda2.as_slice());
    let dy = dist(y1, y2);
    let scale = y1.iter().chain(y2).map(|v| v.abs()).fold(1.0, f64::max);
    let slack = 1e-12 * scale * (p as f64).sqrt();
    let joint = lhs <= 2.0 * (dl + dy) + slack;
    let lipschitz = dl > 0.0 || lhs <= dy + slack;
    Ok(joint && lipschitz)
}

/// Prox by literal repeated elimination of the first maximal decreasing segment,
/// with the segment endpoints chosen at balance points. Quadratic in `p`; kept as
/// an independent reference for the pooled implementation.
pub fn prox_reference(lambda: &RegularizationSequence, y: &[f64]) -> Result<Vec<f64>> {
    check_dim(lambda.len(), y.len())?;
    let p = y.len();
    let mut perm: Vec<usize> = (0..p).collect();
    perm.sort_by(|&a, &b| y[a].abs().total_cmp(&y[b].abs()));
    let mut a: Vec<f64> = perm
        .iter()
        .zip(lambda.as_slice())
        .map(|(&i, &l)| y[i].abs() - l)
        .collect();

    let aver = |a: &[f64], i: usize, j: usize| a[i..=j].iter().sum::<f64>() / (j + 1 - i) as f64;
    // left balance point for a block ending at j whose decrease starts at k1
    let lbp = |a: &[f64], k1: usize, j: usize| -> usize {
        (1..=k1)
            .find(|&i| a[i - 1] > aver(a, i, j))
            .map_or(k1, |i| i - 1)
    };

    let mut rounds = 0;
    while let Some(k1) = (0..p.saturating_sub(1)).find(|&i| a[i] > a[i + 1]) {
        rounds += 1;
        assert!(rounds <= 4 * p * p + 8, "reference prox failed to terminate");
        let mut k2 = k1 + 1;
        while k2 + 1 < p && a[k2] > a[k2 + 1] {
            k2 += 1;
        }
        let (kl, kr) = if k2 == p - 1 {
            (lbp(&a, k1, p - 1), p - 1)
        } else {
            let mut k3 = k2;
            while k3 + 1 < p && a[k3] <= a[k3 + 1] {
                k3 += 1;
            }
            let jstar = (k2..k3)
                .filter(|&j| aver(&a, lbp(&a, k1, j), j) > a[j + 1])
                .max()
                .map_or(k2, |j| j + 1);
            (lbp(&a, k1, jstar), jstar)
        };
        let mean = aver(&a, kl, kr);
        a[kl..=kr].fill(mean);
    }

    let mut out = vec![0.0; p];
    for (&i, &v) in perm.iter().zip(&a) {
        out[i] = v.max(0.0).copysign(y[i]);
    }
    Ok(out)
}

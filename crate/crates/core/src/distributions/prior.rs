use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::normal;
use crate::{Error, Result};

/// A point mass of the signal prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// A Gaussian component N(mean, sd²) of the signal prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianComponent {
    pub mean: f64,
    pub sd: f64,
    pub mass: f64,
}

/// One mixture component in unified form: a Gaussian with `sd = 0` is an atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub mass: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Signal law of B (mixture of atoms and Gaussians), noise level σ_w and
/// sampling ratio δ = n / p.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorSpec {
    atoms: Vec<Atom>,
    gaussians: Vec<GaussianComponent>,
    noise_sd: f64,
    delta: f64,
}

const MASS_TOL: f64 = 1e-12;

impl PriorSpec {
    pub fn new(
        atoms: Vec<Atom>,
        gaussians: Vec<GaussianComponent>,
        noise_sd: f64,
        delta: f64,
    ) -> Result<Self> {
        if !(noise_sd.is_finite() && noise_sd > 0.0) {
            return Err(Error::InvalidPrior(format!("sigma_w must be > 0, got {noise_sd}")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidPrior(format!("delta must be > 0, got {delta}")));
        }
        if atoms.is_empty() && gaussians.is_empty() {
            return Err(Error::InvalidPrior("no mixture components".into()));
        }
        let mut total = 0.0;
        for a in &atoms {
            if !(a.location.is_finite() && a.mass.is_finite() && a.mass >= 0.0) {
                return Err(Error::InvalidPrior(format!("bad atom {a:?}")));
            }
            total += a.mass;
        }
        for g in &gaussians {
            if !(g.mean.is_finite() && g.sd.is_finite() && g.sd >= 0.0 && g.mass.is_finite() && g.mass >= 0.0) {
                return Err(Error::InvalidPrior(format!("bad gaussian {g:?}")));
            }
            total += g.mass;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidPrior(format!("masses sum to {total}, expected 1")));
        }
        Ok(Self {
            atoms,
            gaussians,
            noise_sd,
            delta,
        })
    }

    /// Sparse two-point prior `(1 − ρ) δ₀ + ρ δ_μ`.
    pub fn sparse_point(rho: f64, magnitude: f64, noise_sd: f64, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidPrior(format!("sparsity {rho} not in [0, 1]")));
        }
        Self::new(
            vec![
                Atom { location: 0.0, mass: 1.0 - rho },
                Atom { location: magnitude, mass: rho },
            ],
            vec![],
            noise_sd,
            delta,
        )
    }

    /// `(1 − ρ) δ₀ + ρ N(μ, s²)`.
    pub fn sparse_gaussian(rho: f64, mean: f64, sd: f64, noise_sd: f64, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidPrior(format!("sparsity {rho} not in [0, 1]")));
        }
        Self::new(
            vec![Atom { location: 0.0, mass: 1.0 - rho }],
            vec![GaussianComponent { mean, sd, mass: rho }],
            noise_sd,
            delta,
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn gaussians(&self) -> &[GaussianComponent] {
        &self.gaussians
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.atoms.clone(), self.gaussians.clone(), self.noise_sd, delta)
    }

    /// All positive-mass components, atoms first.
    pub fn components(&self) -> Vec<Component> {
        self.atoms
            .iter()
            .map(|a| Component { mass: a.mass, mean: a.location, sd: 0.0 })
            .chain(
                self.gaussians
                    .iter()
                    .map(|g| Component { mass: g.mass, mean: g.mean, sd: g.sd }),
            )
            .filter(|c| c.mass > 0.0)
            .collect()
    }

    /// P(B = 0).
    pub fn null_mass(&self) -> f64 {
        self.components()
            .iter()
            .filter(|c| c.sd == 0.0 && c.mean == 0.0)
            .map(|c| c.mass)
            .sum()
    }

    /// ρ = P(B ≠ 0).
    pub fn sparsity(&self) -> f64 {
        1.0 - self.null_mass()
    }

    /// E[B²].
    pub fn second_moment(&self) -> f64 {
        self.components()
            .iter()
            .map(|c| c.mass * (c.mean * c.mean + c.sd * c.sd))
            .sum()
    }

    /// E[B²] / σ_w².
    pub fn snr(&self) -> f64 {
        self.second_moment() / (self.noise_sd * self.noise_sd)
    }

    /// `[σ_w, √(σ_w² + E[B²]/δ)]`, the range any state-evolution σ lies in.
    pub fn sigma_bracket(&self) -> (f64, f64) {
        let lo = self.noise_sd;
        (lo, (lo * lo + self.second_moment() / self.delta).sqrt())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let comps = self.components();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = comps[comps.len() - 1];
        for c in &comps {
            acc += c.mass;
            if u < acc {
                chosen = *c;
                break;
            }
        }
        if chosen.sd == 0.0 {
            chosen.mean
        } else {
            let z: f64 = StandardNormal.sample(rng);
            chosen.mean + chosen.sd * z
        }
    }

    /// The law of Y = B + σZ at effective noise level `sigma`.
    pub fn observation(&self, sigma: f64) -> ObservationLaw {
        ObservationLaw::new(self, sigma)
    }
}

/// One component of Y = B + σZ together with the conjugate posterior of B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationComponent {
    pub mass: f64,
    /// Y | component ~ N(mean, sd²)
    pub mean: f64,
    pub sd: f64,
    /// E[B | Y = y, component] = post_intercept + post_slope · y
    pub post_intercept: f64,
    pub post_slope: f64,
    /// Var(B | Y, component)
    pub post_var: f64,
    /// whether this component is the null (B = 0) point mass
    pub is_null: bool,
}

/// The mixture law of Y = B + σZ.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLaw {
    sigma: f64,
    comps: Vec<ObservationComponent>,
}

impl ObservationLaw {
    fn new(prior: &PriorSpec, sigma: f64) -> Self {
        assert!(sigma > 0.0, "observation noise must be positive");
        let s2 = sigma * sigma;
        let comps = prior
            .components()
            .into_iter()
            .map(|c| {
                let v = c.sd * c.sd + s2;
                let gain = c.sd * c.sd / v;
                ObservationComponent {
                    mass: c.mass,
                    mean: c.mean,
                    sd: v.sqrt(),
                    post_intercept: c.mean * (1.0 - gain),
                    post_slope: gain,
                    post_var: c.sd * c.sd * s2 / v,
                    is_null: c.sd == 0.0 && c.mean == 0.0,
                }
            })
            .collect();
        Self { sigma, comps }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn components(&self) -> &[ObservationComponent] {
        &self.comps
    }

    /// E[Var(B | Y)] contributed by the Gaussian components.
    pub fn within_component_variance(&self) -> f64 {
        self.comps.iter().map(|c| c.mass * c.post_var).sum()
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.comps
            .iter()
            .map(|c| c.mass * normal::pdf((y - c.mean) / c.sd) / c.sd)
            .sum()
    }

    /// P(|Y| ≤ y) for y ≥ 0.
    pub fn abs_cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let p: f64 = self
            .comps
            .iter()
            .map(|c| c.mass * normal::interval_prob((-y - c.mean) / c.sd, (y - c.mean) / c.sd))
            .sum();
        p.clamp(0.0, 1.0)
    }

    /// P(|Y| > y) for y ≥ 0, computed on the upper tail.
    pub fn abs_sf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        let p: f64 = self
            .comps
            .iter()
            .map(|c| c.mass * (normal::sf((y - c.mean) / c.sd) + normal::cdf((-y - c.mean) / c.sd)))
            .sum();
        p.clamp(0.0, 1.0)
    }

    /// Density of |Y| at y ≥ 0.
    pub fn abs_pdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            0.0
        } else {
            self.pdf(y) + self.pdf(-y)
        }
    }

    /// Quantile of |Y|: the y with P(|Y| ≤ y) = u.
    pub fn abs_quantile(&self, u: f64) -> f64 {
        self.abs_quantile_from(u, None)
    }

    /// Quantiles of |Y| at increasing probabilities, warm-starting each Newton solve
    /// from the previous root.
    pub fn abs_quantiles(&self, us: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(us.len());
        let mut prev = None;
        for &u in us {
            let q = self.abs_quantile_from(u, prev);
            out.push(q);
            prev = Some(q);
        }
        out
    }

    fn abs_quantile_from(&self, u: f64, start: Option<f64>) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return f64::INFINITY;
        }
        // bracket [lo, hi] with F(lo) ≤ u ≤ F(hi)
        let mut lo = 0.0;
        let mut hi = self
            .comps
            .iter()
            .map(|c| c.mean.abs() + c.sd)
            .fold(0.0, f64::max)
            .max(1e-300);
        let upper_tail = u > 0.5;
        let target_tail = 1.0 - u;
        let resid = |y: f64| -> f64 {
            if upper_tail {
                target_tail - self.abs_sf(y)
            } else {
                self.abs_cdf(y) - u
            }
        };
        while resid(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        let mut x = match start {
            Some(s) if s > lo && s < hi => s,
            _ => 0.5 * (lo + hi),
        };
        for _ in 0..200 {
            let r = resid(x);
            if r == 0.0 {
                return x;
            }
            if r < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = self.abs_pdf(x);
            let mut next = if d > 0.0 { x - r / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * hi {
                return next;
            }
            x = next;
        }
        x
    }

    /// E[B | Y = y].
    pub fn posterior_mean(&self, y: f64) -> f64 {
        // log-weights for numerical stability far in the tails
        let logw: Vec<f64> = self
            .comps
            .iter()
            .map(|c| {
                let z = (y - c.mean) / c.sd;
                c.mass.ln() - 0.5 * z * z - c.sd.ln()
            })
            .collect();
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for (c, lw) in self.comps.iter().zip(&logw) {
            let w = (lw - top).exp();
            num += w * (c.post_intercept + c.post_slope * y);
            den += w;
        }
        num / den
    }
}

/// E[B | B + σZ = y] for the mixture prior.
pub fn posterior_mean(prior: &PriorSpec, sigma: f64, y: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(crate::error::domain("sigma", format!("must be > 0, got {sigma}")));
    }
    Ok(prior.observation(sigma).posterior_mean(y))
}

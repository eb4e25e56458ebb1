use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal as Gauss};
use slope_core::distributions::{
    gauss_hermite, normal, quantile, regular_sequence, PriorSpec, QuantileFunction, QuantileTable, RngStream,
};

fn atoms() -> impl Strategy<Value = QuantileTable> {
    proptest::collection::vec((-3.0..3.0f64, 0.01..1.0f64), 1..6).prop_map(|v| {
        let total: f64 = v.iter().map(|a| a.1).sum();
        let a: Vec<(f64, f64)> = v.iter().map(|&(x, w)| (x, w / total)).collect();
        QuantileTable::from_atoms(&a).unwrap()
    })
}

/// E[max(|Z| − 1, 0)²] by 10⁷ draws: (mean, standard error).
fn kinked_moment_mc() -> (f64, f64) {
    let mut rng = RngStream::new(2024, 0).rng();
    let n = 10_000_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let v = kinked(Gauss.sample(&mut rng));
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    (mean, ((s2 / n as f64 - mean * mean) / n as f64).sqrt())
}

fn kinked(z: f64) -> f64 {
    (z.abs() - 1.0).max(0.0).powi(2)
}

#[test]
fn gauss_hermite_matches_monte_carlo_on_kinked_moment() {
    let (mean, se) = kinked_moment_mc();
    let closed = 2.0 * (2.0 * normal::sf(1.0) - normal::pdf(1.0));
    assert!((closed - mean).abs() < 3.0 * se, "closed form {closed} vs MC {mean} ± {se}");
    for n in [64, 128, 256] {
        let gh = gauss_hermite(n).unwrap().integrate(kinked);
        assert!((gh - mean).abs() < 3.0 * se, "n={n}: GH {gh} vs MC {mean} ± {se}");
    }
}

#[test]
#[ignore = "the kink at |z| = 1 leaves 32-node Gauss-Hermite 1.25e-3 off, about 8 Monte Carlo standard errors"]
fn gauss_hermite_32_matches_monte_carlo_on_kinked_moment() {
    let (mean, se) = kinked_moment_mc();
    let gh = gauss_hermite(32).unwrap().integrate(kinked);
    assert!((gh - mean).abs() < 3.0 * se, "GH {gh} vs MC {mean} ± {se}");
}

proptest! {
    #[test]
    fn table_quantiles_are_nondecreasing(table in atoms(), u in 0.001..0.999f64, v in 0.001..0.999f64) {
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        prop_assert!(quantile(&table, lo).unwrap() <= quantile(&table, hi).unwrap());
    }

    #[test]
    fn regular_sequences_stay_sorted_in_range(table in atoms(), p in 1usize..300) {
        let s = regular_sequence(&table, p).unwrap();
        prop_assert_eq!(s.len(), p);
        prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s[0] >= table.min_value() && s[p - 1] <= table.max_value());
    }

    #[test]
    fn observation_law_quantiles_invert_its_cdf(rho in 0.0..1.0f64, mu in 0.0..3.0f64, sd in 0.0..1.0f64, sigma in 0.1..2.0f64, u in 0.01..0.99f64) {
        let prior = PriorSpec::sparse_gaussian(rho, mu, sd, 1.0, 1.0).unwrap();
        let law = prior.observation(sigma);
        let y = law.quantile_at(u);
        prop_assert!((law.abs_cdf(y) - u).abs() < 1e-9);
    }

    #[test]
    fn posterior_mean_is_monotone_for_spike_and_slab(rho in 0.05..0.95f64, sd in 0.1..3.0f64, sigma in 0.1..2.0f64) {
        let prior = PriorSpec::sparse_gaussian(rho, 0.0, sd, 1.0, 1.0).unwrap();
        let law = prior.observation(sigma);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..400 {
            let m = law.posterior_mean(-10.0 + 0.05 * i as f64);
            prop_assert!(m >= prev - 1e-12);
            prev = m;
        }
    }

    #[test]
    fn quadrature_moments(n in 2usize..=256) {
        let rule = gauss_hermite(n).unwrap();
        prop_assert!((rule.integrate(|_| 1.0) - 1.0).abs() < 1e-10);
        prop_assert!(rule.integrate(|z| z).abs() < 1e-10);
        prop_assert!((rule.integrate(|z| z * z) - 1.0).abs() < 1e-10);
    }
}

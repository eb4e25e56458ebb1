use proptest::prelude::*;
use slope_core::distributions::{HalfNormal, PriorSpec, QuantileTable, RngStream, Uniform};
use slope_core::limiting_scalar::{build_limiting_eta, separability_gap, validate_membership, EtaBuilder, ScalarFunction};
use slope_core::slope_solver::standard_normal_vec;
use slope_core::sorted_l1::RegularizationSequence;

fn two_atom_lambda() -> QuantileTable {
    QuantileTable::from_atoms(&[(0.2, 0.5), (1.0, 0.5)]).unwrap()
}

fn gap_at(p: usize, seed: u64, eta: &ScalarFunction) -> f64 {
    let lambda = RegularizationSequence::from_distribution(&two_atom_lambda(), p).unwrap();
    let y = standard_normal_vec(&mut RngStream::new(seed, p as u64).rng(), p);
    separability_gap(&lambda, &y, eta).unwrap()
}

#[test]
fn prox_of_gaussian_sample_is_close_to_limit() {
    let eta = build_limiting_eta(&HalfNormal { scale: 1.0 }, &two_atom_lambda(), 1 << 14).unwrap().eta;
    assert!(gap_at(4096, 11, &eta) < 1e-3);
    let coarse = build_limiting_eta(&HalfNormal { scale: 1.0 }, &two_atom_lambda(), 1024).unwrap().eta;
    assert!(gap_at(1024, 12, &coarse) < 5e-3);
}

fn mean_gap(p: usize, seeds: u64, eta: &ScalarFunction) -> f64 {
    (0..seeds).map(|s| gap_at(p, 100 + s, eta)).sum::<f64>() / seeds as f64
}

#[test]
fn gap_shrinks_with_dimension_on_average() {
    let eta = build_limiting_eta(&HalfNormal { scale: 1.0 }, &two_atom_lambda(), 1 << 15).unwrap().eta;
    let g: Vec<f64> = [256, 1024, 4096].iter().map(|&p| mean_gap(p, 10, &eta)).collect();
    assert!(g[0] > g[1] && g[1] > g[2], "{g:?}");
    // per-seed gaps have sd about equal to their mean, so single doublings need more seeds
    let g: Vec<f64> = [256, 512, 1024, 2048, 4096].iter().map(|&p| mean_gap(p, 100, &eta)).collect();
    assert!(g.windows(2).all(|w| w[1] <= w[0]), "{g:?}");
}

#[test]
fn constant_lambda_is_exactly_separable() {
    let table = QuantileTable::constant(0.8).unwrap();
    let eta = build_limiting_eta(&HalfNormal { scale: 1.0 }, &table, 64).unwrap().eta;
    let lambda = RegularizationSequence::constant(0.8, 1000).unwrap();
    let y = standard_normal_vec(&mut RngStream::new(3, 0).rng(), 1000);
    assert!(separability_gap(&lambda, &y, &eta).unwrap() < 1e-20);
}

#[test]
fn scaling_the_lambda_law_matches_builder_scaling() {
    let f_y = HalfNormal { scale: 1.3 };
    let table = two_atom_lambda();
    let builder = EtaBuilder::new(&f_y, &table, 2048).unwrap();
    for tau in [0.5, 2.0] {
        let direct = build_limiting_eta(&f_y, &table.scaled(tau).unwrap(), 2048).unwrap().eta;
        let scaled = builder.build(tau).eta;
        assert_eq!(direct.knots(), scaled.knots());
        for (a, b) in direct.values().iter().zip(scaled.values()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn grid_refinement_converges_for_smooth_laws() {
    let f_y = HalfNormal { scale: 1.0 };
    let f_l = Uniform { lo: 0.1, hi: 1.4 };
    let coarse = build_limiting_eta(&f_y, &f_l, 4096).unwrap().eta;
    let fine = build_limiting_eta(&f_y, &f_l, 8192).unwrap().eta;
    let sup = (0..=300).map(|i| i as f64 * 0.01).map(|y| (coarse.eval(y) - fine.eval(y)).abs()).fold(0.0, f64::max);
    assert!(sup < 2e-3, "{sup}");
}

fn random_eta(slopes: &[f64], widths: &[f64]) -> ScalarFunction {
    let mut knots = vec![0.0];
    let mut values = vec![0.0];
    for (s, w) in slopes.iter().zip(widths) {
        knots.push(knots.last().unwrap() + w);
        values.push(values.last().unwrap() + s * w);
    }
    ScalarFunction::new(knots, values, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn constructed_eta_is_in_the_class(
        rho in 0.0..1.0f64,
        mu in 0.1..4.0f64,
        sd in 0.0..2.0f64,
        sigma in 0.1..2.0f64,
        atoms in proptest::collection::vec((0.0..3.0f64, 0.05..1.0f64), 1..4),
    ) {
        let prior = PriorSpec::sparse_gaussian(rho, mu, sd, 1.0, 1.0).unwrap();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let atoms: Vec<(f64, f64)> = atoms.iter().map(|&(l, w)| (l, w / total)).collect();
        let table = QuantileTable::from_atoms(&atoms).unwrap();
        let eta = build_limiting_eta(&prior.observation(sigma), &table, 512).unwrap().eta;
        let report = validate_membership(&eta);
        prop_assert!(report.passed(), "{:?}", report.violations);
        for i in 0..200 {
            let y = -5.0 + 0.05 * i as f64;
            prop_assert!(eta.eval(y) * y >= 0.0);
            prop_assert!(eta.eval(y + 0.05) >= eta.eval(y));
        }
    }

    #[test]
    fn derivative_matches_finite_differences(
        cells in proptest::collection::vec((0.0..1.0f64, 0.05..1.0f64), 2..12),
        t in 0.0..1.0f64,
    ) {
        let (slopes, widths): (Vec<f64>, Vec<f64>) = cells.into_iter().unzip();
        let eta = random_eta(&slopes, &widths);
        let k = ((t * slopes.len() as f64) as usize).min(slopes.len() - 1);
        // a point well inside cell k, on either side of the origin
        let y = eta.knots()[k] + widths[k] * (0.25 + 0.5 * t);
        for y in [y, -y] {
            let h = 1e-6;
            let fd = (eta.eval(y + h) - eta.eval(y - h)) / (2.0 * h);
            prop_assert!((fd - eta.eval_derivative(y)).abs() < 1e-4);
        }
    }
}

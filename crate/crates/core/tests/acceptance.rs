//! Acceptance run: one pass/fail line per criterion, nonzero exit on any failure.

mod common;

use std::process::Command as Process;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slope_core::design::{solve_design, tune_baseline, BaselineFamily, DesignMode, DesignProblem, InnerProblem};
use slope_core::distributions::{normal, HalfNormal, PriorSpec, QuantileTable, RngStream};
use slope_core::harness::{companion_path, run, run_trials, Command, ExperimentConfig, Preset};
use slope_core::limiting_scalar::{build_limiting_eta, separability_gap, validate_membership, ScalarFunction};
use slope_core::slope_solver::standard_normal_vec;
use slope_core::sorted_l1::{prox, prox_perturbation_bound_check, RegularizationSequence};
use slope_core::state_evolution::{solve, SeOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn sorted_lambdas(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    let mut l: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..3.0)).collect();
    l.sort_by(f64::total_cmp);
    l
}

fn seq(v: &[f64]) -> RegularizationSequence {
    RegularizationSequence::new(v.to_vec()).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn prox_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for k in 0..500 {
        let p = 2 + k % 5;
        let l = sorted_lambdas(&mut rng, p);
        let y: Vec<f64> = (0..p).map(|_| rng.random_range(-5.0..5.0)).collect();
        let x = prox(&seq(&l), &y).unwrap();
        let oracle = common::prox_oracle(&l, &y);
        worst = worst.max(x.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-6 && t < Duration::from_secs(5),
        format!("500 instances, max |prox - oracle| = {worst:.2e}, {t:.2?}"),
    )
}

fn prox_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = [0usize; 5];
    for _ in 0..10_000 {
        let p = rng.random_range(1..=16);
        let l = sorted_lambdas(&mut rng, p);
        let lam = seq(&l);
        let y: Vec<f64> = (0..p).map(|_| rng.random_range(-5.0..5.0)).collect();
        let x = prox(&lam, &y).unwrap();

        let h: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y2: Vec<f64> = y.iter().zip(&h).map(|(a, b)| a + b).collect();
        if dist(&prox(&lam, &y2).unwrap(), &x) > norm(&h) * (1.0 + 1e-12) + 1e-12 {
            violations[0] += 1;
        }

        let abs: Vec<f64> = y.iter().map(|v| v.abs()).collect();
        let xa = prox(&lam, &abs).unwrap();
        let mut perm: Vec<usize> = (0..p).collect();
        perm.shuffle(&mut rng);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let xp = prox(&lam, &yp).unwrap();
        let sign_ok = (0..p).all(|i| (x[i] - y[i].signum() * xa[i]).abs() < 1e-14);
        let perm_ok = perm.iter().enumerate().all(|(k, &i)| (xp[k] - x[i]).abs() < 1e-12);
        if !(sign_ok && perm_ok) {
            violations[1] += 1;
        }

        let mut sorted = abs.clone();
        sorted.sort_by(f64::total_cmp);
        let xs = prox(&lam, &sorted).unwrap();
        if xs[0] < 0.0 || xs.windows(2).any(|w| w[0] > w[1]) {
            violations[2] += 1;
        }

        let mut l2: Vec<f64> = l.iter().map(|v| (v + rng.random_range(-0.5..0.5)).max(0.0)).collect();
        l2.sort_by(f64::total_cmp);
        if !prox_perturbation_bound_check(&lam, &seq(&l2), &y, &y2).unwrap() {
            violations[3] += 1;
        }
        if !prox_perturbation_bound_check(&lam, &lam, &y, &y2).unwrap() {
            violations[4] += 1;
        }
    }
    let total: usize = violations.iter().sum();
    outcome(
        total == 0,
        format!(
            "10000 trials, violations: nonexpansive {}, equivariance {}, ordering {}, joint bound {}, helper 1-Lipschitz {}",
            violations[0], violations[1], violations[2], violations[3], violations[4]
        ),
    )
}

fn separability(etas: &mut Vec<ScalarFunction>) -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::preset(Preset::Fig3);
    let table = cfg.prox.lambda_table().unwrap();
    let eta = build_limiting_eta(&HalfNormal { scale: 1.0 }, &table, cfg.prox.eta_grid).unwrap().eta;
    let mut worst = [0.0f64; 2];
    for s in 0..10u64 {
        for (k, p) in [1024usize, 4096].into_iter().enumerate() {
            let lambda = RegularizationSequence::from_distribution(&table, p).unwrap();
            let y = standard_normal_vec(&mut RngStream::new(cfg.sweep.seed + s, p as u64).rng(), p);
            worst[k] = worst[k].max(separability_gap(&lambda, &y, &eta).unwrap());
        }
    }
    etas.push(eta);
    let t = start.elapsed();
    outcome(
        worst[0] < 1e-2 && worst[1] < 5e-3 && t < Duration::from_secs(30),
        format!("10 seeds, max gap {:.2e} (p=1024), {:.2e} (p=4096), {t:.2?}", worst[0], worst[1]),
    )
}

fn state_evolution_vs_monte_carlo(etas: &mut Vec<ScalarFunction>) -> Outcome {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let cfg = ExperimentConfig::preset(Preset::Fig3);
    let prior = cfg.base_prior().unwrap();
    let sol = solve(&prior, &QuantileTable::constant(1.0).unwrap(), &SeOptions::default()).unwrap();
    let lambda = RegularizationSequence::constant(1.0, 1024).unwrap();
    let (emp, _) = pool.install(|| run_trials(&prior, &lambda, 20, cfg.sweep.seed, 0)).unwrap();
    let rel = (sol.mse - emp.mse.mean).abs() / sol.mse;
    etas.push(sol.eta.clone());

    let id_prior = PriorSpec::sparse_point(0.25, 2.125, 1.0, 2.0).unwrap();
    let id = solve(&id_prior, &QuantileTable::constant(0.0).unwrap(), &SeOptions::default()).unwrap();
    let (s_err, t_err) = ((id.sigma.powi(2) - 2.0).abs(), (id.tau - 2.0).abs());
    let t = start.elapsed();
    outcome(
        rel <= 0.05 && s_err < 1e-8 && t_err < 1e-8 && t < Duration::from_secs(300),
        format!(
            "SE mse {:.5} vs empirical {:.5} ± {:.5} (rel {rel:.4}); identity case |σ² - 2| = {s_err:.1e}, |τ - 2| = {t_err:.1e}; {t:.2?}",
            sol.mse, emp.mse.mean, emp.mse.stderr
        ),
    )
}

fn design_dominance(etas: &mut Vec<ScalarFunction>) -> Outcome {
    let cfg = ExperimentConfig::preset(Preset::Fig2);
    let mut worst_margin = f64::INFINITY;
    let mut points = 0;
    let mut fails = Vec::new();
    for (snr, rho, prior) in cfg.sweep_priors().unwrap() {
        let res = solve_design(&DesignProblem::new(prior.clone(), DesignMode::MinMse)).unwrap();
        let design_mse = prior.delta() * (res.sigma_min.powi(2) - prior.noise_sd().powi(2));
        etas.push(res.eta_star.clone());
        for family in [BaselineFamily::Lasso, BaselineFamily::Bhq { q: cfg.baselines.bhq_q }] {
            let fit = tune_baseline(&prior, family, cfg.baselines.grid).unwrap();
            let margin = fit.mse - design_mse;
            worst_margin = worst_margin.min(margin);
            if margin < -1e-6 {
                fails.push(format!("snr {snr} rho {rho} {}", family.name()));
            }
        }
        points += 1;
    }

    let prior = cfg.base_prior().unwrap();
    let mut qp_gap: f64 = 0.0;
    for (sigma, mode) in [(1.2, DesignMode::MinMse), (1.5, DesignMode::MaxPower { alpha: 0.1 })] {
        let p = InnerProblem::new(&prior, sigma, mode, 256).unwrap();
        let ours = p.solve();
        let reference = p.objective(&common::inner_qp_oracle(&p, prior.delta()));
        qp_gap = qp_gap.max((ours.objective - reference).abs());
    }
    outcome(
        fails.is_empty() && points == 10 && qp_gap < 1e-4,
        format!(
            "{points} grid points, min (baseline - optimal) SE mse = {worst_margin:.3e}{}; 256-cell QP gap {qp_gap:.1e}",
            if fails.is_empty() { String::new() } else { format!(", failing: {}", fails.join("; ")) }
        ),
    )
}

fn testing_calibration(etas: &mut Vec<ScalarFunction>) -> Outcome {
    let cfg = ExperimentConfig::preset(Preset::Fig3);
    let prior = cfg.base_prior().unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.05, 0.1, 0.2] {
        let res = solve_design(&DesignProblem::new(prior.clone(), DesignMode::MaxPower { alpha })).unwrap();
        etas.push(res.eta_star.clone());
        let seq = RegularizationSequence::from_distribution(&res.lambda_star, cfg.sweep.p).unwrap();
        let (emp, _) = run_trials(&prior, &seq, cfg.sweep.trials, cfg.sweep.seed, 0).unwrap();
        let z = normal::inv_cdf(1.0 - alpha / 2.0);
        let shift = 2.125 / res.sigma_min;
        let power = normal::sf(z - shift) + normal::cdf(-z - shift);
        let type_i_ok = (emp.type_i.mean - alpha).abs() <= 3.0 * emp.type_i.stderr;
        let power_ok = (emp.power.mean - power).abs() <= 0.05 * power;
        pass &= type_i_ok && power_ok && emp.unconverged == 0;
        parts.push(format!(
            "α={alpha}: type-I {:.4} ± {:.4}, power {:.4} vs {:.4}",
            emp.type_i.mean, emp.type_i.stderr, emp.power.mean, power
        ));
    }
    outcome(pass, format!("p={}, {} trials; {}", cfg.sweep.p, cfg.sweep.trials, parts.join("; ")))
}

fn membership_and_convexity(etas: &mut Vec<ScalarFunction>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let prior = PriorSpec::sparse_gaussian(
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..3.0),
            rng.random_range(0.0..1.5),
            1.0,
            1.0,
        )
        .unwrap();
        let a = rng.random_range(0.0..1.5);
        let table = QuantileTable::from_atoms(&[(a, 0.5), (a + rng.random_range(0.0..2.0), 0.5)]).unwrap();
        let sigma = rng.random_range(0.2..2.0);
        etas.push(build_limiting_eta(&prior.observation(sigma), &table, 1024).unwrap().eta);
    }
    let failed = etas.iter().filter(|e| !validate_membership(e).passed()).count();

    let prior = PriorSpec::sparse_point(0.25, 2.125, 0.25, 0.64).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for k in 0..200 {
        let mode = if k % 2 == 0 { DesignMode::MinMse } else { DesignMode::MaxPower { alpha: 0.1 } };
        let p = InnerProblem::new(&prior, rng.random_range(0.3..1.3), mode, 128).unwrap();
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { p.upper_bounds().iter().map(|&u| u * rng.random_range(0.0..1.0)).collect() };
        let (s1, s2) = (draw(&mut rng), draw(&mut rng));
        let theta: f64 = rng.random_range(0.0..1.0);
        let mix: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
        let excess = p.objective(&mix) - (theta * p.objective(&s1) + (1.0 - theta) * p.objective(&s2));
        worst = worst.max(excess);
    }
    outcome(
        failed == 0 && worst <= 1e-10,
        format!("{} functions, {failed} membership failures; 200 convex combinations, max excess {worst:.2e}", etas.len()),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut compared = 0;
    for (command, preset) in [("prox-check", "fig3"), ("design-solve", "fig3"), ("se-vs-empirical", "fig3")] {
        let mut runs = Vec::new();
        for r in 0..2 {
            let out = dir.path().join(format!("{command}-{r}.csv"));
            let status = Process::new(env!("CARGO_BIN_EXE_slope-harness"))
                .args([command, "--preset", preset, "--seed", "11", "--out"])
                .arg(&out)
                .env_remove("SLOPE_SEED")
                .stderr(std::process::Stdio::null())
                .status()
                .unwrap();
            assert!(status.success(), "{command} failed");
            let mut files = vec![std::fs::read(&out).unwrap()];
            for suffix in ["samples", "eta", "lambda", "trace"] {
                if let Ok(b) = std::fs::read(companion_path(&out, suffix)) {
                    files.push(b);
                }
            }
            runs.push(files);
        }
        compared += runs[0].len();
        identical &= runs[0] == runs[1];
    }
    // in-process runs of the remaining commands on a reduced config
    let cfg = ExperimentConfig::preset(Preset::Fig3);
    let mut small = cfg.clone();
    small.sweep.trials = 4;
    small.sweep.p = 256;
    small.design.alphas = vec![0.0, 0.1];
    for command in [Command::FdrCurve, Command::DesignCompare] {
        identical &= run(command, &small).unwrap().render() == run(command, &small).unwrap().render();
        compared += 1;
    }
    outcome(identical, format!("{compared} CSV files compared byte for byte across two runs"))
}

fn main() {
    let mut etas = Vec::new();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Vec<ScalarFunction>) -> Outcome>)> = vec![
        ("prox matches convex oracle", Box::new(|_| prox_correctness())),
        ("prox properties", Box::new(|_| prox_properties())),
        ("asymptotic separability", Box::new(separability)),
        ("state evolution vs Monte Carlo", Box::new(state_evolution_vs_monte_carlo)),
        ("design dominance", Box::new(design_dominance)),
        ("testing design calibration", Box::new(testing_calibration)),
        ("membership and convexity", Box::new(membership_and_convexity)),
        ("determinism", Box::new(|_| determinism())),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = check(&mut etas);
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {verdict} {name}: {} [{:.1?}]", i + 1, o.detail, start.elapsed());
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

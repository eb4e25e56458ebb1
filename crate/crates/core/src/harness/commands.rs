use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, FamilyName};
use super::table::{num, opt, CsvTable};
use super::trials::{run_trials, TrialSummary};
use crate::design::{
    baseline_table, bhq_sequence, lasso_sequence, solve_design, tune_baseline, BaselineFamily, BaselineFit,
    DesignMode, DesignProblem, DesignResult,
};
use crate::distributions::{HalfNormal, PriorSpec, RngStream};
use crate::limiting_scalar::build_limiting_eta;
use crate::slope_solver::standard_normal_vec;
use crate::sorted_l1::{prox, RegularizationSequence};
use crate::state_evolution::{solve, MetricsPrediction, SeOptions};
use crate::{Error, Result};

fn status_of(e: &Error) -> String {
    format!("error: {e}").replace([',', '\n'], ";")
}

fn design_problem(cfg: &ExperimentConfig, prior: PriorSpec, mode: DesignMode) -> DesignProblem {
    let mut problem = DesignProblem::new(prior, mode).with_grid_size(cfg.design.grid_size);
    problem.lambda_samples = cfg.design.lambda_samples;
    problem
}

pub(super) fn prox_check(cfg: &ExperimentConfig) -> Result<(CsvTable, Vec<(&'static str, CsvTable)>)> {
    let x = &cfg.prox;
    let lam = x.lambda_table()?;
    let eta = build_limiting_eta(&HalfNormal { scale: 1.0 }, &lam, x.eta_grid)?.eta;
    let jobs: Vec<(u64, usize)> = (0..x.seeds as u64)
        .flat_map(|s| x.p.iter().map(move |&p| (cfg.sweep.seed.wrapping_add(s), p)))
        .collect();
    let results: Vec<(f64, Vec<[f64; 3]>)> = jobs
        .par_iter()
        .map(|&(seed, p)| {
            let mut rng = RngStream::new(seed, p as u64).rng();
            let y = standard_normal_vec(&mut rng, p);
            let lambda = RegularizationSequence::from_distribution(&lam, p)?;
            let out = prox(&lambda, &y)?;
            let mut gap = 0.0;
            let mut samples = Vec::new();
            for (i, (&yi, &xi)) in y.iter().zip(&out).enumerate() {
                let ei = eta.eval(yi);
                gap += (xi - ei) * (xi - ei);
                if rng.random::<f64>() < x.sample_fraction {
                    samples.push([i as f64, yi, xi]);
                }
            }
            Ok((gap / p as f64, samples))
        })
        .collect::<Result<_>>()?;
    let mut main = CsvTable::new(&["p", "seed", "separability_gap"]);
    let mut samples = CsvTable::new(&["p", "seed", "index", "y", "prox", "eta"]);
    for (&(seed, p), (gap, picked)) in jobs.iter().zip(results) {
        main.push(vec![p.to_string(), seed.to_string(), num(gap)]);
        for [i, y, xv] in picked {
            samples.push(vec![
                p.to_string(),
                seed.to_string(),
                (i as usize).to_string(),
                num(y),
                num(xv),
                num(eta.eval(y)),
            ]);
        }
    }
    Ok((main, vec![("samples", samples)]))
}

pub(super) fn se_vs_empirical(cfg: &ExperimentConfig) -> Result<(CsvTable, Vec<(&'static str, CsvTable)>)> {
    let prior = cfg.base_prior()?;
    let s = &cfg.sweep;
    let mut entries: Vec<(BaselineFamily, f64)> = s.lasso_lambdas.iter().map(|&l| (BaselineFamily::Lasso, l)).collect();
    entries.extend(s.bhq_scales.iter().map(|&c| (cfg.baselines.bhq(), c)));
    let mut table = CsvTable::new(&[
        "family",
        "param",
        "se_sigma",
        "se_tau",
        "se_mse",
        "emp_mse_mean",
        "emp_mse_stderr",
        "trials",
        "unconverged_fits",
        "status",
    ]);
    for (family, param) in entries {
        let se = baseline_table(family, param).and_then(|t| solve(&prior, &t, &SeOptions::default()));
        let seq = match family {
            BaselineFamily::Lasso => lasso_sequence(param, s.p),
            BaselineFamily::Bhq { q } => bhq_sequence(q, param.max(f64::MIN_POSITIVE), s.p),
        }?;
        let emp = empirical(&prior, &seq, cfg, 0)?;
        let (sigma, tau, mse, status) = match &se {
            Ok(sol) if sol.converged => (num(sol.sigma), num(sol.tau), num(sol.mse), "ok".to_string()),
            Ok(sol) => (num(sol.sigma), num(sol.tau), num(sol.mse), "se_unconverged".to_string()),
            Err(e) => (String::new(), String::new(), String::new(), status_of(e)),
        };
        eprintln!("se-vs-empirical {} {param}: {status}", family.name());
        let mut row = vec![family.name().to_string(), num(param), sigma, tau, mse];
        row.extend(emp_cells(&emp, |t| [t.mse.mean, t.mse.stderr]));
        row.push(s.trials.to_string());
        row.push(emp.map(|t| t.unconverged).unwrap_or(0).to_string());
        row.push(status);
        table.push(row);
    }
    Ok((table, vec![]))
}

fn empirical(
    prior: &PriorSpec,
    seq: &RegularizationSequence,
    cfg: &ExperimentConfig,
    first_stream: u64,
) -> Result<Option<TrialSummary>> {
    if cfg.sweep.trials == 0 {
        return Ok(None);
    }
    Ok(Some(run_trials(prior, seq, cfg.sweep.trials, cfg.sweep.seed, first_stream)?.0))
}

fn emp_cells(emp: &Option<TrialSummary>, pick: impl Fn(&TrialSummary) -> [f64; 2]) -> Vec<String> {
    match emp {
        Some(t) => pick(t).iter().map(|&v| num(v)).collect(),
        None => vec![String::new(), String::new()],
    }
}

fn tuned(prior: &PriorSpec, cfg: &ExperimentConfig, family: BaselineFamily, name: FamilyName) -> Option<Result<BaselineFit>> {
    cfg.baselines
        .has(name)
        .then(|| tune_baseline(prior, family, cfg.baselines.grid))
}

fn baseline_sequence(fit: &BaselineFit, p: usize) -> Result<RegularizationSequence> {
    match fit.family {
        BaselineFamily::Lasso => lasso_sequence(fit.param, p),
        BaselineFamily::Bhq { q } => bhq_sequence(q, fit.param, p),
    }
}

pub(super) fn design_compare(cfg: &ExperimentConfig) -> Result<(CsvTable, Vec<(&'static str, CsvTable)>)> {
    let mut table = CsvTable::new(&[
        "snr",
        "rho",
        "sigma_min",
        "optimal_se_mse",
        "lasso_param",
        "lasso_sigma",
        "lasso_se_mse",
        "bhq_scale",
        "bhq_sigma",
        "bhq_se_mse",
        "optimal_emp_mse",
        "optimal_emp_stderr",
        "lasso_emp_mse",
        "lasso_emp_stderr",
        "bhq_emp_mse",
        "bhq_emp_stderr",
        "trials",
        "status",
    ]);
    let p = cfg.sweep.p;
    for (i, (snr, rho, prior)) in cfg.sweep_priors()?.into_iter().enumerate() {
        let streams = (i * cfg.sweep.trials) as u64;
        let design = solve_design(&design_problem(cfg, prior.clone(), DesignMode::MinMse));
        let lasso = tuned(&prior, cfg, BaselineFamily::Lasso, FamilyName::Lasso);
        let bhq = tuned(&prior, cfg, cfg.baselines.bhq(), FamilyName::Bhq);
        let mut status = Vec::new();
        let mut row = vec![num(snr), num(rho)];
        let mut emp_row = Vec::new();
        match &design {
            Ok(d) => {
                row.extend([num(d.sigma_min), num(d.predicted.mse)]);
                let seq = RegularizationSequence::from_distribution(&d.lambda_star, p)?;
                emp_row.extend(emp_cells(&empirical(&prior, &seq, cfg, streams)?, |t| [t.mse.mean, t.mse.stderr]));
            }
            Err(e) => {
                status.push(format!("optimal {}", status_of(e)));
                row.extend([String::new(), String::new()]);
                emp_row.extend([String::new(), String::new()]);
            }
        }
        for (name, fit) in [("lasso", lasso), ("bhq", bhq)] {
            match fit {
                Some(Ok(f)) => {
                    row.extend([num(f.param), num(f.sigma), num(f.mse)]);
                    let seq = baseline_sequence(&f, p)?;
                    emp_row.extend(emp_cells(&empirical(&prior, &seq, cfg, streams)?, |t| [t.mse.mean, t.mse.stderr]));
                }
                Some(Err(e)) => {
                    status.push(format!("{name} {}", status_of(&e)));
                    row.extend([String::new(), String::new(), String::new()]);
                    emp_row.extend([String::new(), String::new()]);
                }
                None => {
                    row.extend([String::new(), String::new(), String::new()]);
                    emp_row.extend([String::new(), String::new()]);
                }
            }
        }
        row.extend(emp_row);
        row.push(cfg.sweep.trials.to_string());
        row.push(if status.is_empty() { "ok".into() } else { status.join("; ") });
        eprintln!("design-compare snr={snr} rho={rho}: {}", row.last().unwrap());
        table.push(row);
    }
    Ok((table, vec![]))
}

const FDR_HEADER: &[&str] = &[
    "method",
    "alpha",
    "sigma",
    "predicted_type_i",
    "predicted_power",
    "predicted_fdr",
    "emp_type_i_mean",
    "emp_type_i_stderr",
    "emp_power_mean",
    "emp_power_stderr",
    "emp_fdp_mean",
    "emp_fdp_stderr",
    "trials",
    "unconverged_fits",
    "status",
];

fn fdr_row(method: &str, alpha: f64, sigma: f64, pm: &MetricsPrediction, emp: &Option<TrialSummary>, trials: usize) -> Vec<String> {
    let mut row = vec![
        method.to_string(),
        num(alpha),
        num(sigma),
        num(pm.type_i),
        opt(pm.power),
        opt(pm.fdr),
    ];
    row.extend(emp_cells(emp, |t| [t.type_i.mean, t.type_i.stderr]));
    row.extend(emp_cells(emp, |t| [t.power.mean, t.power.stderr]));
    row.extend(emp_cells(emp, |t| [t.fdp.mean, t.fdp.stderr]));
    row.push(trials.to_string());
    row.push(emp.map(|t| t.unconverged).unwrap_or(0).to_string());
    row.push("ok".into());
    row
}

fn failed_row(method: &str, alpha: f64, e: &Error, trials: usize) -> Vec<String> {
    let mut row = vec![method.to_string(), num(alpha)];
    row.resize(FDR_HEADER.len() - 3, String::new());
    row.extend([trials.to_string(), "0".into(), status_of(e)]);
    row
}

pub(super) fn fdr_curve(cfg: &ExperimentConfig) -> Result<(CsvTable, Vec<(&'static str, CsvTable)>)> {
    let prior = cfg.base_prior()?;
    let trials = cfg.sweep.trials;
    let p = cfg.sweep.p;
    let mut methods = vec!["optimal"];
    if cfg.baselines.has(FamilyName::Bhq) {
        methods.push("bhq");
    }
    let mut table = CsvTable::new(FDR_HEADER);
    for &alpha in &cfg.design.alphas {
        if alpha == 0.0 {
            // nothing can be selected at level 0
            for m in &methods {
                let mut row = vec![m.to_string(), num(0.0), String::new()];
                row.extend(std::iter::repeat(num(0.0)).take(9));
                row.extend([trials.to_string(), "0".into(), "no_fit".into()]);
                table.push(row);
            }
            continue;
        }
        match solve_design(&design_problem(cfg, prior.clone(), DesignMode::MaxPower { alpha })) {
            Ok(d) => {
                let seq = RegularizationSequence::from_distribution(&d.lambda_star, p)?;
                let emp = empirical(&prior, &seq, cfg, 0)?;
                table.push(fdr_row("optimal", alpha, d.sigma_min, &d.predicted, &emp, trials));
            }
            Err(e) => table.push(failed_row("optimal", alpha, &e, trials)),
        }
        if methods.contains(&"bhq") {
            match tune_baseline(&prior, BaselineFamily::Bhq { q: alpha }, cfg.baselines.grid) {
                Ok(f) => {
                    let emp = empirical(&prior, &baseline_sequence(&f, p)?, cfg, 0)?;
                    let pm = f.solution.predicted_metrics(&prior);
                    table.push(fdr_row("bhq", alpha, f.sigma, &pm, &emp, trials));
                }
                Err(e) => table.push(failed_row("bhq", alpha, &e, trials)),
            }
        }
        eprintln!("fdr-curve alpha={alpha} done");
    }
    Ok((table, vec![]))
}

pub(super) fn design_solve(cfg: &ExperimentConfig) -> Result<(CsvTable, Vec<(&'static str, CsvTable)>)> {
    let prior = cfg.base_prior()?;
    let res: DesignResult = solve_design(&design_problem(cfg, prior, cfg.design.mode()))?;
    let header: Vec<&'static str> = DesignResult::SUMMARY_HEADER.split(',').collect();
    let mut summary = CsvTable::new(&header);
    summary.push(res.summary_row().split(',').map(String::from).collect());
    let mut eta = CsvTable::new(&["y", "eta"]);
    for (y, v) in res.eta_star.knots().iter().zip(res.eta_star.values()) {
        eta.push(vec![num(*y), num(*v)]);
    }
    let mut lambda = CsvTable::new(&["u", "lambda"]);
    for (u, l) in res.lambda_star.grid().iter().zip(res.lambda_star.values()) {
        lambda.push(vec![num(*u), num(*l)]);
    }
    let mut trace = CsvTable::new(&["sigma", "objective", "gap"]);
    for pt in &res.objective_trace {
        trace.push(vec![num(pt.sigma), num(pt.objective), num(pt.gap)]);
    }
    Ok((summary, vec![("eta", eta), ("lambda", lambda), ("trace", trace)]))
}

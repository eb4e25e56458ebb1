use rayon::prelude::*;

use crate::distributions::{PriorSpec, RngStream};
use crate::slope_solver::{fit, generate_instance, metrics, FitOptions, MetricsRecord, DEFAULT_ZERO_TOL};
use crate::sorted_l1::RegularizationSequence;
use crate::Result;

/// Averages over Monte Carlo trials of one SLOPE configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub trials: usize,
    pub mse: Stat,
    pub type_i: Stat,
    pub power: Stat,
    pub fdp: Stat,
    pub unconverged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// standard error of the mean across trials
    pub stderr: f64,
}

impl Stat {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

/// Fits SLOPE on `trials` independent instances. Trial `t` draws its data from
/// stream `first_stream + t`, so methods evaluated with the same streams see
/// the same data. Results are gathered in trial order.
pub fn run_trials(
    prior: &PriorSpec,
    lambda: &RegularizationSequence,
    trials: usize,
    seed: u64,
    first_stream: u64,
) -> Result<(TrialSummary, Vec<MetricsRecord>)> {
    let p = lambda.len();
    let outcomes: Vec<(MetricsRecord, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inst = generate_instance(prior, p, RngStream::new(seed, first_stream + t as u64))?;
            let res = fit(&inst, lambda, FitOptions::default())?;
            Ok((metrics(&res, &inst, DEFAULT_ZERO_TOL)?, res.converged))
        })
        .collect::<Result<_>>()?;
    let col = |f: fn(&MetricsRecord) -> Option<f64>| -> Vec<f64> { outcomes.iter().filter_map(|(m, _)| f(m)).collect() };
    let summary = TrialSummary {
        trials,
        mse: Stat::of(&col(|m| Some(m.mse))),
        type_i: Stat::of(&col(|m| m.type_i)),
        power: Stat::of(&col(|m| m.power)),
        fdp: Stat::of(&col(|m| Some(m.fdp))),
        unconverged: outcomes.iter().filter(|(_, ok)| !ok).count(),
    };
    Ok((summary, outcomes.into_iter().map(|(m, _)| m).collect()))
}

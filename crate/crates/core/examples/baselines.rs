//! Tuned LASSO and BHq against the minimum-MSE design across sparsity levels.

use slope_core::design::{solve_design, tune_baseline, BaselineFamily, DesignMode, DesignProblem};
use slope_core::distributions::PriorSpec;

fn main() -> slope_core::Result<()> {
    println!("rho    optimal  lasso    bhq");
    for rho in [0.05, 0.1, 0.256] {
        // SNR = E[β²]/σ_w² = 5
        let prior = PriorSpec::sparse_point(rho, (5.0 / rho).sqrt(), 1.0, 0.64)?;
        let design = solve_design(&DesignProblem::new(prior.clone(), DesignMode::MinMse))?;
        let lasso = tune_baseline(&prior, BaselineFamily::Lasso, 64)?;
        let bhq = tune_baseline(&prior, BaselineFamily::Bhq { q: 0.1 }, 64)?;
        let mse = |s: f64| prior.delta() * (s * s - 1.0);
        println!(
            "{rho:<6} {:.4}   {:.4}   {:.4}",
            mse(design.sigma_min),
            lasso.mse,
            bhq.mse
        );
    }
    Ok(())
}

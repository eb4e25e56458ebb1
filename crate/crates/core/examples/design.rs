//! Oracle-optimal regularization: minimum-MSE and maximum-power designs.

use slope_core::design::{solve_design, DesignMode, DesignProblem};
use slope_core::distributions::{PriorSpec, QuantileFunction};

fn main() -> slope_core::Result<()> {
    let prior = PriorSpec::sparse_point(0.25, 2.125, 0.25, 0.64)?;
    for mode in [DesignMode::MinMse, DesignMode::MaxPower { alpha: 0.1 }] {
        let res = solve_design(&DesignProblem::new(prior.clone(), mode))?;
        println!("{mode:?}");
        println!("  sigma_min {:.5}, tau_min {:.5}", res.sigma_min, res.tau_min);
        println!(
            "  mse {:.5}, type-I {:.4}, power {:.4}",
            res.predicted.mse,
            res.predicted.type_i,
            res.predicted.power.unwrap_or(0.0)
        );
        let q: Vec<String> = [0.1, 0.5, 0.75, 0.9, 0.99]
            .iter()
            .map(|&u| format!("{:.3}", res.lambda_star.quantile_at(u)))
            .collect();
        println!("  lambda* quantiles at .1/.5/.75/.9/.99: {}", q.join(" "));
    }
    Ok(())
}

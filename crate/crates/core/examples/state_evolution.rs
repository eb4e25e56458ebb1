//! Fixed point (σ, τ) for LASSO and a two-level SLOPE sequence, with the
//! implied MSE, type-I error and power.

use slope_core::distributions::{PriorSpec, QuantileTable};
use slope_core::state_evolution::{solve, SeOptions};

fn main() -> slope_core::Result<()> {
    // 25% of coefficients equal 2.125, noise sd 0.25, n/p = 0.64
    let prior = PriorSpec::sparse_point(0.25, 2.125, 0.25, 0.64)?;
    for (name, law) in [
        ("lasso 1.0", QuantileTable::constant(1.0)?),
        ("two-level", QuantileTable::from_atoms(&[(0.6, 0.5), (1.4, 0.5)])?),
    ] {
        let sol = solve(&prior, &law, &SeOptions::default())?;
        let m = sol.predicted_metrics(&prior);
        println!(
            "{name:>10}: sigma {:.5} tau {:.5} mse {:.5} type-I {:.4} power {:.4} ({} steps)",
            sol.sigma,
            sol.tau,
            m.mse,
            m.type_i,
            m.power.unwrap_or(0.0),
            sol.iterations
        );
    }
    Ok(())
}

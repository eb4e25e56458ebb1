//! One synthetic regression instance solved with a BHq-type sequence.

use slope_core::design::bhq_sequence;
use slope_core::distributions::{PriorSpec, RngStream};
use slope_core::slope_solver::{fit, generate_instance, metrics, FitOptions, DEFAULT_ZERO_TOL};

fn main() -> slope_core::Result<()> {
    let prior = PriorSpec::sparse_point(0.1, 3.0, 0.5, 0.64)?;
    let inst = generate_instance(&prior, 1024, RngStream::new(7, 0))?;
    let lambda = bhq_sequence(0.1, 0.5, inst.p())?;
    let res = fit(&inst, &lambda, FitOptions::default())?;
    let m = metrics(&res, &inst, DEFAULT_ZERO_TOL)?;
    println!("n = {}, p = {}", inst.n(), inst.p());
    println!("iterations {} (converged {}), residual {:.2e}", res.iterations, res.converged, res.final_gap);
    println!(
        "mse {:.4}, discoveries {}, false {}, power {:.3}, fdp {:.3}",
        m.mse,
        m.discoveries,
        m.false_discoveries,
        m.power.unwrap_or(0.0),
        m.fdp
    );
    Ok(())
}

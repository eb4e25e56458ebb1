//! Limiting scalar function of the prox for Gaussian inputs and a two-atom λ
//! law, compared with the finite-p prox.

use slope_core::distributions::{HalfNormal, QuantileTable, RngStream};
use slope_core::limiting_scalar::{build_limiting_eta, separability_gap, validate_membership};
use slope_core::slope_solver::standard_normal_vec;
use slope_core::sorted_l1::RegularizationSequence;

fn main() -> slope_core::Result<()> {
    let f_lambda = QuantileTable::from_atoms(&[(0.2, 0.5), (1.0, 0.5)])?;
    let limit = build_limiting_eta(&HalfNormal { scale: 1.0 }, &f_lambda, 1 << 14)?;
    let eta = limit.eta;
    println!("eta in M: {}", validate_membership(&eta).passed());
    for y in [0.1, 0.5, 0.8, 1.2, 2.0, 3.0] {
        println!("eta({y:.1}) = {:.4}", eta.eval(y));
    }
    for p in [256, 1024, 4096] {
        let lambda = RegularizationSequence::from_distribution(&f_lambda, p)?;
        let y = standard_normal_vec(&mut RngStream::new(1, p as u64).rng(), p);
        println!("p = {p:5}: (1/p)|prox - eta|^2 = {:.3e}", separability_gap(&lambda, &y, &eta)?);
    }
    Ok(())
}

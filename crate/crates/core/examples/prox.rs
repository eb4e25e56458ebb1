//! Sorted-ℓ1 norm, its proximal operator and the Moreau envelope on a small vector.

use slope_core::sorted_l1::{moreau_envelope, prox, sorted_l1_norm, RegularizationSequence};

fn main() -> slope_core::Result<()> {
    let lambda = RegularizationSequence::new(vec![0.1, 0.4, 0.8, 1.2, 2.0])?;
    let y = [3.0, -0.5, 1.9, 2.1, -0.2];

    println!("J_lambda(y)      = {:.4}", sorted_l1_norm(&lambda, &y)?);
    let x = prox(&lambda, &y)?;
    println!("prox_lambda(y)   = {x:.4?}");
    println!("envelope (tau=1) = {:.4}", moreau_envelope(&lambda, &y, 1.0)?);

    // close magnitudes meeting increasing weights get averaged together
    let pooled = prox(&lambda, &[1.0, 1.1, 1.05, 0.2, 3.0])?;
    println!("pooled example   = {pooled:.4?}");
    Ok(())
}

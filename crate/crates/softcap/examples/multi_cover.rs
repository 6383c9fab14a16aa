//! Gap lower bound from a cover by three overlapping sets.

use softcap::bounds::multi_cover;
use softcap::chain::Subset;
use softcap::models::{double_well_chain, DoubleWellSpec};

fn main() -> softcap::error::Result<()> {
    let (chain, _) = double_well_chain(&DoubleWellSpec::canonical(4.0))?;
    let n = chain.n();
    let sets = [
        Subset::from_predicate(n, |x| x <= 4),
        Subset::from_predicate(n, |x| (3..=7).contains(&x)),
        Subset::from_predicate(n, |x| x >= 6),
    ];
    let gamma = chain.spectral_gap()?;
    for k in [1e-3, 1e-2, 1e-1] {
        let mc = multi_cover(&chain, &sets, &[k, k, k])?;
        println!("kappa={k:<6} bound={:.4e} simple={:.4e} gamma={gamma:.4e}", mc.bound, mc.bound_simple);
    }
    Ok(())
}

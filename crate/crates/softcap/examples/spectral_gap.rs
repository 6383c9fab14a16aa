//! Spectral gaps of a small chain and of the double well as β grows.

use softcap::chain::{CoverPair, ReversibleChain};
use softcap::models::{double_well_chain, DoubleWellSpec};

fn main() -> softcap::error::Result<()> {
    let chain = ReversibleChain::from_named(
        &["a", "b", "c"],
        &[("a", "b", 1.0), ("b", "a", 1.0), ("b", "c", 1.0), ("c", "b", 1.0)],
        None,
    )?;
    let cover = CoverPair::from_ids(&chain, &["a", "b"], &["b", "c"])?;
    println!("path a-b-c: gamma={} gamma_R={}", chain.spectral_gap()?, chain.restricted(cover.r())?.spectral_gap()?);

    println!("{:>5} {:>12} {:>12} {:>12} {:>10}", "beta", "gamma", "gamma_R", "gamma_S", "chi_R");
    for beta in [2.0, 4.0, 6.0, 8.0, 10.0] {
        let (c, cv) = double_well_chain(&DoubleWellSpec::canonical(beta))?;
        let gr = c.restricted(cv.r())?.spectral_gap()?;
        let gs = c.restricted(cv.s())?.spectral_gap()?;
        println!("{beta:>5} {:>12.4e} {gr:>12.4e} {gs:>12.4e} {:>10.3e}", c.spectral_gap()?, c.chi(cv.r())?);
    }
    Ok(())
}

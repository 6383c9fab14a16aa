//! Local exit time from the soft measure is exactly exponential.

use softcap::bounds::{CoverAnalysis, DEFAULT_THRESHOLD};
use softcap::chain::{CoverPair, ReversibleChain};
use softcap::models::{double_well_chain, DoubleWellSpec};
use softcap::sim::exit_law_experiment;

fn main() -> softcap::error::Result<()> {
    let two = ReversibleChain::from_named(&["a", "b"], &[("a", "b", 1.0), ("b", "a", 2.0)], None)?;
    let cover = CoverPair::from_ids(&two, &["a"], &["b"])?;
    let rep = exit_law_experiment(&two, &cover, 2.0, 100_000, 7)?;
    println!("two-state  phi*={:.4} mean={:.4} KS={:.4} (<= {:.4})", rep.phi_star, rep.mean.mean, rep.ks, rep.ks_threshold);

    let (chain, cover) = double_well_chain(&DoubleWellSpec::canonical(8.0))?;
    let (_, lambda) = CoverAnalysis::new(&chain, &cover)?.mid_window(DEFAULT_THRESHOLD);
    let rep = exit_law_experiment(&chain, &cover, lambda, 100_000, 8)?;
    println!("double well phi*={:.4e} mean*phi*={:.4} KS={:.4} (<= {:.4})", rep.phi_star, rep.mean.mean * rep.phi_star, rep.ks, rep.ks_threshold);
    println!("from mu_R  KS={:.4} (corridor {:.2e})", rep.ks_from_mu_r, rep.corridor_from_mu_r);
    Ok(())
}

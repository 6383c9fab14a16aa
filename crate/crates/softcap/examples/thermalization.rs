//! Survival from a fixed state and the law at the first κ-firing on R.

use softcap::bounds::{CoverAnalysis, DEFAULT_THRESHOLD};
use softcap::models::{double_well_chain, DoubleWellSpec};
use softcap::sim::{thermalization_experiment, Start};

fn main() -> softcap::error::Result<()> {
    let (chain, cover) = double_well_chain(&DoubleWellSpec::canonical(8.0))?;
    let (kappa, lambda) = CoverAnalysis::new(&chain, &cover)?.mid_window(DEFAULT_THRESHOLD);
    let rep = thermalization_experiment(&chain, &cover, kappa, lambda, &Start::State(0), &[0.5, 1.0, 2.0], 20_000, 11)?;
    println!("delta={:.3e} eta={:.3e}", rep.delta, rep.eta);
    for p in &rep.survival {
        println!(
            "t={:<4} exact={:.4} empirical={:.4}±{:.4} envelope=[{:.4}, {:.4}]{}",
            p.t,
            p.exact,
            p.empirical.mean,
            p.empirical.sem,
            p.lower,
            p.upper,
            if p.vacuous { " vacuous" } else { "" }
        );
    }
    println!("TV(X(T_kR), mu_R): empirical {:?} exact {:?} bound {:.4}", rep.tv_empirical, rep.tv_exact, rep.tv_bound);
    println!("pass = {}", rep.pass);
    Ok(())
}

//! The soft measure interpolates between μ_R and the hard quasi-stationary measure.

use softcap::killed::{epsilon_star, exit_rate_hard, soft_exit, soft_qsm, Rate};
use softcap::models::{double_well_chain, DoubleWellSpec};

fn main() -> softcap::error::Result<()> {
    let (chain, cover) = double_well_chain(&DoubleWellSpec::canonical(6.0))?;
    let (r, s) = (cover.r(), cover.s());
    let hard = exit_rate_hard(&chain, r, s)?;
    println!("hard exit rate {:.6e}", hard.rate);
    println!("{:>9} {:>12} {:>12} {:>10} {:>10}", "lambda", "phi*", "gap", "eps*", "mu*(saddle)");
    for e in -6..=6 {
        let l = 10f64.powi(e);
        let soft = soft_exit(&chain, r, s, l)?;
        let saddle = soft.qsm.domain.iter().position(|&x| x == 5).map_or(0.0, |i| soft.qsm.measure[i]);
        println!("{l:>9.0e} {:>12.6e} {:>12.4e} {:>10.3e} {saddle:>10.3e}", soft.qsm.rate, soft.gap, soft.epsilon());
    }
    let inf = soft_qsm(&chain, r, s, Rate::Infinite)?;
    println!("lambda=INF phi*={:.6e} residual={:.1e}", inf.rate, inf.residual);
    let (soft_eps, hard_eps) = epsilon_star(&chain, r, s, Rate::Finite(1e-3))?;
    println!("eps*(lambda=1e-3)={soft_eps:.3e}  eps*_hard={hard_eps:.3e}");
    Ok(())
}

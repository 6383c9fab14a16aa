//! Glauber-Metropolis Ising: exact 3x3 analysis, then simulated nucleation on a
//! lattice too large to enumerate.

use softcap::bounds::{CoverAnalysis, DEFAULT_THRESHOLD};
use softcap::killed::{soft_qsm, Rate};
use softcap::models::{ising_chain, IsingDynamics, IsingMode, IsingSpec};
use softcap::sim::{exp_cdf, ks_statistic, ks_threshold, local_exit_times_with, mean_sem, Start, StartSampler};

fn main() -> softcap::error::Result<()> {
    let sys = ising_chain(&IsingSpec { side: 3, beta: 0.6, field: 0.1, mode: IsingMode::Exact })?;
    let (chain, cover) = sys.exact()?;
    let a = CoverAnalysis::new(chain, cover)?;
    let (_, lambda) = a.mid_window(DEFAULT_THRESHOLD);
    let q = soft_qsm(chain, cover.r(), cover.s(), Rate::Finite(lambda))?;
    println!("3x3: gamma={:.4e} gamma_R={:.4e} lambda={lambda:.3e} phi*={:.4e}", a.gamma, a.gamma_r, q.rate);

    let d = sys.dynamics();
    let sampler = StartSampler::new(&Start::Law(q.extended(chain.n())), chain.n())?;
    let xs = local_exit_times_with(d, lambda, |g| d.decode(sampler.sample(g)), 10_000, 3)?;
    println!("lattice dynamics from mu*: KS={:.4} (<= {:.4})", ks_statistic(&xs, exp_cdf(q.rate))?, ks_threshold(xs.len()));

    // 8x8 has 2^64 states: simulation only, from the all-minus configuration
    let big = IsingDynamics::new(8, 0.45, 0.1);
    let xs = local_exit_times_with(&big, 1.0, |_| big.all_minus(), 200, 4)?;
    let m = mean_sem(&xs);
    println!("8x8 beta=0.45: mean local time in m<=0 before the S-clock {:.3} ± {:.3}", m.mean, m.sem);
    Ok(())
}

//! Window averages before the first transition on the β=8 double well.

use softcap::bounds::{CoverAnalysis, DEFAULT_THRESHOLD};
use softcap::killed::soft_exit;
use softcap::models::{double_well_chain, DoubleWellSpec};
use softcap::sim::{corteo_experiment, CorteoConfig};

fn main() -> softcap::error::Result<()> {
    let (chain, cover) = double_well_chain(&DoubleWellSpec::canonical(8.0))?;
    let (kappa, lambda) = CoverAnalysis::new(&chain, &cover)?.mid_window(DEFAULT_THRESHOLD);
    let soft = soft_exit(&chain, cover.r(), cover.s(), lambda)?;
    // bottom half of the left well
    let f: Vec<f64> = (0..chain.n()).map(|x| if x <= 2 { 1.0 } else { 0.0 }).collect();
    let cfg = CorteoConfig::from_eta(0.2, soft.qsm.rate, lambda, soft.epsilon(), 1.0, 0)?;
    let rep = corteo_experiment(&chain, &cover, kappa, lambda, &f, &cfg, 1000, 30)?;
    println!("theta={:.3e} theta'={:.3e} eps={:.3e}", cfg.theta, cfg.theta_prime, rep.epsilon);
    println!("theta < T1 in {:.3} of runs", rep.theta_before_exit.mean);
    println!("success {:.4} ± {:.4} vs brace {:.4}", rep.success.mean, rep.success.sem, rep.brace);
    println!("max deviation {:.3e} (tolerance {})", rep.max_deviation.mean, cfg.delta);
    println!("pass = {}", rep.pass);
    Ok(())
}

//! Every bound on the canonical double well over a 3x3 window grid.

use softcap::bounds::{full_report, CoverAnalysis, WindowAnalysis, DEFAULT_THRESHOLD};
use softcap::models::{double_well_chain, DoubleWellSpec};

fn main() -> softcap::error::Result<()> {
    for beta in [4.0, 6.0, 8.0] {
        let (chain, cover) = double_well_chain(&DoubleWellSpec::canonical(beta))?;
        let a = CoverAnalysis::new(&chain, &cover)?;
        let Some((kappas, lambdas)) = a.window_grid(DEFAULT_THRESHOLD, 3) else {
            println!("beta={beta}: empty window");
            continue;
        };
        let bottom = {
            let mut v = vec![0.0; chain.n()];
            v[2] = 1.0;
            v
        };
        let (mut applicable, mut violated) = (0, 0);
        for &k in &kappas {
            for &l in &lambdas {
                let w = WindowAnalysis::new(&a, k, l)?;
                let (_, reports) = full_report(&w, DEFAULT_THRESHOLD, &[0.5, 1.0, 2.0], &bottom)?;
                for r in &reports {
                    applicable += r.applicable as usize;
                    if r.violated() {
                        violated += 1;
                        println!("  violated {} exact={:e} lower={:?} upper={:?}", r.name, r.exact, r.lower, r.upper);
                    }
                }
            }
        }
        println!("beta={beta}: gamma={:.4e} eps*={:.3e} applicable={applicable} violated={violated}", a.gamma, a.eps_r_hard());
    }
    Ok(())
}

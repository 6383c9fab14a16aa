//! Pathwise time averages before the first transition.

use serde::Serialize;

use super::engine::{par_trajectories, run, stream_rng, ChainDynamics, Clocks, Segments, Start, StartSampler, RNG_NAME};
use super::record::PathIntegral;
use super::stats::{mean_sem, proportion, MeanSem};
use crate::chain::{CoverPair, ReversibleChain, Subset};
use crate::error::{Error, Result};
use crate::killed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorteoConfig {
    pub eta: f64,
    pub theta: f64,
    pub theta_prime: f64,
    pub k1: f64,
    /// Tolerance 4η‖f‖∞ on window averages.
    pub delta: f64,
    pub n_cycles: usize,
}

impl CorteoConfig {
    /// Window θ = θ′/η with θ′ = (1/η)(1/λ ∨ √ε/(ηφ)), valid when η < 1,
    /// η³ ≥ φ/λ and η⁴ ≥ √ε.
    pub fn from_eta(eta: f64, phi: f64, lambda: f64, eps: f64, f_sup: f64, n_cycles: usize) -> Result<Self> {
        if !(eps < 1.0) {
            return Err(Error::EpsilonTooLarge(eps));
        }
        if !(eta > 0.0 && eta < 1.0) || eta.powi(3) < phi / lambda || eta.powi(4) < eps.sqrt() {
            return Err(Error::ConfigInfeasible(format!(
                "eta={eta}: need eta<1, eta^3>={:.3e}, eta^4>={:.3e}",
                phi / lambda,
                eps.sqrt()
            )));
        }
        let theta_prime = (1.0 / lambda).max(eps.sqrt() / (eta * phi)) / eta;
        Ok(CorteoConfig {
            eta,
            theta: theta_prime / eta,
            theta_prime,
            k1: eta / eps.sqrt(),
            delta: 4.0 * eta * f_sup,
            n_cycles,
        })
    }

    /// Smallest admissible η, or `None` when it is not below 1.
    pub fn smallest_eta(phi: f64, lambda: f64, eps: f64) -> Option<f64> {
        let eta = (phi / lambda).cbrt().max(eps.powf(0.125));
        (eta < 1.0).then_some(eta)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorteoReport {
    pub config: CorteoConfig,
    pub phi_star: f64,
    pub epsilon: f64,
    pub n: usize,
    pub seed: u64,
    pub rng: &'static str,
    pub mean_r: f64,
    pub mean_s: f64,
    pub theta_before_exit: MeanSem,
    pub success: MeanSem,
    pub brace: f64,
    pub threshold: f64,
    pub pass: bool,
    pub max_deviation: MeanSem,
    /// Fraction of trajectories whose every epoch passes, when cycles were run.
    pub cycle_success: Option<MeanSem>,
}

struct Epoch {
    long_enough: bool,
    ok: bool,
    max_dev: f64,
}

fn check_epoch(segments: &[(usize, f64)], f: &[f64], target: f64, cfg: &CorteoConfig) -> Epoch {
    let path = PathIntegral::new(segments);
    let total = path.total();
    if !(cfg.theta < total) {
        return Epoch { long_enough: false, ok: false, max_dev: f64::NAN };
    }
    let prefix = path.prefix(f);
    let mut max_dev: f64 = 0.0;
    let mut k = 0u64;
    loop {
        let t = k as f64 * cfg.theta_prime;
        if t > total - cfg.theta {
            break;
        }
        let avg = path.integral(&prefix, f, t, t + cfg.theta) / cfg.theta;
        max_dev = max_dev.max((avg - target).abs());
        k += 1;
    }
    Epoch { long_enough: true, ok: max_dev <= cfg.delta, max_dev }
}

fn conditional_mean(chain: &ReversibleChain, a: &Subset, f: &[f64]) -> f64 {
    a.iter().map(|x| chain.mu()[x] * f[x]).sum::<f64>() / chain.mass(a)
}

/// Trajectories from μ_R: θ < T₁ and every window average on the grid of
/// starts kθ′ ≤ T₁ − θ within 4η‖f‖∞ of μ_R(f), against 1 − 4η − √(ε/(1−ε)).
/// With `n_cycles > 0` the run continues through alternating epochs killed
/// by κ on R (averages against μ_S) and λ on S (against μ_R).
pub fn corteo_experiment(
    chain: &ReversibleChain,
    cover: &CoverPair,
    kappa: f64,
    lambda: f64,
    f: &[f64],
    config: &CorteoConfig,
    n: usize,
    seed: u64,
) -> Result<CorteoReport> {
    chain.check_len(f.len())?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let soft = killed::soft_exit(chain, cover.r(), cover.s(), lambda)?;
    let (phi, eps) = (soft.qsm.rate, soft.epsilon());
    let f_sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let expected = CorteoConfig::from_eta(config.eta, phi, lambda, eps, f_sup, config.n_cycles)?;
    let config = CorteoConfig { n_cycles: config.n_cycles, ..expected };
    let mean_r = conditional_mean(chain, cover.r(), f);
    let mean_s = conditional_mean(chain, cover.s(), f);
    let mut mu_r = vec![0.0; chain.n()];
    cover.r().iter().for_each(|x| mu_r[x] = chain.mu()[x]);
    let sampler = StartSampler::new(&Start::Law(mu_r), chain.n())?;
    let d = ChainDynamics { chain, cover };
    let lam = Clocks::lambda_only(lambda)?;
    let kap = if config.n_cycles > 0 { Some(Clocks::kappa_only(kappa)?) } else { None };
    let runs: Vec<(Epoch, bool)> = par_trajectories(n, |i| {
        let mut rng = stream_rng(seed, i);
        let mut x = sampler.sample(&mut rng);
        let mut segs = Segments::default();
        let stop = run(&d, x, lam, f64::INFINITY, &mut rng, &mut segs);
        let first = check_epoch(&segs.0, f, mean_r, &config);
        let mut all = first.ok;
        x = stop.state;
        if let Some(kap) = kap {
            for _ in 0..config.n_cycles {
                for (clocks, target) in [(kap, mean_s), (lam, mean_r)] {
                    let mut segs = Segments::default();
                    x = run(&d, x, clocks, f64::INFINITY, &mut rng, &mut segs).state;
                    all &= check_epoch(&segs.0, f, target, &config).ok;
                }
            }
        }
        (first, all)
    });
    let long = runs.iter().filter(|r| r.0.long_enough).count();
    let ok = runs.iter().filter(|r| r.0.ok).count();
    let devs: Vec<f64> = runs.iter().filter(|r| r.0.long_enough).map(|r| r.0.max_dev).collect();
    let success = proportion(ok, n);
    let brace = 1.0 - 4.0 * config.eta - (eps / (1.0 - eps)).sqrt();
    let threshold = brace - 3.0 * success.sem;
    Ok(CorteoReport {
        config,
        phi_star: phi,
        epsilon: eps,
        n,
        seed,
        rng: RNG_NAME,
        mean_r,
        mean_s,
        theta_before_exit: proportion(long, n),
        success,
        brace,
        threshold,
        pass: success.mean >= threshold,
        max_deviation: mean_sem(&devs),
        cycle_success: (config.n_cycles > 0).then(|| proportion(runs.iter().filter(|r| r.1).count(), n)),
    })
}

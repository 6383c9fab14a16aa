//! The stopping time T* and the experiment around it.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::engine::{par_trajectories, run, stream_rng, ChainDynamics, Clocks, Dynamics, Start, StartSampler, Termination, RNG_NAME};
use super::stats::{bootstrap_tv_se, empirical_tv, exp_cdf, ks_statistic, ks_threshold, mean_sem, proportion, MeanSem};
use crate::bounds::{corridor, thermalization_term};
use crate::capacity::Network;
use crate::chain::{CoverPair, ReversibleChain};
use crate::error::{Error, Result};
use crate::killed::{self, Rate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    R,
    S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TStarOutcome<S = usize> {
    pub t_star: f64,
    pub branch: Branch,
    pub iterations: usize,
    pub final_state: S,
    pub tau_sequence: Vec<(f64, Termination)>,
}

/// Restarts the competing κ/λ clocks until a κ-firing follows a state with
/// α ≥ ½ (branch R) or a λ-firing follows a state with α ≤ ½ (branch S).
/// At α = ½ either clock stops the iteration; a simultaneous firing cannot
/// occur, and the R branch is checked first.
pub fn t_star_with<D: Dynamics>(
    d: &D,
    alpha: impl Fn(&D::State) -> f64,
    clocks: Clocks,
    start: D::State,
    rng: &mut ChaCha8Rng,
) -> TStarOutcome<D::State> {
    let mut x = start;
    let mut tau = 0.0;
    let mut seq = Vec::new();
    loop {
        let a = alpha(&x);
        let stop = run(d, x, clocks, f64::INFINITY, rng, &mut ());
        tau += stop.time;
        seq.push((tau, stop.termination));
        let branch = match stop.termination {
            Termination::KappaOnR if a >= 0.5 => Some(Branch::R),
            Termination::LambdaOnS if a <= 0.5 => Some(Branch::S),
            _ => None,
        };
        if let Some(branch) = branch {
            return TStarOutcome { t_star: tau, branch, iterations: seq.len(), final_state: stop.state, tau_sequence: seq };
        }
        x = stop.state;
    }
}

fn positive_clocks(kappa: f64, lambda: f64) -> Result<Clocks> {
    if !(kappa > 0.0 && lambda > 0.0) {
        return Err(Error::InvalidArgument("T* needs kappa > 0 and lambda > 0".into()));
    }
    Clocks::new(kappa, lambda)
}

/// α(x) = P_x(T_κR < T_λS), the equilibrium potential.
pub fn hitting_alpha(chain: &ReversibleChain, cover: &CoverPair, kappa: f64, lambda: f64) -> Result<Vec<f64>> {
    Network::new(chain, cover, Rate::Finite(kappa), Rate::Finite(lambda)).potential()
}

pub fn construct_t_star(
    chain: &ReversibleChain,
    cover: &CoverPair,
    kappa: f64,
    lambda: f64,
    start: &Start,
    seed: u64,
) -> Result<TStarOutcome> {
    let clocks = positive_clocks(kappa, lambda)?;
    let alpha = hitting_alpha(chain, cover, kappa, lambda)?;
    let sampler = StartSampler::new(start, chain.n())?;
    let mut rng = stream_rng(seed, 0);
    let x0 = sampler.sample(&mut rng);
    Ok(t_star_with(&ChainDynamics { chain, cover }, |x| alpha[*x], clocks, x0, &mut rng))
}

#[derive(Debug, Clone, Serialize)]
pub struct TvEstimate {
    pub count: usize,
    pub tv: Option<f64>,
    pub bootstrap_se: Option<f64>,
    pub bound: f64,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GheppioReport {
    pub kappa: f64,
    pub lambda: f64,
    pub n: usize,
    pub seed: u64,
    pub rng: &'static str,
    pub t_star: MeanSem,
    pub t_star_bound: f64,
    pub pass_mean: bool,
    pub tv_r: TvEstimate,
    pub tv_s: TvEstimate,
    pub delta: f64,
    pub direct_r: MeanSem,
    pub direct_r_bound: f64,
    pub pass_direct: bool,
    pub phi_star: f64,
    pub exit_samples: usize,
    pub ks: Option<f64>,
    pub ks_threshold: Option<f64>,
    pub ks_corridor: f64,
    pub pass_ks: Option<bool>,
    pub undefined: Vec<String>,
    pub pass: bool,
}

fn tv_estimate(states: &[usize], target: &[f64], bound: f64, rng: &mut ChaCha8Rng) -> TvEstimate {
    if states.len() < 2 {
        return TvEstimate { count: states.len(), tv: None, bootstrap_se: None, bound, pass: None };
    }
    let tv = empirical_tv(states, target);
    let se = bootstrap_tv_se(states, target, 200, rng);
    TvEstimate { count: states.len(), tv: Some(tv), bootstrap_se: Some(se), bound, pass: Some(tv <= bound + 3.0 * se) }
}

fn conditioned(chain: &ReversibleChain, a: &crate::chain::Subset) -> Vec<f64> {
    let m = chain.mass(a);
    (0..chain.n()).map(|x| if a.contains(x) { chain.mu()[x] / m } else { 0.0 }).collect()
}

/// N runs of T*: its mean, the conditional laws of X(T*) per branch, the
/// frequency of stopping at the first κ-firing before any λ-firing, and the
/// rescaled exit time after T* on the R branch.
pub fn gheppio_experiment(
    chain: &ReversibleChain,
    cover: &CoverPair,
    kappa: f64,
    lambda: f64,
    start: &Start,
    n: usize,
    seed: u64,
) -> Result<GheppioReport> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let clocks = positive_clocks(kappa, lambda)?;
    let alpha = hitting_alpha(chain, cover, kappa, lambda)?;
    let sampler = StartSampler::new(start, chain.n())?;
    let soft = killed::soft_exit(chain, cover.r(), cover.s(), lambda)?;
    let phi = soft.qsm.rate;
    let d = ChainDynamics { chain, cover };
    let lam = Clocks::lambda_only(lambda)?;
    let runs: Vec<(TStarOutcome, Option<f64>)> = par_trajectories(n, |i| {
        let mut rng = stream_rng(seed, i);
        let x0 = sampler.sample(&mut rng);
        let out = t_star_with(&d, |x| alpha[*x], clocks, x0, &mut rng);
        let exit = (out.branch == Branch::R).then(|| phi * run(&d, out.final_state, lam, f64::INFINITY, &mut rng, &mut ()).time);
        (out, exit)
    });

    let times: Vec<f64> = runs.iter().map(|r| r.0.t_star).collect();
    let t_star = mean_sem(&times);
    let t_star_bound = 2.0 / kappa.min(lambda);
    let sem = if t_star.sem.is_nan() { 0.0 } else { t_star.sem };
    let pass_mean = t_star.mean <= t_star_bound + 3.0 * sem;

    let gamma_r = chain.restricted(cover.r())?.spectral_gap()?;
    let gamma_s = chain.restricted(cover.s())?.spectral_gap()?;
    let term_r = thermalization_term(kappa, gamma_r, chain.chi(cover.r())?);
    let term_s = thermalization_term(lambda, gamma_s, chain.chi(cover.s())?);
    let ends = |b: Branch| -> Vec<usize> { runs.iter().filter(|r| r.0.branch == b).map(|r| r.0.final_state).collect() };
    let mut boot = stream_rng(seed, u64::MAX);
    let tv_r = tv_estimate(&ends(Branch::R), &conditioned(chain, cover.r()), 3.0 * term_r, &mut boot);
    let tv_s = tv_estimate(&ends(Branch::S), &conditioned(chain, cover.s()), 3.0 * term_s, &mut boot);

    let law = match start {
        Start::State(x) => {
            let mut v = vec![0.0; chain.n()];
            v[*x] = 1.0;
            v
        }
        Start::Law(p) => {
            let z: f64 = p.iter().sum();
            p.iter().map(|v| v / z).collect()
        }
    };
    let delta = (1.0 - law.iter().zip(&alpha).map(|(p, a)| p * a).sum::<f64>()).max(0.0);
    let direct = runs
        .iter()
        .filter(|r| r.0.iterations == 1 && r.0.branch == Branch::R && r.0.tau_sequence[0].1 == Termination::KappaOnR)
        .count();
    let direct_r = proportion(direct, n);
    let direct_r_bound = 1.0 - 3.0 * delta;
    let pass_direct = direct_r.mean >= direct_r_bound - 3.0 * direct_r.sem;

    let exits: Vec<f64> = runs.iter().filter_map(|r| r.1).collect();
    let eps = soft.epsilon();
    let ratio = phi / lambda;
    let ks_corridor = 3.0 * term_r + corridor(eps) + (ratio.sqrt().exp() - 1.0) + (-1.0 / ratio.sqrt()).exp();
    let (ks, ks_thr, pass_ks) = if exits.is_empty() {
        (None, None, None)
    } else {
        let ks = ks_statistic(&exits, exp_cdf(1.0))?;
        let thr = ks_threshold(exits.len());
        (Some(ks), Some(thr), Some(eps < 1.0 && ks <= thr + ks_corridor))
    };

    let mut undefined = Vec::new();
    if tv_r.tv.is_none() {
        undefined.push("tv_r".to_string());
    }
    if tv_s.tv.is_none() {
        undefined.push("tv_s".to_string());
    }
    if ks.is_none() {
        undefined.push("ks".to_string());
    }
    if t_star.sem.is_nan() {
        undefined.push("t_star_sem".to_string());
    }
    let pass = pass_mean
        && pass_direct
        && tv_r.pass.unwrap_or(true)
        && tv_s.pass.unwrap_or(true)
        && pass_ks.unwrap_or(true);
    Ok(GheppioReport {
        kappa,
        lambda,
        n,
        seed,
        rng: RNG_NAME,
        t_star,
        t_star_bound,
        pass_mean,
        tv_r,
        tv_s,
        delta,
        direct_r,
        direct_r_bound,
        pass_direct,
        phi_star: phi,
        exit_samples: exits.len(),
        ks,
        ks_threshold: ks_thr,
        ks_corridor,
        pass_ks,
        undefined,
        pass,
    })
}

//! Exit-law and thermalization experiments.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::engine::{par_trajectories, run, stream_rng, ChainDynamics, Clocks, Dynamics, LocalTimes, Start, StartSampler, RNG_NAME};
use super::stats::{bootstrap_tv_se, empirical_tv, exp_cdf, ks_statistic, ks_threshold, mean_sem, proportion, MeanSem};
use crate::bounds::{self, CoverAnalysis, WindowAnalysis};
use crate::chain::{CoverPair, ReversibleChain};
use crate::error::{Error, Result};
use crate::killed;

/// Local time in R at the λ-killing time, one per trajectory, for any dynamics.
pub fn local_exit_times_with<D, F>(d: &D, lambda: f64, start: F, n: usize, seed: u64) -> Result<Vec<f64>>
where
    D: Dynamics,
    F: Fn(&mut ChaCha8Rng) -> D::State + Sync + Send,
{
    let clocks = Clocks::lambda_only(lambda)?;
    if lambda == 0.0 {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    Ok(par_trajectories(n, |i| {
        let mut rng = stream_rng(seed, i);
        let x = start(&mut rng);
        let mut lt = LocalTimes::default();
        run(d, x, clocks, f64::INFINITY, &mut rng, &mut lt);
        lt.r
    }))
}

/// N samples of T^R_{λ_S}: local time in R (R∩S included, S\R excluded)
/// accumulated until the λ-clock on S fires.
pub fn sample_local_exit_times(
    chain: &ReversibleChain,
    cover: &CoverPair,
    lambda: f64,
    start: &Start,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let sampler = StartSampler::new(start, chain.n())?;
    local_exit_times_with(&ChainDynamics { chain, cover }, lambda, |rng| sampler.sample(rng), n, seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitLawReport {
    pub lambda: f64,
    pub phi_star: f64,
    pub n: usize,
    pub seed: u64,
    pub rng: &'static str,
    pub mean: MeanSem,
    pub ks: f64,
    pub ks_threshold: f64,
    pub pass: bool,
    /// KS of the same statistic started from μ_R, with the TV corridor
    /// ½√(ε/(1−ε)) that bounds its distance to the exact law.
    pub ks_from_mu_r: f64,
    pub corridor_from_mu_r: f64,
}

/// Local exit time from μ* against Exp(φ*).
pub fn exit_law_experiment(chain: &ReversibleChain, cover: &CoverPair, lambda: f64, n: usize, seed: u64) -> Result<ExitLawReport> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let soft = killed::soft_exit(chain, cover.r(), cover.s(), lambda)?;
    let phi = soft.qsm.rate;
    let star = Start::Law(soft.qsm.extended(chain.n()));
    let samples = sample_local_exit_times(chain, cover, lambda, &star, n, seed)?;
    let ks = ks_statistic(&samples, exp_cdf(phi))?;
    let mu_r = Start::Law(cover.r().iter().fold(vec![0.0; chain.n()], |mut v, x| {
        v[x] = chain.mu()[x];
        v
    }));
    let from_r = sample_local_exit_times(chain, cover, lambda, &mu_r, n, seed ^ 0x5eed)?;
    let eps = soft.epsilon();
    Ok(ExitLawReport {
        lambda,
        phi_star: phi,
        n,
        seed,
        rng: RNG_NAME,
        mean: mean_sem(&samples),
        ks,
        ks_threshold: ks_threshold(n),
        pass: ks <= ks_threshold(n),
        ks_from_mu_r: ks_statistic(&from_r, exp_cdf(phi))?,
        corridor_from_mu_r: if eps < 1.0 { bounds::corridor(eps) } else { f64::NAN },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalPoint {
    pub t: f64,
    pub exact: f64,
    pub empirical: MeanSem,
    pub lower: f64,
    pub upper: f64,
    pub vacuous: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermalizationReport {
    pub kappa: f64,
    pub lambda: f64,
    pub phi_star: f64,
    pub n: usize,
    pub seed: u64,
    pub rng: &'static str,
    pub delta: f64,
    pub eta: f64,
    pub survival: Vec<SurvivalPoint>,
    /// Law of X(T_κR) from a fixed start against μ_R; absent for a law start.
    pub tv_empirical: Option<f64>,
    pub tv_exact: Option<f64>,
    pub tv_se: Option<f64>,
    pub tv_bound: f64,
    pub pass: bool,
}

/// Survival P_π(T_λS > t/φ*) against the thermalization envelope, and the
/// law of the state at the κ-clock on R against μ_R.
pub fn thermalization_experiment(
    chain: &ReversibleChain,
    cover: &CoverPair,
    kappa: f64,
    lambda: f64,
    start: &Start,
    t_grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<ThermalizationReport> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let analysis = CoverAnalysis::new(chain, cover)?;
    let w = WindowAnalysis::new(&analysis, kappa, lambda)?;
    let law = match start {
        Start::State(x) => {
            let mut v = vec![0.0; chain.n()];
            *v.get_mut(*x).ok_or_else(|| Error::UnknownState(x.to_string()))? = 1.0;
            v
        }
        Start::Law(p) => p.clone(),
    };
    let reports = bounds::thermalization_bounds(&w, &law, t_grid)?;
    let phi = w.phi_r();
    let sampler = StartSampler::new(start, chain.n())?;
    let d = ChainDynamics { chain, cover };
    let lam = Clocks::lambda_only(lambda)?;
    let times: Vec<f64> = par_trajectories(n, |i| {
        let mut rng = stream_rng(seed, i);
        let x = sampler.sample(&mut rng);
        run(&d, x, lam, f64::INFINITY, &mut rng, &mut ()).time
    });
    let mut survival = Vec::new();
    let mut pass = true;
    for (k, &t) in t_grid.iter().enumerate() {
        let rep = &reports[k + 1];
        let hits = times.iter().filter(|&&s| s > t / phi).count();
        let emp = proportion(hits, n);
        let (lo, up) = (rep.lower.unwrap(), rep.upper.unwrap());
        let ok = !rep.applicable || (emp.mean >= lo - 3.0 * emp.sem - 1e-12 && emp.mean <= up + 3.0 * emp.sem + 1e-12);
        pass &= ok;
        survival.push(SurvivalPoint {
            t,
            exact: rep.exact,
            empirical: emp,
            lower: lo,
            upper: up,
            vacuous: rep.diagnostics["vacuous"] > 0.0,
            pass: ok,
        });
    }
    let (delta, eta) = reports
        .get(1)
        .map_or((f64::NAN, f64::NAN), |r| (r.diagnostics["delta"], r.diagnostics["eta"]));
    let tv_bound = reports[0].upper.unwrap();
    let (mut tv_empirical, mut tv_exact, mut tv_se) = (None, None, None);
    if let Start::State(x0) = start {
        let kap = Clocks::kappa_only(kappa)?;
        let ends: Vec<usize> = par_trajectories(n, |i| {
            let mut rng = stream_rng(seed ^ 0x7e4a, i);
            run(&d, *x0, kap, f64::INFINITY, &mut rng, &mut ()).state
        });
        let mass = chain.mass(cover.r());
        let target: Vec<f64> = (0..chain.n()).map(|x| if cover.r().contains(x) { chain.mu()[x] / mass } else { 0.0 }).collect();
        let tv = empirical_tv(&ends, &target);
        let se = bootstrap_tv_se(&ends, &target, 200, &mut stream_rng(seed, u64::MAX));
        if let Some(local) = cover.r().members().iter().position(|&y| y == *x0) {
            let exact_law = &bounds::thermalization_laws(chain, cover.r(), kappa)?[local];
            let base = cover.r().iter().map(|y| target[y]);
            tv_exact = Some(0.5 * exact_law.iter().zip(base).map(|(a, b)| (a - b).abs()).sum::<f64>());
        }
        pass &= tv <= tv_bound + 3.0 * se;
        tv_empirical = Some(tv);
        tv_se = Some(se);
    }
    Ok(ThermalizationReport {
        kappa,
        lambda,
        phi_star: phi,
        n,
        seed,
        rng: RNG_NAME,
        delta,
        eta,
        survival,
        tv_empirical,
        tv_exact,
        tv_se,
        tv_bound,
        pass,
    })
}

//! Exact jump-chain sampling with two killing clocks.

use std::sync::OnceLock;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{CoverPair, ReversibleChain};
use crate::error::{Error, Result};

/// Recorded in experiment metadata.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = trajectory index";
/// Environment variable capping the simulation thread pool.
pub const THREADS_VAR: &str = "SOFTCAP_THREADS";

/// Continuous-time dynamics with a cover, enumerated on demand.
pub trait Dynamics: Sync {
    type State: Clone + Send;

    fn out_rate(&self, x: &Self::State) -> f64;

    /// Moves `x` to the neighbour selected by `u`, uniform on [0, out_rate(x)).
    fn jump(&self, x: &mut Self::State, u: f64);

    fn in_r(&self, x: &Self::State) -> bool;

    fn in_s(&self, x: &Self::State) -> bool;
}

/// An explicit chain together with its cover.
#[derive(Clone, Copy)]
pub struct ChainDynamics<'a> {
    pub chain: &'a ReversibleChain,
    pub cover: &'a CoverPair,
}

impl Dynamics for ChainDynamics<'_> {
    type State = usize;

    fn out_rate(&self, x: &usize) -> f64 {
        self.chain.out_rate(*x)
    }

    fn jump(&self, x: &mut usize, mut u: f64) {
        let mut last = *x;
        for (y, w) in self.chain.neighbors(*x) {
            if u < w {
                *x = y;
                return;
            }
            u -= w;
            last = y;
        }
        *x = last;
    }

    fn in_r(&self, x: &usize) -> bool {
        self.cover.r().contains(*x)
    }

    fn in_s(&self, x: &usize) -> bool {
        self.cover.s().contains(*x)
    }
}

/// Killing intensities: κ on R, λ on S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Clocks {
    pub kappa: f64,
    pub lambda: f64,
}

impl Clocks {
    pub fn new(kappa: f64, lambda: f64) -> Result<Self> {
        if !(kappa >= 0.0 && lambda >= 0.0 && kappa.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidArgument("simulation rates must be finite and >= 0".into()));
        }
        Ok(Clocks { kappa, lambda })
    }

    pub fn lambda_only(lambda: f64) -> Result<Self> {
        Self::new(0.0, lambda)
    }

    pub fn kappa_only(kappa: f64) -> Result<Self> {
        Self::new(kappa, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    KappaOnR,
    LambdaOnS,
    Horizon,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::KappaOnR => "KappaOnR",
            Termination::LambdaOnS => "LambdaOnS",
            Termination::Horizon => "Horizon",
        }
    }
}

/// Receives every holding segment in order.
pub trait Observer<S> {
    fn segment(&mut self, x: &S, in_r: bool, in_s: bool, dt: f64);
}

impl<S> Observer<S> for () {
    fn segment(&mut self, _: &S, _: bool, _: bool, _: f64) {}
}

/// Local times in R, S and R∩S.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LocalTimes {
    pub total: f64,
    pub r: f64,
    pub s: f64,
    pub both: f64,
}

impl<S> Observer<S> for LocalTimes {
    fn segment(&mut self, _: &S, in_r: bool, in_s: bool, dt: f64) {
        self.total += dt;
        if in_r {
            self.r += dt;
        }
        if in_s {
            self.s += dt;
        }
        if in_r && in_s {
            self.both += dt;
        }
    }
}

/// Segments as (state, holding time).
#[derive(Debug, Clone, Default)]
pub struct Segments<S>(pub Vec<(S, f64)>);

impl<S: Clone> Observer<S> for Segments<S> {
    fn segment(&mut self, x: &S, _: bool, _: bool, dt: f64) {
        self.0.push((x.clone(), dt));
    }
}

impl<S, A: Observer<S>, B: Observer<S>> Observer<S> for (A, B) {
    fn segment(&mut self, x: &S, in_r: bool, in_s: bool, dt: f64) {
        self.0.segment(x, in_r, in_s, dt);
        self.1.segment(x, in_r, in_s, dt);
    }
}

#[derive(Debug, Clone)]
pub struct Stop<S> {
    pub state: S,
    pub time: f64,
    pub termination: Termination,
}

/// Runs from `x` until a clock fires or `horizon` elapses. Each visit draws
/// one exponential holding time at the total rate (jumps plus active clocks)
/// and then picks the event proportionally, so the cemeteries are reached
/// exactly. A firing clock leaves the state unchanged.
pub fn run<D: Dynamics, O: Observer<D::State>>(
    d: &D,
    mut x: D::State,
    clocks: Clocks,
    horizon: f64,
    rng: &mut ChaCha8Rng,
    obs: &mut O,
) -> Stop<D::State> {
    let mut t = 0.0;
    loop {
        let (in_r, in_s) = (d.in_r(&x), d.in_s(&x));
        let k = if in_r { clocks.kappa } else { 0.0 };
        let l = if in_s { clocks.lambda } else { 0.0 };
        let q = d.out_rate(&x);
        let total = q + k + l;
        let dt = if total > 0.0 { Distribution::<f64>::sample(&Exp1, rng) / total } else { f64::INFINITY };
        if t + dt >= horizon {
            if horizon > t {
                obs.segment(&x, in_r, in_s, horizon - t);
            }
            return Stop { state: x, time: horizon, termination: Termination::Horizon };
        }
        obs.segment(&x, in_r, in_s, dt);
        t += dt;
        let u = rng.random::<f64>() * total;
        if u < k {
            return Stop { state: x, time: t, termination: Termination::KappaOnR };
        }
        if u < k + l {
            return Stop { state: x, time: t, termination: Termination::LambdaOnS };
        }
        d.jump(&mut x, (u - k - l).min(q * (1.0 - f64::EPSILON)));
    }
}

/// Per-trajectory generator derived from (seed, index).
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A state or a law on the states of an explicit chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    State(usize),
    Law(Vec<f64>),
}

/// Draws initial states of a [`Start`].
pub struct StartSampler {
    fixed: Option<usize>,
    index: Option<WeightedIndex<f64>>,
}

impl StartSampler {
    pub fn new(start: &Start, n: usize) -> Result<Self> {
        match start {
            Start::State(x) if *x < n => Ok(StartSampler { fixed: Some(*x), index: None }),
            Start::State(x) => Err(Error::UnknownState(x.to_string())),
            Start::Law(p) => {
                if p.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: p.len() });
                }
                let index = WeightedIndex::new(p).map_err(|e| Error::InvalidArgument(format!("start law: {e}")))?;
                Ok(StartSampler { fixed: None, index: Some(index) })
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        match (&self.fixed, &self.index) {
            (Some(x), _) => *x,
            (None, Some(ix)) => ix.sample(rng),
            (None, None) => unreachable!(),
        }
    }
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_VAR).ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
    })
}

/// `f(i)` for i in 0..n on the capped pool, collected in index order.
pub fn par_trajectories<T: Send>(n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    pool().install(|| (0..n as u64).into_par_iter().map(&f).collect())
}

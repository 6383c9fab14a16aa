use std::fmt::Write as _;

use serde::Serialize;

use super::engine::{run, stream_rng, ChainDynamics, Clocks, LocalTimes, Segments, Start, StartSampler, Termination};
use crate::chain::{CoverPair, ReversibleChain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub segments: Vec<(usize, f64)>,
    pub termination: Termination,
    pub total_time: f64,
    pub local_time_r: f64,
    pub local_time_s: f64,
    pub local_time_both: f64,
    pub seed: u64,
    pub stream: u64,
}

impl TrajectoryRecord {
    /// ℓ_R + ℓ_S − T − ℓ_{R∩S}, recomputed from the segments.
    pub fn local_time_defect(&self, cover: &CoverPair) -> f64 {
        let (mut r, mut s, mut both, mut t) = (0.0, 0.0, 0.0, 0.0);
        for &(x, dt) in &self.segments {
            let (a, b) = (cover.r().contains(x), cover.s().contains(x));
            t += dt;
            if a {
                r += dt;
            }
            if b {
                s += dt;
            }
            if a && b {
                both += dt;
            }
        }
        r + s - t - both
    }

    /// `seg <state> <holding_time>` lines, then `end <termination> <T>`.
    pub fn to_tsv(&self, chain: &ReversibleChain) -> String {
        let mut out = String::new();
        for &(x, dt) in &self.segments {
            let _ = writeln!(out, "seg\t{}\t{}", chain.id(x), dt);
        }
        let _ = writeln!(out, "end\t{}\t{}", self.termination.label(), self.total_time);
        out
    }

    pub fn path(&self) -> PathIntegral {
        PathIntegral::new(&self.segments)
    }
}

/// One trajectory of the chain with clocks κ on R and λ on S.
pub fn simulate(
    chain: &ReversibleChain,
    cover: &CoverPair,
    kappa: f64,
    lambda: f64,
    start: &Start,
    horizon: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    simulate_stream(chain, cover, Clocks::new(kappa, lambda)?, start, horizon, seed, 0)
}

pub fn simulate_stream(
    chain: &ReversibleChain,
    cover: &CoverPair,
    clocks: Clocks,
    start: &Start,
    horizon: f64,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    if horizon.is_infinite() && clocks.kappa == 0.0 && clocks.lambda == 0.0 {
        return Err(Error::InvalidArgument("an infinite horizon needs a positive clock".into()));
    }
    let sampler = StartSampler::new(start, chain.n())?;
    let mut rng = stream_rng(seed, stream);
    let x0 = sampler.sample(&mut rng);
    let d = ChainDynamics { chain, cover };
    let mut obs = (Segments::default(), LocalTimes::default());
    let stop = run(&d, x0, clocks, horizon, &mut rng, &mut obs);
    let (segs, lt) = obs;
    Ok(TrajectoryRecord {
        segments: segs.0,
        termination: stop.termination,
        total_time: stop.time,
        local_time_r: lt.r,
        local_time_s: lt.s,
        local_time_both: lt.both,
        seed,
        stream,
    })
}

/// Cumulative time and cumulative integral at each segment boundary.
#[derive(Debug, Clone)]
pub struct PathIntegral {
    states: Vec<usize>,
    times: Vec<f64>,
}

impl PathIntegral {
    pub fn new(segments: &[(usize, f64)]) -> Self {
        let mut times = Vec::with_capacity(segments.len() + 1);
        let mut t = 0.0;
        times.push(0.0);
        for &(_, dt) in segments {
            t += dt;
            times.push(t);
        }
        PathIntegral { states: segments.iter().map(|s| s.0).collect(), times }
    }

    pub fn total(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Prefix sums of f along the path, for [`PathIntegral::integral`].
    pub fn prefix(&self, f: &[f64]) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.times.len());
        acc.push(0.0);
        let mut s = 0.0;
        for (k, &x) in self.states.iter().enumerate() {
            s += f[x] * (self.times[k + 1] - self.times[k]);
            acc.push(s);
        }
        acc
    }

    fn at(&self, prefix: &[f64], f: &[f64], t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t).saturating_sub(1).min(self.states.len().saturating_sub(1));
        if self.states.is_empty() {
            return 0.0;
        }
        prefix[k] + f[self.states[k]] * (t - self.times[k])
    }

    /// ∫_a^b f(X(s)) ds.
    pub fn integral(&self, prefix: &[f64], f: &[f64], a: f64, b: f64) -> f64 {
        self.at(prefix, f, b) - self.at(prefix, f, a)
    }
}

/// (1/θ)∫_t^{t+θ} f(X(s)) ds from segment arithmetic.
pub fn time_average(record: &TrajectoryRecord, f: &[f64], theta: f64, t: f64) -> Result<f64> {
    let total = record.total_time;
    if !(theta > 0.0) || t < 0.0 || t + theta > total {
        return Err(Error::WindowOutOfRange { t, theta, total });
    }
    let path = record.path();
    let prefix = path.prefix(f);
    Ok(path.integral(&prefix, f, t, t + theta) / theta)
}

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// 99% Kolmogorov-Smirnov acceptance threshold for `n` samples.
pub fn ks_threshold(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// sup |F_n − F| for the empirical CDF of `samples`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    Ok(xs.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    }))
}

pub fn exp_cdf(rate: f64) -> impl Fn(f64) -> f64 {
    move |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSem {
    pub n: usize,
    pub mean: f64,
    pub sem: f64,
}

/// Sample mean and standard error; `sem` is NaN below two samples.
pub fn mean_sem(xs: &[f64]) -> MeanSem {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sem = if n < 2 {
        f64::NAN
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
    };
    MeanSem { n, mean, sem }
}

/// Frequency of `k` successes in `n` trials with its binomial standard error.
pub fn proportion(k: usize, n: usize) -> MeanSem {
    let p = k as f64 / n as f64;
    MeanSem { n, mean: p, sem: (p * (1.0 - p) / n as f64).sqrt() }
}

/// Total variation between the empirical law of `states` and `target`.
pub fn empirical_tv(states: &[usize], target: &[f64]) -> f64 {
    let mut counts = vec![0.0; target.len()];
    for &x in states {
        counts[x] += 1.0;
    }
    let n = states.len() as f64;
    0.5 * counts.iter().zip(target).map(|(c, p)| (c / n - p).abs()).sum::<f64>()
}

/// Bootstrap standard error of [`empirical_tv`].
pub fn bootstrap_tv_se(states: &[usize], target: &[f64], reps: usize, rng: &mut ChaCha8Rng) -> f64 {
    let n = states.len();
    if n < 2 {
        return f64::NAN;
    }
    let mut buf = vec![0usize; n];
    let tvs: Vec<f64> = (0..reps)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = states[rng.random_range(0..n)];
            }
            empirical_tv(&buf, target)
        })
        .collect();
    let m = mean_sem(&tvs);
    m.sem * (reps as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_single_median() {
        assert_eq!(ks_statistic(&[0.0], |x| if x < 0.0 { 0.0 } else { 0.5 }).unwrap(), 0.5);
        assert!(matches!(ks_statistic(&[], |x| x), Err(Error::EmptySample)));
    }

    #[test]
    fn mean_sem_basic() {
        let m = mean_sem(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.sem - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(mean_sem(&[1.0]).sem.is_nan());
    }

    #[test]
    fn tv_of_exact_counts() {
        assert!((empirical_tv(&[0, 0, 1, 1], &[0.5, 0.5])).abs() < 1e-15);
        assert!((empirical_tv(&[0, 0, 0, 0], &[0.5, 0.5]) - 0.5).abs() < 1e-15);
    }
}

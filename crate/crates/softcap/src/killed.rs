//! The process traced on R and killed at rate λ on S: hitting splits,
//! sub-Markovian generators, soft measures and exit rates.

use std::fmt;

use serde::Serialize;

use crate::chain::{ReversibleChain, Subset};
use crate::error::{Error, Result};
use crate::linalg::{self, SpdSolver, SymBuilder, SymMatrix};

/// A killing intensity; `Infinite` is the hard-killed limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    Infinite,
}

impl Rate {
    pub fn finite(self) -> Option<f64> {
        match self {
            Rate::Finite(v) => Some(v),
            Rate::Infinite => None,
        }
    }

    pub fn is_zero(self) -> bool {
        self == Rate::Finite(0.0)
    }

    pub fn parse(s: &str) -> Result<Rate> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Rate::Infinite);
        }
        let v: f64 = t.parse().map_err(|_| Error::InvalidArgument(format!("not a rate: `{s}`")))?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!("rate must be finite and non-negative: `{s}`")));
        }
        Ok(Rate::Finite(v))
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Finite(v) => write!(f, "{v:?}"),
            Rate::Infinite => write!(f, "INF"),
        }
    }
}

impl From<f64> for Rate {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY { Rate::Infinite } else { Rate::Finite(v) }
    }
}

/// Outcome of the excursions outside R: for each z ∉ R, the probability q(z)
/// of being killed first and the law J(z, ·) of the entrance point in R.
#[derive(Debug, Clone)]
pub struct HittingSplit {
    pub outside: Vec<usize>,
    pub q: Vec<f64>,
    /// Sparse rows of J indexed like `outside`; entries are (y ∈ R, prob).
    pub j: Vec<Vec<(usize, f64)>>,
}

pub fn hitting_split(chain: &ReversibleChain, r: &Subset, s: &Subset, lambda: f64) -> Result<HittingSplit> {
    let z = r.complement();
    if z.is_empty() {
        return Err(Error::EmptySet("X\\R is empty".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument("lambda must be finite and non-negative".into()));
    }
    let n = chain.n();
    let local = z.local_index(n);
    let mu = chain.mu();
    let mut b = SymBuilder::new(z.len());
    let mut entry: Vec<usize> = Vec::new();
    let mut entry_seen = vec![false; n];
    for (k, x) in z.iter().enumerate() {
        let kill = if s.contains(x) { lambda } else { 0.0 };
        b.add_diag(k, mu[x] * (kill + chain.out_rate(x)));
        for (y, w) in chain.neighbors(x) {
            match local[y] {
                Some(ly) if k < ly => {
                    let c = 0.5 * (mu[x] * w + mu[y] * chain.rate(y, x));
                    b.add_sym(k, ly, -c);
                }
                Some(_) => {}
                None => {
                    if !entry_seen[y] {
                        entry_seen[y] = true;
                        entry.push(y);
                    }
                }
            }
        }
    }
    entry.sort_unstable();
    let solver = SpdSolver::new(&b.build())?;
    let rhs_q: Vec<f64> = z.iter().map(|x| if s.contains(x) { mu[x] * lambda } else { 0.0 }).collect();
    let q = solver.solve(&rhs_q)?;
    let mut j = vec![Vec::new(); z.len()];
    for &y in &entry {
        let rhs: Vec<f64> = z.iter().map(|x| mu[x] * chain.rate(x, y)).collect();
        let col = solver.solve(&rhs)?;
        for (k, v) in col.into_iter().enumerate() {
            if v != 0.0 {
                j[k].push((y, v.max(0.0)));
            }
        }
    }
    Ok(HittingSplit { outside: z.members().to_vec(), q: q.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(), j })
}

/// Sub-Markovian generator on a domain A with jump rates and killing rates.
#[derive(Debug, Clone)]
pub struct SubMarkovGenerator {
    /// Global indices of the domain states.
    pub domain: Vec<usize>,
    /// Jump rates in local indices, rows sorted by target.
    pub jumps: Vec<Vec<(usize, f64)>>,
    pub kill: Vec<f64>,
    /// Reference measure μ_A on the domain.
    pub measure: Vec<f64>,
}

impl SubMarkovGenerator {
    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn jump_rate(&self, x: usize, y: usize) -> f64 {
        match self.jumps[x].binary_search_by(|e| e.0.cmp(&y)) {
            Ok(k) => self.jumps[x][k].1,
            Err(_) => 0.0,
        }
    }

    /// √μ-conjugate of −L*.
    pub fn symmetrized(&self) -> SymMatrix {
        let mut b = SymBuilder::new(self.len());
        for x in 0..self.len() {
            b.add_diag(x, self.kill[x] + self.jumps[x].iter().map(|e| e.1).sum::<f64>());
            for &(y, w) in &self.jumps[x] {
                if x < y {
                    b.add_sym(x, y, -(w * self.jump_rate(y, x)).sqrt());
                }
            }
        }
        b.build()
    }

    /// μ-weighted −L*, i.e. diag(μ)·(−L*), symmetric.
    pub fn weighted(&self) -> SymMatrix {
        let mut b = SymBuilder::new(self.len());
        let m = &self.measure;
        for x in 0..self.len() {
            b.add_diag(x, m[x] * (self.kill[x] + self.jumps[x].iter().map(|e| e.1).sum::<f64>()));
            for &(y, w) in &self.jumps[x] {
                if x < y {
                    b.add_sym(x, y, -0.5 * (m[x] * w + m[y] * self.jump_rate(y, x)));
                }
            }
        }
        b.build()
    }

    /// ⟨h, −L* h⟩ in ℓ²(μ_A), written as a sum of non-negative terms.
    pub fn energy(&self, h: &[f64]) -> f64 {
        let m = &self.measure;
        let mut e = 0.0;
        for x in 0..self.len() {
            e += m[x] * self.kill[x] * h[x] * h[x];
            for &(y, w) in &self.jumps[x] {
                e += 0.5 * m[x] * w * (h[x] - h[y]).powi(2);
            }
        }
        e
    }

    /// Mean killing time from each state: solves (−L*) g = 1.
    pub fn green_ones(&self) -> Result<Vec<f64>> {
        SpdSolver::new(&self.weighted())?.solve(&self.measure)
    }
}

/// Generator of the trace on R of the process killed at rate λ on S.
pub fn traced_killed_generator(chain: &ReversibleChain, r: &Subset, s: &Subset, lambda: f64) -> Result<SubMarkovGenerator> {
    if r.is_empty() {
        return Err(Error::EmptySet("R is empty".into()));
    }
    let n = chain.n();
    let local = r.local_index(n);
    let mu = chain.mu();
    let total = chain.mass(r);
    let measure: Vec<f64> = r.iter().map(|x| mu[x] / total).collect();
    let mut kill: Vec<f64> = r.iter().map(|x| if s.contains(x) { lambda } else { 0.0 }).collect();
    let mut dense: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); r.len()];
    for (k, x) in r.iter().enumerate() {
        for (y, w) in chain.neighbors(x) {
            if let Some(ly) = local[y] {
                *dense[k].entry(ly).or_insert(0.0) += w;
            }
        }
    }
    if r.len() < n {
        let split = hitting_split(chain, r, s, lambda)?;
        let zpos = {
            let mut v = vec![usize::MAX; n];
            for (k, &z) in split.outside.iter().enumerate() {
                v[z] = k;
            }
            v
        };
        for (k, x) in r.iter().enumerate() {
            for (zz, w) in chain.neighbors(x) {
                if local[zz].is_some() {
                    continue;
                }
                let zi = zpos[zz];
                kill[k] += w * split.q[zi];
                for &(y, p) in &split.j[zi] {
                    let ly = local[y].unwrap();
                    if ly != k {
                        *dense[k].entry(ly).or_insert(0.0) += w * p;
                    }
                }
            }
        }
    }
    let jumps = dense.into_iter().map(|m| m.into_iter().filter(|e| e.1 > 0.0).collect()).collect();
    Ok(SubMarkovGenerator { domain: r.members().to_vec(), jumps, kill, measure })
}

/// Generator of the chain on A killed when it leaves A.
pub fn hard_killed_generator(chain: &ReversibleChain, a: &Subset) -> Result<SubMarkovGenerator> {
    if a.is_empty() {
        return Err(Error::EmptySet("domain is empty".into()));
    }
    let local = a.local_index(chain.n());
    let total = chain.mass(a);
    let measure = a.iter().map(|x| chain.mu()[x] / total).collect();
    let mut kill = Vec::with_capacity(a.len());
    let mut jumps = Vec::with_capacity(a.len());
    for x in a.iter() {
        let mut row = Vec::new();
        let mut e = 0.0;
        for (y, w) in chain.neighbors(x) {
            match local[y] {
                Some(ly) => row.push((ly, w)),
                None => e += w,
            }
        }
        kill.push(e);
        jumps.push(row);
    }
    Ok(SubMarkovGenerator { domain: a.members().to_vec(), jumps, kill, measure })
}

/// Principal eigenpair of −L*: the soft (quasi-stationary) measure and exit rate.
#[derive(Debug, Clone, Serialize)]
pub struct QuasiStationaryResult {
    /// Global indices of the support domain.
    pub domain: Vec<usize>,
    pub measure: Vec<f64>,
    pub rate: f64,
    /// μ*/μ_A on the domain.
    pub density: Vec<f64>,
    pub residual: f64,
}

impl QuasiStationaryResult {
    /// The measure as a vector over all states, zero outside the domain.
    pub fn extended(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for (k, &x) in self.domain.iter().enumerate() {
            v[x] = self.measure[k];
        }
        v
    }

    /// μ*(e) for the killing rates of `gen`, equal to the rate.
    pub fn mean_kill(&self, gen: &SubMarkovGenerator) -> f64 {
        self.measure.iter().zip(&gen.kill).map(|(m, e)| m * e).sum()
    }
}

pub fn quasi_stationary(gen: &SubMarkovGenerator) -> Result<QuasiStationaryResult> {
    quasi_stationary_with_limit(gen, linalg::DENSE_LIMIT)
}

pub fn quasi_stationary_with_limit(gen: &SubMarkovGenerator, dense_limit: usize) -> Result<QuasiStationaryResult> {
    if gen.kill.iter().all(|&k| k == 0.0) {
        return Err(Error::DegenerateKilling);
    }
    let n = gen.len();
    let sq: Vec<f64> = gen.measure.iter().map(|m| m.sqrt()).collect();
    let (vector, residual) = if n == 1 {
        (vec![1.0], 0.0)
    } else {
        let pair = linalg::smallest_eigenpair_with_limit(&gen.symmetrized(), None, dense_limit)?;
        (pair.vector, pair.residual)
    };
    let mut m: Vec<f64> = vector.iter().zip(&sq).map(|(v, s)| v * s).collect();
    let sum: f64 = m.iter().sum();
    m.iter_mut().for_each(|v| *v /= sum);
    if let Some(bad) = m.iter().find(|&&v| v < -1e-12) {
        return Err(Error::ConvergenceFailure(format!("soft measure has a negative entry {bad:e}")));
    }
    if m.iter().any(|&v| v < 0.0) {
        m.iter_mut().for_each(|v| *v = v.max(0.0));
        let s: f64 = m.iter().sum();
        m.iter_mut().for_each(|v| *v /= s);
    }
    let density: Vec<f64> = m.iter().zip(&gen.measure).map(|(a, b)| a / b).collect();
    let norm2: f64 = density.iter().zip(&gen.measure).map(|(h, p)| p * h * h).sum();
    let rate = gen.energy(&density) / norm2;
    Ok(QuasiStationaryResult { domain: gen.domain.clone(), measure: m, rate, density, residual })
}

/// Soft measure μ*_{R,λ_S} and exit rate φ*_{R,λ_S}; λ = ∞ gives the hard
/// limit on R\S, extended by zero to R.
pub fn soft_qsm(chain: &ReversibleChain, r: &Subset, s: &Subset, lambda: Rate) -> Result<QuasiStationaryResult> {
    match lambda {
        Rate::Finite(l) => quasi_stationary(&traced_killed_generator(chain, r, s, l)?),
        Rate::Infinite => {
            let hard = exit_rate_hard(chain, r, s)?;
            let full = hard.extended(chain.n());
            let measure: Vec<f64> = r.iter().map(|x| full[x]).collect();
            let mu_r = chain.mass(r);
            let density = r.iter().zip(&measure).map(|(x, m)| m * mu_r / chain.mu()[x]).collect();
            Ok(QuasiStationaryResult { domain: r.members().to_vec(), measure, rate: hard.rate, density, residual: hard.residual })
        }
    }
}

/// φ*_{R\S} and μ*_{R\S}, supported on R\S.
pub fn exit_rate_hard(chain: &ReversibleChain, r: &Subset, s: &Subset) -> Result<QuasiStationaryResult> {
    let interior = r.minus(s);
    if interior.is_empty() {
        return Err(Error::EmptyInterior);
    }
    if !chain.is_irreducible_on(&interior) {
        return Err(Error::NotIrreducible("restriction to R\\S".into()));
    }
    quasi_stationary(&hard_killed_generator(chain, &interior)?)
}

/// The chain on R with rates w_{R,λ_S} and its spectral gap. λ = ∞ gives X_R.
pub fn restricted_lambda_chain(
    chain: &ReversibleChain,
    r: &Subset,
    s: &Subset,
    lambda: Rate,
) -> Result<(ReversibleChain, f64)> {
    let sub = match lambda {
        Rate::Infinite => chain.restricted(r)?,
        Rate::Finite(l) => lambda_chain(chain, &traced_killed_generator(chain, r, s, l)?)?,
    };
    let gap = sub.spectral_gap()?;
    Ok((sub, gap))
}

/// The generator's jump part as a chain reversible with respect to μ_R.
fn lambda_chain(chain: &ReversibleChain, gen: &SubMarkovGenerator) -> Result<ReversibleChain> {
    let ids = gen.domain.iter().map(|&x| chain.id(x).to_string()).collect();
    let edges = gen
        .jumps
        .iter()
        .enumerate()
        .flat_map(|(x, row)| row.iter().map(move |&(y, w)| (x, y, w)))
        .collect();
    ReversibleChain::new(ids, edges, Some(gen.measure.clone()))
}

/// Soft measure, exit rate and gap of the λ-chain on R from one hitting solve.
#[derive(Debug, Clone)]
pub struct SoftExit {
    pub qsm: QuasiStationaryResult,
    pub gap: f64,
    pub generator: SubMarkovGenerator,
}

impl SoftExit {
    /// ε*_{R,λ_S} = φ*/γ_{R,λ_S}.
    pub fn epsilon(&self) -> f64 {
        self.qsm.rate / self.gap
    }
}

pub fn soft_exit(chain: &ReversibleChain, r: &Subset, s: &Subset, lambda: f64) -> Result<SoftExit> {
    let generator = traced_killed_generator(chain, r, s, lambda)?;
    let qsm = quasi_stationary(&generator)?;
    let gap = lambda_chain(chain, &generator)?.spectral_gap()?;
    Ok(SoftExit { qsm, gap, generator })
}

/// (ε*_{R,λ_S}, ε*_{R,S}).
pub fn epsilon_star(chain: &ReversibleChain, r: &Subset, s: &Subset, lambda: Rate) -> Result<(f64, f64)> {
    let hard = exit_rate_hard(chain, r, s)?.rate / chain.restricted(r)?.spectral_gap()?;
    let soft = match lambda {
        Rate::Infinite => hard,
        Rate::Finite(l) => soft_exit(chain, r, s, l)?.epsilon(),
    };
    Ok((soft, hard))
}

/// The three upper bounds on the exit rate:
/// (μ_{R\S}(e*_{R\S}), λ μ_R(R∩S) + μ_R(e*_R), E_{μ_R}[T^R_{λ_S}]).
pub fn exit_rate_upper_bounds(chain: &ReversibleChain, r: &Subset, s: &Subset, lambda: f64) -> Result<[f64; 3]> {
    let interior = r.minus(s);
    let first = if interior.is_empty() {
        f64::INFINITY
    } else {
        let g = hard_killed_generator(chain, &interior)?;
        g.measure.iter().zip(&g.kill).map(|(m, e)| m * e).sum()
    };
    let gr = hard_killed_generator(chain, r)?;
    let mu_r = chain.mass(r);
    let overlap = chain.mass(&r.intersect(s)) / mu_r;
    let second = lambda * overlap + gr.measure.iter().zip(&gr.kill).map(|(m, e)| m * e).sum::<f64>();
    let gen = traced_killed_generator(chain, r, s, lambda)?;
    if gen.kill.iter().all(|&k| k == 0.0) {
        return Err(Error::DegenerateKilling);
    }
    let g = gen.green_ones()?;
    let third = g.iter().zip(&gen.measure).map(|(a, b)| a * b).sum();
    Ok([first, second, third])
}

/// Variance of h* under μ_R, the bound ½√(ε*/(1−ε*)) and the exact d_TV(μ*, μ_R).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DensityVariance {
    pub variance: f64,
    pub variance_bound: f64,
    pub tv: f64,
    pub tv_bound: f64,
    pub epsilon: f64,
}

pub fn soft_density_variance(chain: &ReversibleChain, r: &Subset, s: &Subset, lambda: f64) -> Result<DensityVariance> {
    let soft = soft_exit(chain, r, s, lambda)?;
    let eps = soft.epsilon();
    let q = soft.qsm;
    if !(eps < 1.0) {
        return Err(Error::EpsilonTooLarge(eps));
    }
    let mu_r: f64 = chain.mass(r);
    let base: Vec<f64> = r.iter().map(|x| chain.mu()[x] / mu_r).collect();
    let variance = q.density.iter().zip(&base).map(|(h, p)| p * (h - 1.0).powi(2)).sum();
    let tv = 0.5 * q.measure.iter().zip(&base).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(DensityVariance {
        variance,
        variance_bound: eps / (1.0 - eps),
        tv,
        tv_bound: 0.5 * (eps / (1.0 - eps)).sqrt(),
        epsilon: eps,
    })
}

/// Principal eigenpair of −L + λ_S on the whole space: (φ̃*, μ̃*).
pub fn whole_space_killed_rate(chain: &ReversibleChain, s: &Subset, lambda: f64) -> Result<(f64, Vec<f64>)> {
    if lambda == 0.0 {
        return Ok((0.0, chain.mu().to_vec()));
    }
    let n = chain.n();
    let gen = SubMarkovGenerator {
        domain: (0..n).collect(),
        jumps: (0..n).map(|x| chain.neighbors(x).collect()).collect(),
        kill: (0..n).map(|x| if s.contains(x) { lambda } else { 0.0 }).collect(),
        measure: chain.mu().to_vec(),
    };
    let q = quasi_stationary(&gen)?;
    Ok((q.rate, q.measure))
}

//! Test systems: birth-death double wells and kinetic Ising models on small
//! periodic lattices, each with a canonical overlapping cover.

use crate::chain::{CoverPair, ReversibleChain, Subset};
use crate::error::{Error, Result};
use crate::sim::Dynamics;

/// Largest lattice side materialized as an explicit chain.
pub const EXACT_MAX_SIDE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWellSpec {
    pub beta: f64,
    pub potential: Vec<f64>,
    pub overlap: usize,
}

/// Positions of the two minima and the separating maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WellShape {
    pub left: usize,
    pub saddle: usize,
    pub right: usize,
}

impl DoubleWellSpec {
    pub fn new(beta: f64, potential: Vec<f64>, overlap: usize) -> Self {
        DoubleWellSpec { beta, potential, overlap }
    }

    pub fn n_states(&self) -> usize {
        self.potential.len()
    }

    /// The 11-state double well used throughout the tests and examples:
    /// two narrow wells at 2 and 8, saddle at 5, the right well deeper.
    pub fn canonical(beta: f64) -> Self {
        let u = vec![3.0, 2.2, 0.0, 1.7, 1.9, 2.0, 1.9, 1.7, -0.3, 2.2, 3.0];
        DoubleWellSpec::new(beta, u, 1)
    }

    /// Tilted quartic (x/n − 0.3)²(x/n − 0.8)² profile on `n` states.
    pub fn quartic(n: usize, beta: f64, overlap: usize) -> Self {
        let u = (0..n)
            .map(|x| {
                let s = x as f64 / n as f64;
                400.0 * (s - 0.3).powi(2) * (s - 0.8).powi(2) - 0.3 * s
            })
            .collect();
        DoubleWellSpec::new(beta, u, overlap)
    }

    pub fn shape(&self) -> Result<WellShape> {
        let u = &self.potential;
        let n = u.len();
        if n < 3 || u.iter().any(|v| !v.is_finite()) || !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::BadPotential("need at least 3 finite values and a finite beta >= 0".into()));
        }
        let lower = |x: usize, y: usize| u[x] < u[y];
        let minima: Vec<usize> = (0..n)
            .filter(|&x| (x == 0 || lower(x, x - 1)) && (x == n - 1 || lower(x, x + 1)))
            .collect();
        if minima.len() != 2 {
            return Err(Error::BadPotential(format!("{} local minima, expected 2", minima.len())));
        }
        let (a, b) = (minima[0], minima[1]);
        let maxima: Vec<usize> = (a + 1..b).filter(|&x| lower(x - 1, x) && lower(x + 1, x)).collect();
        if maxima.len() != 1 {
            return Err(Error::BadPotential(format!("{} maxima between the wells, expected 1", maxima.len())));
        }
        let m = maxima[0];
        let o = self.overlap;
        if o == 0 || o >= m - a || o >= b - m {
            return Err(Error::BadPotential(format!("overlap {o} must lie in (0, {})", (m - a).min(b - m))));
        }
        Ok(WellShape { left: a, saddle: m, right: b })
    }
}

fn metropolis(beta: f64, du: f64) -> f64 {
    (-beta * du.max(0.0)).exp()
}

/// Normalized Gibbs weights e^{−βU}.
fn gibbs(beta: f64, u: &[f64]) -> Vec<f64> {
    let min = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = u.iter().map(|v| (-beta * (v - min)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// Metropolis birth-death chain and cover R = {0..m+o}, S = {m−o..n−1}.
pub fn double_well_chain(spec: &DoubleWellSpec) -> Result<(ReversibleChain, CoverPair)> {
    let shape = spec.shape()?;
    let (u, beta, n) = (&spec.potential, spec.beta, spec.n_states());
    let ids = (0..n).map(|x| x.to_string()).collect();
    let mut edges = Vec::with_capacity(2 * n);
    for x in 0..n - 1 {
        edges.push((x, x + 1, metropolis(beta, u[x + 1] - u[x])));
        edges.push((x + 1, x, metropolis(beta, u[x] - u[x + 1])));
    }
    let chain = ReversibleChain::new(ids, edges, Some(gibbs(beta, u)))?;
    let (m, o) = (shape.saddle, spec.overlap);
    let r = Subset::from_predicate(n, |x| x <= m + o);
    let s = Subset::from_predicate(n, |x| x + o >= m);
    let cover = CoverPair::new(&chain, r, s)?;
    Ok((chain, cover))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsingMode {
    Exact,
    SimOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingSpec {
    pub side: usize,
    pub beta: f64,
    pub field: f64,
    pub mode: IsingMode,
}

/// Single-spin-flip Metropolis dynamics on the L×L torus, rates computed on
/// demand. States are spin vectors of ±1 in row-major order.
#[derive(Debug, Clone)]
pub struct IsingDynamics {
    pub side: usize,
    pub beta: f64,
    pub field: f64,
    nbrs: Vec<[usize; 4]>,
}

impl IsingDynamics {
    pub fn new(side: usize, beta: f64, field: f64) -> Self {
        let l = side;
        let nbrs = (0..l * l)
            .map(|i| {
                let (r, c) = (i / l, i % l);
                [r * l + (c + 1) % l, r * l + (c + l - 1) % l, ((r + 1) % l) * l + c, ((r + l - 1) % l) * l + c]
            })
            .collect();
        IsingDynamics { side, beta, field, nbrs }
    }

    pub fn sites(&self) -> usize {
        self.side * self.side
    }

    /// H(σ) = −Σ_{⟨ij⟩} σ_i σ_j − h Σ σ_i, each bond counted once.
    pub fn energy(&self, spins: &[i8]) -> f64 {
        let mut e = 0.0;
        for (i, nb) in self.nbrs.iter().enumerate() {
            let s = spins[i] as f64;
            e -= s * (spins[nb[0]] as f64 + spins[nb[2]] as f64);
            e -= self.field * s;
        }
        e
    }

    /// H(σˣ) − H(σ) for flipping site i.
    pub fn flip_cost(&self, spins: &[i8], i: usize) -> f64 {
        let s = spins[i] as f64;
        let local: f64 = self.nbrs[i].iter().map(|&j| spins[j] as f64).sum();
        2.0 * s * (local + self.field)
    }

    pub fn flip_rate(&self, spins: &[i8], i: usize) -> f64 {
        metropolis(self.beta, self.flip_cost(spins, i))
    }

    pub fn magnetization(spins: &[i8]) -> i64 {
        spins.iter().map(|&s| s as i64).sum()
    }

    pub fn all_minus(&self) -> Vec<i8> {
        vec![-1; self.sites()]
    }

    pub fn decode(&self, code: usize) -> Vec<i8> {
        (0..self.sites()).map(|i| if code >> i & 1 == 1 { 1 } else { -1 }).collect()
    }

    pub fn label(spins: &[i8]) -> String {
        spins.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect()
    }
}

impl Dynamics for IsingDynamics {
    type State = Vec<i8>;

    fn out_rate(&self, x: &Vec<i8>) -> f64 {
        (0..self.sites()).map(|i| self.flip_rate(x, i)).sum()
    }

    fn jump(&self, x: &mut Vec<i8>, mut u: f64) {
        let last = self.sites() - 1;
        for i in 0..=last {
            let r = self.flip_rate(x, i);
            if u < r || i == last {
                x[i] = -x[i];
                return;
            }
            u -= r;
        }
    }

    fn in_r(&self, x: &Vec<i8>) -> bool {
        IsingDynamics::magnetization(x) <= 0
    }

    fn in_s(&self, x: &Vec<i8>) -> bool {
        IsingDynamics::magnetization(x) >= 0
    }
}

pub enum IsingSystem {
    Exact { chain: ReversibleChain, cover: CoverPair, dynamics: IsingDynamics },
    SimOnly(IsingDynamics),
}

impl IsingSystem {
    pub fn dynamics(&self) -> &IsingDynamics {
        match self {
            IsingSystem::Exact { dynamics, .. } | IsingSystem::SimOnly(dynamics) => dynamics,
        }
    }

    /// The explicit chain and cover, or `ImplicitOnly`.
    pub fn exact(&self) -> Result<(&ReversibleChain, &CoverPair)> {
        match self {
            IsingSystem::Exact { chain, cover, .. } => Ok((chain, cover)),
            IsingSystem::SimOnly(_) => Err(Error::ImplicitOnly),
        }
    }
}

/// State `k` of the exact chain has spin +1 at site i iff bit i of k is set.
pub fn ising_chain(spec: &IsingSpec) -> Result<IsingSystem> {
    if spec.side < 2 || !spec.beta.is_finite() || spec.beta < 0.0 || !(spec.field >= 0.0) {
        return Err(Error::InvalidArgument("need side >= 2, beta >= 0 and field >= 0".into()));
    }
    let dynamics = IsingDynamics::new(spec.side, spec.beta, spec.field);
    if spec.mode == IsingMode::SimOnly {
        return Ok(IsingSystem::SimOnly(dynamics));
    }
    if spec.side > EXACT_MAX_SIDE {
        return Err(Error::TooLargeForExact(format!("{0}x{0} lattice in exact mode", spec.side)));
    }
    let sites = dynamics.sites();
    let n = 1usize << sites;
    let mut ids = Vec::with_capacity(n);
    let mut energy = Vec::with_capacity(n);
    let mut mag = Vec::with_capacity(n);
    let mut edges = Vec::with_capacity(n * sites);
    for k in 0..n {
        let spins = dynamics.decode(k);
        ids.push(IsingDynamics::label(&spins));
        energy.push(dynamics.energy(&spins));
        mag.push(IsingDynamics::magnetization(&spins));
        for i in 0..sites {
            edges.push((k, k ^ (1 << i), dynamics.flip_rate(&spins, i)));
        }
    }
    let chain = ReversibleChain::new(ids, edges, Some(gibbs(spec.beta, &energy)))?;
    let r = Subset::from_predicate(n, |k| mag[k] <= 0);
    let s = Subset::from_predicate(n, |k| mag[k] >= 0);
    let cover = CoverPair::new(&chain, r, s)?;
    Ok(IsingSystem::Exact { chain, cover, dynamics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_shape() {
        let spec = DoubleWellSpec::canonical(8.0);
        assert_eq!(spec.shape().unwrap(), WellShape { left: 2, saddle: 5, right: 8 });
        let (c, cover) = double_well_chain(&spec).unwrap();
        assert_eq!(cover.r().members(), &[0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(cover.s().members(), &[4, 5, 6, 7, 8, 9, 10]);
        assert!(c.mass(cover.s()) > c.mass(cover.r()));
    }

    #[test]
    fn quartic_shape() {
        let spec = DoubleWellSpec::quartic(60, 8.0, 3);
        let sh = spec.shape().unwrap();
        assert!(sh.left < sh.saddle && sh.saddle < sh.right);
        let (c, cover) = double_well_chain(&spec).unwrap();
        assert!(c.mass(cover.s()) >= c.mass(cover.r()));
        assert!(cover.flags().all());
    }

    #[test]
    fn bad_potentials() {
        assert!(DoubleWellSpec::canonical(1.0).shape().is_ok());
        let mut spec = DoubleWellSpec::canonical(1.0);
        spec.overlap = 3;
        assert!(matches!(spec.shape(), Err(Error::BadPotential(_))));
        let single = DoubleWellSpec::new(1.0, vec![2.0, 1.0, 0.0, 1.0, 2.0], 1);
        assert!(matches!(single.shape(), Err(Error::BadPotential(_))));
    }

    #[test]
    fn ising_flip_cost_matches_energy() {
        let d = IsingDynamics::new(3, 0.6, 0.1);
        let spins = d.decode(0b101_100_011);
        for i in 0..9 {
            let mut f = spins.clone();
            f[i] = -f[i];
            assert!((d.flip_cost(&spins, i) - (d.energy(&f) - d.energy(&spins))).abs() < 1e-12);
        }
    }

    #[test]
    fn ising_exact_small() {
        let spec = IsingSpec { side: 3, beta: 0.6, field: 0.1, mode: IsingMode::Exact };
        let sys = ising_chain(&spec).unwrap();
        let (c, cover) = sys.exact().unwrap();
        assert_eq!(c.n(), 512);
        assert!(cover.both().is_empty());
        let big = IsingSpec { side: 16, ..spec };
        assert!(matches!(ising_chain(&big), Err(Error::TooLargeForExact(_))));
        let sim = IsingSpec { side: 16, mode: IsingMode::SimOnly, ..spec };
        assert!(matches!(ising_chain(&sim).unwrap().exact(), Err(Error::ImplicitOnly)));
    }
}

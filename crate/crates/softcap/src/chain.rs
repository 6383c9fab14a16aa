//! Finite reversible chains, subsets and overlapping covers.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::linalg::{self, SymBuilder, SymMatrix};

/// Relative tolerance for detailed balance.
pub const BALANCE_TOL: f64 = 1e-9;
/// Absolute tolerance on the total mass of a supplied measure.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Continuous-time chain with rates `w` reversible with respect to `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversibleChain {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    mu: Vec<f64>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    rates: Vec<f64>,
    out_rate: Vec<f64>,
}

impl ReversibleChain {
    /// Validates rates and measure. Without a measure, `mu` is recovered from
    /// the rates along a spanning tree and then checked on every edge.
    pub fn new(ids: Vec<String>, edges: Vec<(usize, usize, f64)>, measure: Option<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::EmptySet("chain has no states".into()));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate state `{id}`")));
            }
        }
        let mut kept = Vec::with_capacity(edges.len());
        for (x, y, w) in edges {
            if x >= n || y >= n {
                return Err(Error::DimensionMismatch { expected: n, got: x.max(y) + 1 });
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::NegativeRate(ids[x].clone(), ids[y].clone()));
            }
            if x == y {
                return Err(Error::InvalidArgument(format!("self-loop on `{}`", ids[x])));
            }
            if w > 0.0 {
                kept.push((x, y, w));
            }
        }
        kept.sort_by_key(|e| (e.0, e.1));
        for pair in kept.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::InvalidArgument(format!(
                    "duplicate rate ({}, {})",
                    ids[pair[0].0], ids[pair[0].1]
                )));
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for &(x, _, _) in &kept {
            offsets[x + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets: Vec<usize> = kept.iter().map(|e| e.1).collect();
        let rates: Vec<f64> = kept.iter().map(|e| e.2).collect();
        let out_rate = (0..n).map(|x| rates[offsets[x]..offsets[x + 1]].iter().sum()).collect();
        let mut chain = ReversibleChain { ids, index, mu: Vec::new(), offsets, targets, rates, out_rate };
        chain.check_irreducible()?;
        chain.mu = match measure {
            Some(mu) => normalized_measure(mu, n)?,
            None => chain.recover_measure()?,
        };
        chain.check_balance()?;
        Ok(chain)
    }

    /// Builds a chain from string identifiers.
    pub fn from_named(states: &[&str], rates: &[(&str, &str, f64)], measure: Option<&[f64]>) -> Result<Self> {
        let ids: Vec<String> = states.iter().map(|s| s.to_string()).collect();
        let idx: HashMap<&str, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut edges = Vec::with_capacity(rates.len());
        for &(x, y, w) in rates {
            let xi = *idx.get(x).ok_or_else(|| Error::UnknownState(x.into()))?;
            let yi = *idx.get(y).ok_or_else(|| Error::UnknownState(y.into()))?;
            edges.push((xi, yi, w));
        }
        Self::new(ids, edges, measure.map(|m| m.to_vec()))
    }

    fn check_irreducible(&self) -> Result<()> {
        let n = self.n();
        let forward = self.reach(0, |x| self.neighbors(x).map(|(y, _)| y).collect());
        if forward.iter().any(|&b| !b) {
            let bad = forward.iter().position(|&b| !b).unwrap();
            return Err(Error::NotIrreducible(format!("`{}` is not reachable from `{}`", self.ids[bad], self.ids[0])));
        }
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for x in 0..n {
            for (y, _) in self.neighbors(x) {
                rev[y].push(x);
            }
        }
        let backward = self.reach(0, |x| rev[x].clone());
        if let Some(bad) = backward.iter().position(|&b| !b) {
            return Err(Error::NotIrreducible(format!("`{}` cannot reach `{}`", self.ids[bad], self.ids[0])));
        }
        Ok(())
    }

    fn reach(&self, start: usize, next: impl Fn(usize) -> Vec<usize>) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(x) = queue.pop_front() {
            for y in next(x) {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    }

    fn recover_measure(&self) -> Result<Vec<f64>> {
        let n = self.n();
        let mut logmu = vec![f64::NAN; n];
        logmu[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(x) = queue.pop_front() {
            for (y, w) in self.neighbors(x) {
                if logmu[y].is_nan() {
                    let back = self.rate(y, x);
                    if back == 0.0 {
                        return Err(Error::NotReversible { x: self.ids[x].clone(), y: self.ids[y].clone(), rel: 1.0 });
                    }
                    logmu[y] = logmu[x] + w.ln() - back.ln();
                    queue.push_back(y);
                }
            }
        }
        let top = logmu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut mu: Vec<f64> = logmu.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|m| *m /= total);
        Ok(mu)
    }

    fn check_balance(&self) -> Result<()> {
        for x in 0..self.n() {
            for (y, w) in self.neighbors(x) {
                let a = self.mu[x] * w;
                let b = self.mu[y] * self.rate(y, x);
                let rel = (a - b).abs() / a.max(b);
                if !(rel <= BALANCE_TOL) {
                    return Err(Error::NotReversible { x: self.ids[x].clone(), y: self.ids[y].clone(), rel });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, x: usize) -> &str {
        &self.ids[x]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownState(id.into()))
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Outgoing rates of `x`, sorted by target index.
    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.offsets[x], self.offsets[x + 1]);
        self.targets[a..b].iter().copied().zip(self.rates[a..b].iter().copied())
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        let (a, b) = (self.offsets[x], self.offsets[x + 1]);
        match self.targets[a..b].binary_search(&y) {
            Ok(k) => self.rates[a + k],
            Err(_) => 0.0,
        }
    }

    /// Total jump rate w(x).
    pub fn out_rate(&self, x: usize) -> f64 {
        self.out_rate[x]
    }

    pub fn conductance(&self, x: usize, y: usize) -> f64 {
        self.mu[x] * self.rate(x, y)
    }

    /// All edges (x, y, w) with w > 0.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |x| self.neighbors(x).map(move |(y, w)| (x, y, w)))
    }

    pub fn mass(&self, a: &Subset) -> f64 {
        a.iter().map(|x| self.mu[x]).sum()
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        self.mu.iter().zip(f).map(|(m, v)| m * v).sum()
    }

    /// ½ Σ c(x,y) (f(x) − f(y))².
    pub fn dirichlet_form(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        Ok(0.5 * self.edges().map(|(x, y, w)| self.mu[x] * w * (f[x] - f[y]).powi(2)).sum::<f64>())
    }

    pub fn variance(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        let m = self.expectation(f);
        Ok(self.mu.iter().zip(f).map(|(p, v)| p * (v - m).powi(2)).sum())
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<()> {
        if got != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got });
        }
        Ok(())
    }

    /// √μ-conjugate of −L: diagonal w(x), off-diagonal −√(w(x,y) w(y,x)).
    pub fn symmetrized(&self) -> SymMatrix {
        let mut b = SymBuilder::new(self.n());
        for x in 0..self.n() {
            b.add_diag(x, self.out_rate[x]);
            for (y, w) in self.neighbors(x) {
                if x < y {
                    b.add_sym(x, y, -(w * self.rate(y, x)).sqrt());
                }
            }
        }
        b.build()
    }

    /// Smallest nonzero eigenvalue of −L in ℓ²(μ); +∞ for a single state.
    pub fn spectral_gap(&self) -> Result<f64> {
        self.gap_with_limit(linalg::DENSE_LIMIT).map(|(g, _)| g)
    }

    /// Spectral gap together with a normalized eigenfunction, choosing the
    /// dense or iterative path from `dense_limit`.
    pub fn gap_with_limit(&self, dense_limit: usize) -> Result<(f64, Vec<f64>)> {
        if self.n() == 1 {
            return Ok((f64::INFINITY, vec![0.0]));
        }
        let m = self.symmetrized();
        let u: Vec<f64> = self.mu.iter().map(|m| m.sqrt()).collect();
        let pair = linalg::smallest_eigenpair_with_limit(&m, Some(&u), dense_limit)?;
        let f: Vec<f64> = pair.vector.iter().zip(&u).map(|(v, s)| v / s).collect();
        let gap = self.dirichlet_form(&f)? / self.variance(&f)?;
        Ok((gap, f))
    }

    /// Chain on A with jumps leaving A suppressed and measure μ(·|A).
    pub fn restricted(&self, a: &Subset) -> Result<ReversibleChain> {
        if a.is_empty() {
            return Err(Error::EmptySet("restriction to an empty set".into()));
        }
        let local = a.local_index(self.n());
        let ids = a.iter().map(|x| self.ids[x].clone()).collect();
        let mut edges = Vec::new();
        for x in a.iter() {
            for (y, w) in self.neighbors(x) {
                if let Some(ly) = local[y] {
                    edges.push((local[x].unwrap(), ly, w));
                }
            }
        }
        let total = self.mass(a);
        let mu = a.iter().map(|x| self.mu[x] / total).collect();
        ReversibleChain::new(ids, edges, Some(mu))
    }

    /// max over x ∈ A of 1/μ_A(x).
    pub fn chi(&self, a: &Subset) -> Result<f64> {
        if a.is_empty() {
            return Err(Error::EmptySet("chi of an empty set".into()));
        }
        let total = self.mass(a);
        Ok(a.iter().map(|x| total / self.mu[x]).fold(1.0, f64::max))
    }

    /// Whether the chain restricted to A is irreducible (true for empty A).
    pub fn is_irreducible_on(&self, a: &Subset) -> bool {
        let Some(start) = a.iter().next() else { return true };
        let mut seen = vec![false; self.n()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut count = 1;
        while let Some(x) = queue.pop_front() {
            for (y, _) in self.neighbors(x) {
                if a.contains(y) && !seen[y] {
                    seen[y] = true;
                    count += 1;
                    queue.push_back(y);
                }
            }
        }
        count == a.len()
    }

    /// The chain watched only while in A.
    pub fn trace_chain(&self, a: &Subset) -> Result<ReversibleChain> {
        crate::killed::restricted_lambda_chain(self, a, &Subset::empty(self.n()), crate::killed::Rate::Finite(0.0))
            .map(|(c, _)| c)
    }

    pub fn subset_from_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<Subset> {
        let members = ids.iter().map(|s| self.index_of(s.as_ref())).collect::<Result<Vec<_>>>()?;
        Ok(Subset::new(self.n(), members))
    }

    pub fn full_set(&self) -> Subset {
        Subset::new(self.n(), (0..self.n()).collect())
    }
}

fn normalized_measure(mut mu: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    if mu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: mu.len() });
    }
    if mu.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
        return Err(Error::InvalidArgument("measure must be positive and finite".into()));
    }
    let total: f64 = mu.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        mu.iter_mut().for_each(|m| *m /= total);
    }
    Ok(mu)
}

/// Set of state indices with a membership mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subset {
    members: Vec<usize>,
    mask: Vec<bool>,
}

impl Subset {
    pub fn new(n: usize, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        let mut mask = vec![false; n];
        for &x in &members {
            mask[x] = true;
        }
        Subset { members, mask }
    }

    pub fn empty(n: usize) -> Self {
        Subset { members: Vec::new(), mask: vec![false; n] }
    }

    pub fn from_predicate(n: usize, pred: impl Fn(usize) -> bool) -> Self {
        Subset::new(n, (0..n).filter(|&x| pred(x)).collect())
    }

    pub fn contains(&self, x: usize) -> bool {
        self.mask[x]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn minus(&self, other: &Subset) -> Subset {
        Subset::from_predicate(self.universe(), |x| self.mask[x] && !other.mask[x])
    }

    pub fn intersect(&self, other: &Subset) -> Subset {
        Subset::from_predicate(self.universe(), |x| self.mask[x] && other.mask[x])
    }

    pub fn union(&self, other: &Subset) -> Subset {
        Subset::from_predicate(self.universe(), |x| self.mask[x] || other.mask[x])
    }

    pub fn complement(&self) -> Subset {
        Subset::from_predicate(self.universe(), |x| !self.mask[x])
    }

    pub fn indicator(&self) -> Vec<f64> {
        self.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Map from global index to position inside the subset.
    pub fn local_index(&self, n: usize) -> Vec<Option<usize>> {
        let mut local = vec![None; n];
        for (k, &x) in self.members.iter().enumerate() {
            local[x] = Some(k);
        }
        local
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IrreducibilityFlags {
    pub r: bool,
    pub s: bool,
    pub r_minus_s: bool,
    pub s_minus_r: bool,
}

impl IrreducibilityFlags {
    pub fn all(&self) -> bool {
        self.r && self.s && self.r_minus_s && self.s_minus_r
    }
}

/// Overlapping two-set cover (R, S) of the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverPair {
    r: Subset,
    s: Subset,
    r_minus_s: Subset,
    s_minus_r: Subset,
    both: Subset,
    flags: IrreducibilityFlags,
}

impl CoverPair {
    pub fn new(chain: &ReversibleChain, r: Subset, s: Subset) -> Result<Self> {
        let n = chain.n();
        if r.universe() != n || s.universe() != n {
            return Err(Error::DimensionMismatch { expected: n, got: r.universe().min(s.universe()) });
        }
        if r.is_empty() || s.is_empty() {
            return Err(Error::NotACover("R and S must be nonempty".into()));
        }
        if let Some(x) = (0..n).find(|&x| !r.contains(x) && !s.contains(x)) {
            return Err(Error::NotACover(format!("state `{}` is in neither R nor S", chain.id(x))));
        }
        let r_minus_s = r.minus(&s);
        let s_minus_r = s.minus(&r);
        let both = r.intersect(&s);
        let flags = IrreducibilityFlags {
            r: chain.is_irreducible_on(&r),
            s: chain.is_irreducible_on(&s),
            r_minus_s: chain.is_irreducible_on(&r_minus_s),
            s_minus_r: chain.is_irreducible_on(&s_minus_r),
        };
        Ok(CoverPair { r, s, r_minus_s, s_minus_r, both, flags })
    }

    pub fn from_ids<S: AsRef<str>>(chain: &ReversibleChain, r: &[S], s: &[S]) -> Result<Self> {
        Self::new(chain, chain.subset_from_ids(r)?, chain.subset_from_ids(s)?)
    }

    pub fn r(&self) -> &Subset {
        &self.r
    }

    pub fn s(&self) -> &Subset {
        &self.s
    }

    pub fn r_minus_s(&self) -> &Subset {
        &self.r_minus_s
    }

    pub fn s_minus_r(&self) -> &Subset {
        &self.s_minus_r
    }

    pub fn both(&self) -> &Subset {
        &self.both
    }

    pub fn flags(&self) -> IrreducibilityFlags {
        self.flags
    }

    /// The cover with the roles of R and S exchanged.
    pub fn swapped(&self) -> CoverPair {
        CoverPair {
            r: self.s.clone(),
            s: self.r.clone(),
            r_minus_s: self.s_minus_r.clone(),
            s_minus_r: self.r_minus_s.clone(),
            both: self.both.clone(),
            flags: IrreducibilityFlags {
                r: self.flags.s,
                s: self.flags.r,
                r_minus_s: self.flags.s_minus_r,
                s_minus_r: self.flags.r_minus_s,
            },
        }
    }

    /// Fails unless R, S, R\S and S\R are all irreducible.
    pub fn require_irreducible(&self) -> Result<()> {
        let f = self.flags;
        for (ok, name) in [(f.r, "R"), (f.s, "S"), (f.r_minus_s, "R\\S"), (f.s_minus_r, "S\\R")] {
            if !ok {
                return Err(Error::NotIrreducible(format!("restriction to {name}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> ReversibleChain {
        ReversibleChain::from_named(&["a", "b"], &[("a", "b", 1.0), ("b", "a", 2.0)], None).unwrap()
    }

    fn path3() -> ReversibleChain {
        ReversibleChain::from_named(
            &["a", "b", "c"],
            &[("a", "b", 1.0), ("b", "a", 1.0), ("b", "c", 1.0), ("c", "b", 1.0)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn two_state_measure_and_gap() {
        let c = two_state();
        assert!((c.mu()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.mu()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.spectral_gap().unwrap() - 3.0).abs() < 1e-12);
        assert!((c.dirichlet_form(&[1.0, 0.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn path_gap_and_form() {
        let c = path3();
        assert!((c.spectral_gap().unwrap() - 1.0).abs() < 1e-12);
        assert!((c.dirichlet_form(&[1.0, 0.0, 0.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.dirichlet_form(&[2.0, 2.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn one_way_edge_is_reducible() {
        let e = ReversibleChain::from_named(&["a", "b"], &[("a", "b", 1.0)], None).unwrap_err();
        assert!(matches!(e, Error::NotIrreducible(_)));
    }

    #[test]
    fn negative_rate_rejected() {
        let e = ReversibleChain::from_named(&["a", "b"], &[("a", "b", -1.0), ("b", "a", 1.0)], None).unwrap_err();
        assert!(matches!(e, Error::NegativeRate(..)));
    }

    #[test]
    fn non_reversible_cycle_rejected() {
        let e = ReversibleChain::from_named(
            &["a", "b", "c"],
            &[("a", "b", 2.0), ("b", "c", 2.0), ("c", "a", 2.0), ("b", "a", 1.0), ("c", "b", 1.0), ("a", "c", 1.0)],
            None,
        )
        .unwrap_err();
        assert!(matches!(e, Error::NotReversible { .. }));
    }

    #[test]
    fn wrong_measure_rejected() {
        let e = ReversibleChain::from_named(&["a", "b"], &[("a", "b", 1.0), ("b", "a", 2.0)], Some(&[0.5, 0.5]))
            .unwrap_err();
        assert!(matches!(e, Error::NotReversible { .. }));
    }

    #[test]
    fn restriction_and_chi() {
        let c = path3();
        let a = c.subset_from_ids(&["a", "b"]).unwrap();
        let r = c.restricted(&a).unwrap();
        assert_eq!(r.n(), 2);
        assert_eq!(r.rate(0, 1), 1.0);
        assert!((r.mu()[0] - 0.5).abs() < 1e-15);
        assert!((c.chi(&a).unwrap() - 2.0).abs() < 1e-12);
        let single = c.subset_from_ids(&["a"]).unwrap();
        assert_eq!(c.restricted(&single).unwrap().spectral_gap().unwrap(), f64::INFINITY);
        assert_eq!(c.chi(&single).unwrap(), 1.0);
        let ac = c.subset_from_ids(&["a", "c"]).unwrap();
        assert!(matches!(c.restricted(&ac), Err(Error::NotIrreducible(_))));
        assert!(matches!(c.chi(&Subset::empty(3)), Err(Error::EmptySet(_))));
    }

    #[test]
    fn trace_through_middle() {
        let c = path3();
        let ac = c.subset_from_ids(&["a", "c"]).unwrap();
        let t = c.trace_chain(&ac).unwrap();
        assert!((t.rate(0, 1) - 0.5).abs() < 1e-12);
        assert!((t.rate(1, 0) - 0.5).abs() < 1e-12);
        let full = c.trace_chain(&c.full_set()).unwrap();
        assert_eq!(full.rate(0, 1), 1.0);
    }

    #[test]
    fn cover_flags() {
        let c = path3();
        let cover = CoverPair::from_ids(&c, &["a", "b"], &["b", "c"]).unwrap();
        assert!(cover.flags().all());
        assert_eq!(cover.both().members(), &[1]);
        let bad = CoverPair::from_ids(&c, &["a", "b"], &["a", "c"]).unwrap();
        assert!(!bad.flags().s);
        assert!(bad.require_irreducible().is_err());
        assert!(matches!(CoverPair::from_ids(&c, &["a"], &["b"]), Err(Error::NotACover(_))));
    }
}

//! Soft (κ,λ)-capacities on the network extended by dangling edges
//! r → r̄ (conductance κμ(r)) and s → s̆ (conductance λμ(s)).
//!
//! The dangling nodes are never materialized; their effect is a diagonal
//! term in the linear system on X.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::chain::{CoverPair, ReversibleChain, Subset};
use crate::error::{Error, Result};
use crate::killed::Rate;
use crate::linalg::{SpdSolver, SymBuilder};

/// Divergence tolerance for flows supplied from outside.
pub const EXTERNAL_FLOW_TOL: f64 = 1e-8;
/// Divergence tolerance for currents built here.
pub const INTERNAL_FLOW_TOL: f64 = 1e-10;

/// Oriented edge of the extended network. `Internal(x, y)` has x < y and
/// carries flow from x to y; `Bar(r)` carries flow r̄ → r; `Breve(s)`
/// carries flow s → s̆.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlowEdge {
    Internal(usize, usize),
    Bar(usize),
    Breve(usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Flow {
    pub edges: BTreeMap<FlowEdge, f64>,
}

impl Flow {
    /// Adds `v` units of flow from x to y, keeping the canonical orientation.
    pub fn add(&mut self, x: usize, y: usize, v: f64) {
        let (key, val) = if x < y { (FlowEdge::Internal(x, y), v) } else { (FlowEdge::Internal(y, x), -v) };
        *self.edges.entry(key).or_insert(0.0) += val;
    }

    pub fn add_bar(&mut self, r: usize, v: f64) {
        *self.edges.entry(FlowEdge::Bar(r)).or_insert(0.0) += v;
    }

    pub fn add_breve(&mut self, s: usize, v: f64) {
        *self.edges.entry(FlowEdge::Breve(s)).or_insert(0.0) += v;
    }

    pub fn scaled(&self, a: f64) -> Flow {
        Flow { edges: self.edges.iter().map(|(k, v)| (*k, a * v)).collect() }
    }

    pub fn combine(&self, a: f64, other: &Flow, b: f64) -> Flow {
        let mut out = self.scaled(a);
        for (k, v) in &other.edges {
            *out.edges.entry(*k).or_insert(0.0) += b * v;
        }
        out
    }
}

/// Divergences and boundary sums of a flow.
#[derive(Debug, Clone, Serialize)]
pub struct FlowReport {
    pub divergence: Vec<f64>,
    pub bar_total: f64,
    pub breve_total: f64,
    pub max_violation: f64,
    pub zero_edges: Vec<String>,
}

/// Extended network for a pair of sets and two killing intensities.
#[derive(Debug, Clone, Copy)]
pub struct Network<'a> {
    pub chain: &'a ReversibleChain,
    pub r: &'a Subset,
    pub s: &'a Subset,
    pub kappa: Rate,
    pub lambda: Rate,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityCertificate {
    pub value: f64,
    pub potential: Vec<f64>,
    #[serde(skip)]
    pub current: Flow,
    pub upper_at_potential: f64,
    pub lower_at_current: f64,
    pub duality_gap: f64,
    pub flux_bar: f64,
    pub flux_breve: f64,
    pub phi_kl: f64,
}

fn symmetric_conductance(chain: &ReversibleChain, x: usize, y: usize, w: f64) -> f64 {
    0.5 * (chain.mu()[x] * w + chain.mu()[y] * chain.rate(y, x))
}

impl<'a> Network<'a> {
    pub fn new(chain: &'a ReversibleChain, cover: &'a CoverPair, kappa: Rate, lambda: Rate) -> Self {
        Network { chain, r: cover.r(), s: cover.s(), kappa, lambda }
    }

    /// The network with R, S and κ, λ exchanged.
    pub fn swapped(&self) -> Network<'a> {
        Network { chain: self.chain, r: self.s, s: self.r, kappa: self.lambda, lambda: self.kappa }
    }

    fn kappa_at(&self, x: usize) -> Rate {
        if self.r.contains(x) { self.kappa } else { Rate::Finite(0.0) }
    }

    fn lambda_at(&self, x: usize) -> Rate {
        if self.s.contains(x) { self.lambda } else { Rate::Finite(0.0) }
    }

    /// V(x) = P_x(the κ clock rings before the λ clock).
    pub fn potential(&self) -> Result<Vec<f64>> {
        let n = self.chain.n();
        if self.kappa.is_zero() && self.lambda.is_zero() {
            return Err(Error::SingularSystem("kappa and lambda both vanish".into()));
        }
        if self.kappa == Rate::Infinite && self.lambda == Rate::Infinite {
            if let Some(x) = self.r.intersect(self.s).iter().next() {
                return Err(Error::ConstraintConflict(self.chain.id(x).into()));
            }
        }
        if self.kappa.is_zero() {
            return Ok(vec![0.0; n]);
        }
        if self.lambda.is_zero() {
            return Ok(vec![1.0; n]);
        }
        let mut v = vec![f64::NAN; n];
        for x in 0..n {
            if self.kappa_at(x) == Rate::Infinite {
                v[x] = 1.0;
            } else if self.lambda_at(x) == Rate::Infinite {
                v[x] = 0.0;
            }
        }
        let free = Subset::from_predicate(n, |x| v[x].is_nan());
        if free.is_empty() {
            return Ok(v);
        }
        let local = free.local_index(n);
        let mu = self.chain.mu();
        let mut b = SymBuilder::new(free.len());
        let mut rhs = vec![0.0; free.len()];
        for (k, x) in free.iter().enumerate() {
            let kx = self.kappa_at(x).finite().unwrap();
            let lx = self.lambda_at(x).finite().unwrap();
            b.add_diag(k, mu[x] * (self.chain.out_rate(x) + kx + lx));
            rhs[k] += mu[x] * kx;
            for (y, w) in self.chain.neighbors(x) {
                match local[y] {
                    Some(ly) if k < ly => b.add_sym(k, ly, -symmetric_conductance(self.chain, x, y, w)),
                    Some(_) => {}
                    None => rhs[k] += mu[x] * w * v[y],
                }
            }
        }
        let sol = SpdSolver::new(&b.build())?.solve(&rhs)?;
        for (k, x) in free.iter().enumerate() {
            v[x] = sol[k].clamp(0.0, 1.0);
        }
        Ok(v)
    }

    /// D(f) + κμ(R)E_{μ_R}[(f−1)²] + λμ(S)E_{μ_S}[f²]; an infinite intensity
    /// contributes 0 where the constraint holds exactly and +∞ otherwise.
    pub fn dirichlet_upper(&self, f: &[f64]) -> Result<f64> {
        let mut total = self.chain.dirichlet_form(f)?;
        let mu = self.chain.mu();
        for x in 0..self.chain.n() {
            total += penalty(self.kappa_at(x), mu[x], f[x] - 1.0);
            total += penalty(self.lambda_at(x), mu[x], f[x]);
        }
        Ok(total)
    }

    /// Current entering at r from r̄, in terms of the complementary potential u = 1 − V.
    fn bar_flux(&self, u: &[f64], x: usize) -> f64 {
        let mu = self.chain.mu();
        match self.kappa {
            Rate::Finite(k) => k * mu[x] * u[x],
            Rate::Infinite => {
                let mut out: f64 = self.chain.neighbors(x).map(|(y, w)| mu[x] * w * (u[y] - u[x])).sum();
                if let Rate::Finite(l) = self.lambda_at(x) {
                    out += l * mu[x] * (1.0 - u[x]);
                }
                out
            }
        }
    }

    /// Current leaving s towards s̆, by Kirchhoff's law when λ is infinite.
    fn breve_flux(&self, v: &[f64], x: usize) -> f64 {
        let mu = self.chain.mu();
        match self.lambda {
            Rate::Finite(l) => l * mu[x] * v[x],
            Rate::Infinite => {
                let mut inflow: f64 = self.chain.neighbors(x).map(|(y, w)| mu[x] * w * (v[y] - v[x])).sum();
                if let Rate::Finite(k) = self.kappa_at(x) {
                    inflow += k * mu[x] * (1.0 - v[x]);
                }
                inflow
            }
        }
    }

    pub fn capacity(&self) -> Result<CapacityCertificate> {
        let v = self.potential()?;
        let u = self.swapped().potential()?;
        let upper = self.dirichlet_upper(&v)?;
        let flux_bar: f64 = self.r.iter().map(|x| self.bar_flux(&u, x)).sum();
        let flux_breve: f64 = self.s.iter().map(|x| self.breve_flux(&v, x)).sum();
        let value = upper;
        let tol = 1e-9 * value;
        if (flux_bar - value).abs() > tol || (flux_breve - value).abs() > tol {
            return Err(Error::ConvergenceFailure(format!(
                "capacity evaluations disagree: {value:e}, {flux_bar:e}, {flux_breve:e}"
            )));
        }
        let mut current = Flow::default();
        let mut lower = 0.0;
        if value > 0.0 {
            for (x, y, w) in self.chain.edges() {
                if x < y {
                    current.add(x, y, symmetric_conductance(self.chain, x, y, w) * (v[x] - v[y]) / value);
                }
            }
            for x in self.r.iter() {
                current.add_bar(x, self.bar_flux(&u, x) / value);
            }
            for x in self.s.iter() {
                current.add_breve(x, self.breve_flux(&v, x) / value);
            }
            let energy = self.energy(&current)?;
            lower = 1.0 / energy;
        }
        let gap = if value > 0.0 { (upper - lower).abs() / value } else { 0.0 };
        let mu_r = self.chain.mass(self.r);
        let mu_s = self.chain.mass(self.s);
        Ok(CapacityCertificate {
            value,
            potential: v,
            current,
            upper_at_potential: upper,
            lower_at_current: lower,
            duality_gap: gap,
            flux_bar,
            flux_breve,
            phi_kl: value / (mu_r * mu_s),
        })
    }

    fn conductance_of(&self, e: FlowEdge) -> f64 {
        let mu = self.chain.mu();
        let dangling = |rate: Rate, x: usize| match rate {
            Rate::Finite(v) => v * mu[x],
            Rate::Infinite => f64::INFINITY,
        };
        match e {
            FlowEdge::Internal(x, y) => {
                let w = self.chain.rate(x, y);
                if w == 0.0 { 0.0 } else { symmetric_conductance(self.chain, x, y, w) }
            }
            FlowEdge::Bar(x) if self.r.contains(x) => dangling(self.kappa, x),
            FlowEdge::Breve(x) if self.s.contains(x) => dangling(self.lambda, x),
            _ => 0.0,
        }
    }

    fn edge_name(&self, e: FlowEdge) -> String {
        let id = |x: usize| self.chain.id(x).to_string();
        match e {
            FlowEdge::Internal(x, y) => format!("{} {}", id(x), id(y)),
            FlowEdge::Bar(x) => format!("BAR:{} {}", id(x), id(x)),
            FlowEdge::Breve(x) => format!("{} BREVE:{}", id(x), id(x)),
        }
    }

    /// Energy ½ Σ ψ²/c̃ over oriented edges.
    pub fn energy(&self, flow: &Flow) -> Result<f64> {
        let mut e = 0.0;
        for (&k, &v) in &flow.edges {
            if v == 0.0 {
                continue;
            }
            let c = self.conductance_of(k);
            if c == 0.0 {
                return Err(Error::FlowOnZeroEdge(self.edge_name(k)));
            }
            if c.is_finite() {
                e += v * v / c;
            }
        }
        Ok(e)
    }

    pub fn validate_flow(&self, flow: &Flow) -> FlowReport {
        let n = self.chain.n();
        let mut div = vec![0.0; n];
        let (mut bar, mut breve) = (0.0, 0.0);
        let mut zero_edges = Vec::new();
        for (&k, &v) in &flow.edges {
            if v != 0.0 && self.conductance_of(k) == 0.0 {
                zero_edges.push(self.edge_name(k));
            }
            match k {
                FlowEdge::Internal(x, y) => {
                    div[x] += v;
                    div[y] -= v;
                }
                FlowEdge::Bar(x) => {
                    div[x] -= v;
                    bar += v;
                }
                FlowEdge::Breve(x) => {
                    div[x] += v;
                    breve += v;
                }
            }
        }
        let max_violation = div
            .iter()
            .map(|d| d.abs())
            .fold((bar - 1.0).abs().max((breve - 1.0).abs()), f64::max);
        FlowReport { divergence: div, bar_total: bar, breve_total: breve, max_violation, zero_edges }
    }

    /// 1/energy of a unit flow: a lower bound on the capacity.
    pub fn thomson_lower(&self, flow: &Flow) -> Result<f64> {
        let report = self.validate_flow(flow);
        if let Some(e) = report.zero_edges.first() {
            return Err(Error::FlowOnZeroEdge(e.clone()));
        }
        if !(report.max_violation <= EXTERNAL_FLOW_TOL) {
            return Err(Error::NotAUnitFlow(report.max_violation));
        }
        Ok(1.0 / self.energy(flow)?)
    }
}

fn penalty(rate: Rate, mu: f64, d: f64) -> f64 {
    match rate {
        Rate::Finite(k) => k * mu * d * d,
        Rate::Infinite => {
            if d == 0.0 { 0.0 } else { f64::INFINITY }
        }
    }
}

pub fn equilibrium_potential(chain: &ReversibleChain, cover: &CoverPair, kappa: Rate, lambda: Rate) -> Result<Vec<f64>> {
    Network::new(chain, cover, kappa, lambda).potential()
}

pub fn soft_capacity(chain: &ReversibleChain, cover: &CoverPair, kappa: Rate, lambda: Rate) -> Result<CapacityCertificate> {
    Network::new(chain, cover, kappa, lambda).capacity()
}

pub fn dirichlet_upper(chain: &ReversibleChain, cover: &CoverPair, kappa: Rate, lambda: Rate, f: &[f64]) -> Result<f64> {
    Network::new(chain, cover, kappa, lambda).dirichlet_upper(f)
}

pub fn thomson_lower(chain: &ReversibleChain, cover: &CoverPair, kappa: Rate, lambda: Rate, flow: &Flow) -> Result<f64> {
    Network::new(chain, cover, kappa, lambda).thomson_lower(flow)
}

pub fn validate_flow(chain: &ReversibleChain, cover: &CoverPair, kappa: Rate, lambda: Rate, flow: &Flow) -> FlowReport {
    Network::new(chain, cover, kappa, lambda).validate_flow(flow)
}

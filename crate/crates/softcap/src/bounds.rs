//! Every explicit inequality of the theory, evaluated against exactly
//! computed quantities and returned as pass/fail reports.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::capacity::{CapacityCertificate, Network};
use crate::chain::{CoverPair, IrreducibilityFlags, ReversibleChain, Subset};
use crate::error::{Error, Result};
use crate::killed::{self, QuasiStationaryResult, Rate, SoftExit, SubMarkovGenerator};
use crate::linalg::{self, SpdSolver};

/// Relative slack used when checking containment.
pub const SLACK: f64 = 1e-9;
/// Default value standing in for "much smaller than".
pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BoundReport {
    pub name: String,
    pub exact: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
    pub applicable: bool,
    pub satisfied: bool,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, exact: f64, lower: Option<f64>, upper: Option<f64>, applicable: bool) -> Self {
        let mut r = BoundReport {
            name: name.into(),
            exact,
            lower,
            upper,
            diagnostics: BTreeMap::new(),
            applicable,
            satisfied: false,
        };
        r.satisfied = applicable && r.contains();
        r
    }

    fn contains(&self) -> bool {
        let e = self.exact;
        if e.is_nan() {
            return false;
        }
        let ok_lo = self.lower.is_none_or(|l| l.is_nan() || l <= e + SLACK * l.abs().max(e.abs()));
        let ok_hi = self.upper.is_none_or(|u| u.is_nan() || e <= u + SLACK * u.abs().max(e.abs()));
        ok_lo && ok_hi
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    /// Applicable but violated.
    pub fn violated(&self) -> bool {
        self.applicable && !self.satisfied
    }
}

/// max(ln x, 0) with x clamped below at the smallest positive normal.
pub fn ln_plus(x: f64) -> f64 {
    x.max(f64::MIN_POSITIVE).ln().max(0.0)
}

/// ½√(ε/(1−ε)).
pub fn corridor(eps: f64) -> f64 {
    0.5 * (eps / (1.0 - eps)).sqrt()
}

/// (κ/γ_R)(1 + [ln(γ_R√χ_R/(2κ))]₊); zero when the restricted chain is a single state.
pub fn thermalization_term(kappa: f64, gamma_r: f64, chi_r: f64) -> f64 {
    if gamma_r.is_infinite() {
        return 0.0;
    }
    kappa / gamma_r * (1.0 + ln_plus(gamma_r * chi_r.sqrt() / (2.0 * kappa)))
}

/// κ/λ-independent quantities of a chain and its cover.
#[derive(Debug, Clone)]
pub struct CoverAnalysis<'a> {
    pub chain: &'a ReversibleChain,
    pub cover: &'a CoverPair,
    pub gamma: f64,
    pub gamma_r: f64,
    pub gamma_s: f64,
    pub mu_r: f64,
    pub mu_s: f64,
    pub mu_both: f64,
    pub chi_r: f64,
    pub chi_s: f64,
    /// Hard-killed exit from R\S, absent when R ⊆ S.
    pub hard_r: Option<QuasiStationaryResult>,
    pub hard_s: Option<QuasiStationaryResult>,
}

impl<'a> CoverAnalysis<'a> {
    pub fn new(chain: &'a ReversibleChain, cover: &'a CoverPair) -> Result<Self> {
        cover.require_irreducible()?;
        let hard = |r: &Subset, s: &Subset| match killed::exit_rate_hard(chain, r, s) {
            Ok(q) => Ok(Some(q)),
            Err(Error::EmptyInterior) => Ok(None),
            Err(e) => Err(e),
        };
        Ok(CoverAnalysis {
            chain,
            cover,
            gamma: chain.spectral_gap()?,
            gamma_r: chain.restricted(cover.r())?.spectral_gap()?,
            gamma_s: chain.restricted(cover.s())?.spectral_gap()?,
            mu_r: chain.mass(cover.r()),
            mu_s: chain.mass(cover.s()),
            mu_both: chain.mass(cover.both()),
            chi_r: chain.chi(cover.r())?,
            chi_s: chain.chi(cover.s())?,
            hard_r: hard(cover.r(), cover.s())?,
            hard_s: hard(cover.s(), cover.r())?,
        })
    }

    /// φ*_{R\S}; NaN when R\S is empty.
    pub fn phi_r_hard(&self) -> f64 {
        self.hard_r.as_ref().map_or(f64::NAN, |q| q.rate)
    }

    /// φ*_{S\R}; NaN when S\R is empty.
    pub fn phi_s_hard(&self) -> f64 {
        self.hard_s.as_ref().map_or(f64::NAN, |q| q.rate)
    }

    /// ε*_{R,S} = φ*_{R\S}/γ_R.
    pub fn eps_r_hard(&self) -> f64 {
        self.phi_r_hard() / self.gamma_r
    }

    pub fn eps_s_hard(&self) -> f64 {
        self.phi_s_hard() / self.gamma_s
    }

    /// The hypothesis windows: (κ range, λ range) at the given threshold.
    pub fn windows(&self, threshold: f64) -> ((f64, f64), (f64, f64)) {
        let phi_max = self.phi_r_hard().max(self.phi_s_hard());
        (
            (self.phi_r_hard() / threshold, threshold * self.gamma_r),
            (phi_max / threshold, threshold * self.gamma_s),
        )
    }

    /// `k` log-spaced values strictly inside each window, or `None` when a
    /// window is empty.
    pub fn window_grid(&self, threshold: f64, k: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        let ((k0, k1), (l0, l1)) = self.windows(threshold);
        if !(k0 < k1) || !(l0 < l1) {
            return None;
        }
        let grid = |a: f64, b: f64| -> Vec<f64> {
            (1..=k).map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (k + 1) as f64).exp()).collect()
        };
        Some((grid(k0, k1), grid(l0, l1)))
    }

    /// Geometric midpoints of the two windows.
    pub fn mid_window(&self, threshold: f64) -> (f64, f64) {
        let ((k0, k1), (l0, l1)) = self.windows(threshold);
        ((k0 * k1).sqrt(), (l0 * l1).sqrt())
    }
}

/// Quantities that depend on (κ, λ).
#[derive(Debug, Clone)]
pub struct WindowAnalysis<'a> {
    pub base: &'a CoverAnalysis<'a>,
    pub kappa: f64,
    pub lambda: f64,
    /// Trace on R killed at rate λ on S.
    pub soft_r: SoftExit,
    /// Trace on S killed at rate κ on R.
    pub soft_s: SoftExit,
    pub cert: CapacityCertificate,
}

impl<'a> WindowAnalysis<'a> {
    pub fn new(base: &'a CoverAnalysis<'a>, kappa: f64, lambda: f64) -> Result<Self> {
        if !(kappa > 0.0 && lambda > 0.0 && kappa.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidArgument("kappa and lambda must be positive and finite".into()));
        }
        let (chain, cover) = (base.chain, base.cover);
        Ok(WindowAnalysis {
            base,
            kappa,
            lambda,
            soft_r: killed::soft_exit(chain, cover.r(), cover.s(), lambda)?,
            soft_s: killed::soft_exit(chain, cover.s(), cover.r(), kappa)?,
            cert: Network::new(chain, cover, Rate::Finite(kappa), Rate::Finite(lambda)).capacity()?,
        })
    }

    pub fn phi_r(&self) -> f64 {
        self.soft_r.qsm.rate
    }

    pub fn phi_s(&self) -> f64 {
        self.soft_s.qsm.rate
    }

    pub fn eps_r(&self) -> f64 {
        self.soft_r.epsilon()
    }

    pub fn eps_s(&self) -> f64 {
        self.soft_s.epsilon()
    }

    pub fn phi_kl(&self) -> f64 {
        self.cert.phi_kl
    }

    /// {1 + (κ+φ(1+μ(R∩S)))/γ_R + (λ+φ(1+μ(R∩S)))/γ_S}.
    fn lower_brace(&self) -> f64 {
        let b = self.base;
        let phi = self.phi_kl();
        let t = phi * (1.0 + b.mu_both);
        1.0 + (self.kappa + t) / b.gamma_r + (self.lambda + t) / b.gamma_s
    }

    /// 1 − φ*_{R,λ}/κ − φ*_{S,κ}/λ − corridors.
    fn upper_brace(&self) -> f64 {
        1.0 - self.phi_r() / self.kappa - self.phi_s() / self.lambda - corridor(self.eps_r()) - corridor(self.eps_s())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisDiagnostics {
    pub flags: Flags,
    pub ratios: BTreeMap<String, f64>,
    pub windows: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Flags {
    pub r: bool,
    pub s: bool,
    pub r_minus_s: bool,
    pub s_minus_r: bool,
}

impl From<IrreducibilityFlags> for Flags {
    fn from(f: IrreducibilityFlags) -> Self {
        Flags { r: f.r, s: f.s, r_minus_s: f.r_minus_s, s_minus_r: f.s_minus_r }
    }
}

impl HypothesisDiagnostics {
    pub fn window_ok(&self) -> bool {
        !self.windows.is_empty() && self.windows.values().all(|&b| b)
    }
}

/// Ratios behind the hypotheses and window flags at `threshold`.
pub fn diagnose(analysis: &CoverAnalysis, kappa: f64, lambda: f64, threshold: f64) -> HypothesisDiagnostics {
    let a = analysis;
    let (pr, ps) = (a.phi_r_hard(), a.phi_s_hard());
    let mut ratios = BTreeMap::new();
    ratios.insert("phi_r_hard/gamma_r".into(), pr / a.gamma_r);
    ratios.insert("phi_s_hard/gamma_s".into(), ps / a.gamma_s);
    ratios.insert("phi_r_hard/gamma_s".into(), pr / a.gamma_s);
    ratios.insert("mu_s-mu_r".into(), a.mu_s - a.mu_r);
    ratios.insert("ln_chi_s/gamma_s*phi_r_hard".into(), a.chi_s.ln() / a.gamma_s * pr);
    ratios.insert("ln_chi_r/gamma_r*phi_r_hard".into(), a.chi_r.ln() / a.gamma_r * pr);
    ratios.insert("ln_chi_r/gamma_r*phi_s_hard".into(), a.chi_r.ln() / a.gamma_r * ps);
    ratios.insert("phi_r_hard/kappa".into(), pr / kappa);
    ratios.insert("kappa/gamma_r".into(), kappa / a.gamma_r);
    ratios.insert("phi_max_hard/lambda".into(), pr.max(ps) / lambda);
    ratios.insert("lambda/gamma_s".into(), lambda / a.gamma_s);
    let mut windows = BTreeMap::new();
    for key in ["phi_r_hard/kappa", "kappa/gamma_r", "phi_max_hard/lambda", "lambda/gamma_s"] {
        windows.insert(key.to_string(), ratios[key] <= threshold);
    }
    HypothesisDiagnostics { flags: a.cover.flags().into(), ratios, windows }
}

/// Hypothesis diagnostics without requiring (H): irreducibility flags are
/// always reported, ratios only when the restricted chains are irreducible.
pub fn diagnose_hypotheses(
    chain: &ReversibleChain,
    cover: &CoverPair,
    kappa: f64,
    lambda: f64,
    threshold: f64,
) -> Result<HypothesisDiagnostics> {
    if !cover.flags().all() {
        return Ok(HypothesisDiagnostics { flags: cover.flags().into(), ratios: BTreeMap::new(), windows: BTreeMap::new() });
    }
    let a = CoverAnalysis::new(chain, cover)?;
    Ok(diagnose(&a, kappa, lambda, threshold))
}

/// Lower and upper bounds on the spectral gap in terms of φ_κ^λ.
pub fn gap_bounds(w: &WindowAnalysis) -> [BoundReport; 2] {
    let phi = w.phi_kl();
    let lo = phi / w.lower_brace();
    let brace = w.upper_brace();
    let upper_ok = w.eps_r() < 1.0 && w.eps_s() < 1.0 && brace > 0.0;
    let up = phi / (brace * brace);
    [
        BoundReport::new("gap_lower", w.base.gamma, Some(lo), None, true).with("phi_kl", phi),
        BoundReport::new("gap_upper", w.base.gamma, None, Some(up), upper_ok)
            .with("phi_kl", phi)
            .with("brace", brace)
            .with("eps_r", w.eps_r())
            .with("eps_s", w.eps_s()),
    ]
}

/// Two-sided bounds on φ*_{R,λ_S}, evaluated with the exact φ* substituted.
pub fn exit_rate_bounds(w: &WindowAnalysis) -> [BoundReport; 2] {
    let b = w.base;
    let phi = w.phi_r();
    let c = w.cert.value;
    let ratio = phi / w.lambda;
    let lower_factor = (1.0 - 2.0 * ratio / b.mu_s) / (1.0 - ratio).powi(2);
    let lo = c / b.mu_r * lower_factor / w.lower_brace();
    let brace = 1.0 - phi / w.kappa - corridor(w.eps_r());
    let upper_factor = 1.0 + ratio;
    let up = c / b.mu_r * upper_factor / (brace * brace);
    [
        BoundReport::new("exit_rate_lower", phi, Some(lo), None, ratio != 1.0).with("factor", lower_factor),
        BoundReport::new("exit_rate_upper", phi, None, Some(up), w.eps_r() < 1.0 && brace > 0.0)
            .with("factor", upper_factor)
            .with("brace", brace),
    ]
}

/// φ_κ^λ ≤ μ(S)⁻¹ φ*_{R\S} (1+κ/γ_R)/(1−ε*_{R,S}), and μ(S)⁻¹ ≤ 2.
pub fn capacity_rate_upper(w: &WindowAnalysis) -> [BoundReport; 2] {
    let b = w.base;
    let eps = b.eps_r_hard();
    let applicable = b.mu_s >= b.mu_r && eps <= 1.0 && b.hard_r.is_some();
    let up = b.phi_r_hard() * (1.0 + w.kappa / b.gamma_r) / (1.0 - eps) / b.mu_s;
    [
        BoundReport::new("capacity_rate_upper", w.phi_kl(), None, Some(up), applicable).with("eps_r_hard", eps),
        BoundReport::new("capacity_rate_mass", 1.0 / b.mu_s, None, Some(2.0), b.mu_s >= b.mu_r),
    ]
}

/// E_{μ_R}[V|_R] from below and E_{μ_S}[V|_S] from above.
pub fn potential_means(w: &WindowAnalysis) -> [BoundReport; 2] {
    let b = w.base;
    let v = &w.cert.potential;
    let cover = b.cover;
    let mean = |a: &Subset| a.iter().map(|x| b.chain.mu()[x] * v[x]).sum::<f64>() / b.chain.mass(a);
    let lo = 1.0 - w.phi_r() / w.kappa - corridor(w.eps_r());
    let up = w.phi_s() / w.lambda + corridor(w.eps_s());
    [
        BoundReport::new("potential_mean_r", mean(cover.r()), Some(lo), None, w.eps_r() < 1.0),
        BoundReport::new("potential_mean_s", mean(cover.s()), None, Some(up), w.eps_s() < 1.0),
    ]
}

/// Var_{μ_R}(h*) ≤ ε/(1−ε) and d_TV(μ*, μ_R) ≤ ½√(ε/(1−ε)).
pub fn density_variance(w: &WindowAnalysis) -> [BoundReport; 2] {
    let q = &w.soft_r.qsm;
    let base = &w.soft_r.generator.measure;
    let eps = w.eps_r();
    let var = q.density.iter().zip(base).map(|(h, p)| p * (h - 1.0).powi(2)).sum();
    let tv = 0.5 * q.measure.iter().zip(base).map(|(a, b)| (a - b).abs()).sum::<f64>();
    let ok = eps < 1.0;
    [
        BoundReport::new("density_variance", var, None, Some(eps / (1.0 - eps)), ok).with("eps", eps),
        BoundReport::new("density_tv", tv, None, Some(corridor(eps)), ok).with("eps", eps),
    ]
}

/// φ* below the two explicit exit-rate bounds and E_{μ_R}[T^R] ≤ 1/φ*.
pub fn exit_bounds(w: &WindowAnalysis) -> Result<[BoundReport; 3]> {
    let b = w.base;
    let [u1, u2, mean] = killed::exit_rate_upper_bounds(b.chain, b.cover.r(), b.cover.s(), w.lambda)?;
    let phi = w.phi_r();
    Ok([
        BoundReport::new("exit_bound_1", phi, None, Some(u1), b.hard_r.is_some()),
        BoundReport::new("exit_bound_2", phi, None, Some(u2), true),
        BoundReport::new("exit_bound_3", mean, None, Some(1.0 / phi), true),
    ])
}

/// Exact survival probabilities of the chain killed at state-dependent
/// rates, by spectral decomposition of the symmetrized generator.
pub struct KilledSemigroup {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    sqrt_mu: Vec<f64>,
    right: Vec<f64>,
}

impl KilledSemigroup {
    pub fn new(chain: &ReversibleChain, kill: &[f64]) -> Result<Self> {
        let n = chain.n();
        if n > linalg::DENSE_LIMIT {
            return Err(Error::TooLargeForExact(format!("{n} states for an exact semigroup")));
        }
        chain.check_len(kill.len())?;
        let gen = SubMarkovGenerator {
            domain: (0..n).collect(),
            jumps: (0..n).map(|x| chain.neighbors(x).collect()).collect(),
            kill: kill.to_vec(),
            measure: chain.mu().to_vec(),
        };
        let (values, vectors) = linalg::full_eigen(&gen.symmetrized());
        let sqrt_mu: Vec<f64> = chain.mu().iter().map(|m| m.sqrt()).collect();
        let right = (0..n).map(|k| (0..n).map(|y| sqrt_mu[y] * vectors[(y, k)]).sum()).collect();
        Ok(KilledSemigroup { values, vectors, sqrt_mu, right })
    }

    /// Killing rate λ on S.
    pub fn on_set(chain: &ReversibleChain, s: &Subset, lambda: f64) -> Result<Self> {
        Self::new(chain, &s.indicator().iter().map(|v| v * lambda).collect::<Vec<_>>())
    }

    /// Coefficients of a starting law in the eigenbasis.
    pub fn start(&self, nu: &[f64]) -> Vec<f64> {
        let n = self.sqrt_mu.len();
        (0..n)
            .map(|k| (0..n).filter(|&x| nu[x] != 0.0).map(|x| nu[x] / self.sqrt_mu[x] * self.vectors[(x, k)]).sum::<f64>() * self.right[k])
            .collect()
    }

    /// P_ν(killing time > t) for coefficients from [`KilledSemigroup::start`].
    pub fn survival(&self, coeffs: &[f64], t: f64) -> f64 {
        self.values.iter().zip(coeffs).map(|(v, c)| (-t * v).exp() * c).sum::<f64>().clamp(0.0, 1.0)
    }
}

/// Survival envelopes from μ* and the corridor for the μ_R start, on a grid
/// of rescaled times t (real time t/φ*).
pub fn survival_envelope(w: &WindowAnalysis, t_grid: &[f64]) -> Result<Vec<BoundReport>> {
    let b = w.base;
    let phi = w.phi_r();
    let lam = w.lambda;
    let sg = KilledSemigroup::on_set(b.chain, b.cover.s(), lam)?;
    let n = b.chain.n();
    let mut star = vec![0.0; n];
    let mut mu_r = vec![0.0; n];
    for (k, &x) in w.soft_r.qsm.domain.iter().enumerate() {
        star[x] = w.soft_r.qsm.measure[k];
        mu_r[x] = w.soft_r.generator.measure[k];
    }
    let (cs, cr) = (sg.start(&star), sg.start(&mu_r));
    let root = (phi / lam).sqrt();
    let band = corridor(w.eps_r());
    let mut out = Vec::new();
    for &t in t_grid {
        let p_star = sg.survival(&cs, t / phi);
        let p_r = sg.survival(&cr, t / phi);
        let lo = (-t).exp();
        let up = (-t).exp() * (root.exp() + (t - 1.0 / root).exp());
        out.push(
            BoundReport::new(format!("survival_envelope[t={t}]"), p_star, Some(lo), Some(up), lam >= phi && t >= root)
                .with("t", t),
        );
        out.push(
            BoundReport::new(format!("survival_corridor[t={t}]"), p_r, Some(p_star - band), Some(p_star + band), w.eps_r() < 1.0)
                .with("t", t),
        );
    }
    Ok(out)
}

/// Distance to μ_R of the law of X(T_{κ_R}) from each x ∈ R, as
/// κ(κ − L^R)⁻¹ with L^R the trace generator on R.
pub fn thermalization_laws(chain: &ReversibleChain, r: &Subset, kappa: f64) -> Result<Vec<Vec<f64>>> {
    let mut gen = killed::traced_killed_generator(chain, r, &Subset::empty(chain.n()), 0.0)?;
    gen.kill = vec![kappa; gen.len()];
    let solver = SpdSolver::new(&gen.weighted())?;
    let m = gen.len();
    let mut laws = Vec::with_capacity(m);
    for x in 0..m {
        let mut e = vec![0.0; m];
        e[x] = 1.0;
        let g = solver.solve(&e)?;
        laws.push(g.iter().zip(&gen.measure).map(|(a, p)| kappa * a * p).collect());
    }
    Ok(laws)
}

/// TV bound on the law at T_{κ_R} and the survival envelope from `start`.
pub fn thermalization_bounds(w: &WindowAnalysis, start: &[f64], t_grid: &[f64]) -> Result<Vec<BoundReport>> {
    let b = w.base;
    let (chain, cover) = (b.chain, b.cover);
    let kappa = w.kappa;
    let term = thermalization_term(kappa, b.gamma_r, b.chi_r);
    let base: Vec<f64> = cover.r().iter().map(|x| chain.mu()[x] / b.mu_r).collect();
    let tv = thermalization_laws(chain, cover.r(), kappa)?
        .iter()
        .map(|law| 0.5 * law.iter().zip(&base).map(|(a, p)| (a - p).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut out = vec![BoundReport::new("thermalization_tv", tv, None, Some(term), kappa > 0.0)];
    // P_π(T_λS < T_κR) = 1 − E_π[V]
    let delta = (1.0 - start.iter().zip(&w.cert.potential).map(|(p, v)| p * v).sum::<f64>()).max(0.0);
    let eta = delta + term + corridor(w.eps_r());
    let phi = w.phi_r();
    let m = kappa.min(w.lambda);
    let sg = KilledSemigroup::on_set(chain, cover.s(), w.lambda)?;
    let cs = sg.start(start);
    let applicable = w.lambda >= phi && w.eps_r() < 1.0;
    for &t in t_grid {
        let p = sg.survival(&cs, t / phi);
        let raw_lo = (-t).exp() * (1.0 - eta * t.exp());
        let raw_up = (-t).exp() * ((2.0 * (phi / m).sqrt()).exp() + (eta + 2.0 * (-(m / phi).sqrt()).exp()) * t.exp());
        let (lo, up) = (raw_lo.clamp(0.0, 1.0), raw_up.clamp(0.0, 1.0));
        let vacuous = raw_lo <= 0.0 && raw_up >= 1.0;
        out.push(
            BoundReport::new(format!("thermalization_envelope[t={t}]"), p, Some(lo), Some(up), applicable)
                .with("t", t)
                .with("delta", delta)
                .with("eta", eta)
                .with("vacuous", if vacuous { 1.0 } else { 0.0 }),
        );
    }
    Ok(out)
}

/// φ* ≥ φ̃* and φ̃* = λ μ̃*(S) for the chain killed at rate λ on S.
pub fn whole_space_checks(w: &WindowAnalysis) -> Result<[BoundReport; 2]> {
    let b = w.base;
    let (phi_t, mu_t) = killed::whole_space_killed_rate(b.chain, b.cover.s(), w.lambda)?;
    let mass: f64 = b.cover.s().iter().map(|x| mu_t[x]).sum();
    let ident = w.lambda * mass;
    Ok([
        BoundReport::new("whole_space_order", w.phi_r(), Some(phi_t), None, true),
        BoundReport::new("whole_space_identity", phi_t, Some(ident), Some(ident), true),
    ])
}

/// The gap and exit-rate ratios against their explicit brackets.
pub fn ratio_check(w: &WindowAnalysis, diag: &HypothesisDiagnostics) -> [BoundReport; 2] {
    let b = w.base;
    let [glo, gup] = gap_bounds(w);
    let [elo, eup] = exit_rate_bounds(w);
    let phi = w.phi_kl();
    let c_over_mu = w.cert.value / b.mu_r;
    let ok = diag.window_ok();
    [
        BoundReport::new(
            "ratio_gap",
            b.gamma / phi,
            glo.lower.map(|l| l / phi),
            gup.applicable.then(|| gup.upper.unwrap() / phi),
            ok,
        ),
        BoundReport::new(
            "ratio_exit",
            w.phi_r() / c_over_mu,
            elo.lower.map(|l| l / c_over_mu),
            eup.applicable.then(|| eup.upper.unwrap() / c_over_mu),
            ok,
        ),
    ]
}

/// Pairwise soft capacities of a multi-set cover.
#[derive(Debug, Clone, Serialize)]
pub struct MultiCover {
    pub phi_pairs: Vec<Vec<f64>>,
    pub phi: f64,
    pub phi_each: Vec<f64>,
    pub bound: f64,
    pub bound_simple: f64,
}

/// Lower bounds on γ from any finite cover by irreducible sets.
pub fn multi_cover(chain: &ReversibleChain, sets: &[Subset], kappas: &[f64]) -> Result<MultiCover> {
    let m = sets.len();
    if m < 2 || kappas.len() != m {
        return Err(Error::NotACover("need at least two sets and one kappa per set".into()));
    }
    let mut covered = vec![false; chain.n()];
    for (i, a) in sets.iter().enumerate() {
        if a.is_empty() || !chain.is_irreducible_on(a) {
            return Err(Error::NotACover(format!("set {i} is empty or not irreducible")));
        }
        if !(kappas[i] > 0.0) {
            return Err(Error::InvalidArgument("kappas must be positive".into()));
        }
        a.iter().for_each(|x| covered[x] = true);
    }
    if covered.iter().any(|c| !c) {
        return Err(Error::NotACover("sets do not cover the state space".into()));
    }
    let mass: Vec<f64> = sets.iter().map(|a| chain.mass(a)).collect();
    let gaps = sets.iter().map(|a| chain.restricted(a)?.spectral_gap()).collect::<Result<Vec<_>>>()?;
    let mut pairs = vec![vec![f64::NAN; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let net = Network {
                chain,
                r: &sets[i],
                s: &sets[j],
                kappa: Rate::Finite(kappas[i]),
                lambda: Rate::Finite(kappas[j]),
            };
            let v = net.capacity()?.value / (mass[i] * mass[j]);
            pairs[i][j] = v;
            pairs[j][i] = v;
        }
    }
    let inv_phi: f64 = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).map(|(i, j)| 1.0 / pairs[i][j]).sum();
    let phi = 1.0 / inv_phi;
    let phi_each: Vec<f64> = (0..m).map(|i| 1.0 / (0..m).filter(|&j| j != i).map(|j| 1.0 / pairs[i][j]).sum::<f64>()).collect();
    let total_mass: f64 = mass.iter().sum();
    let brace: f64 = 1.0 + (0..m).map(|i| phi / gaps[i] * (kappas[i] / phi_each[i] + total_mass)).sum::<f64>();
    let brace_simple: f64 = 1.0 + (0..m).map(|i| (kappas[i] + phi * total_mass) / gaps[i]).sum::<f64>();
    Ok(MultiCover { phi_pairs: pairs, phi, bound: phi / brace, bound_simple: phi / brace_simple, phi_each })
}

pub fn multi_cover_gap_lower(chain: &ReversibleChain, sets: &[Subset], kappas: &[f64]) -> Result<Vec<BoundReport>> {
    let mc = multi_cover(chain, sets, kappas)?;
    let gamma = chain.spectral_gap()?;
    let mut out = vec![
        BoundReport::new("multi_cover_gap_lower", gamma, Some(mc.bound), None, true),
        BoundReport::new("multi_cover_gap_lower_simple", mc.bound, Some(mc.bound_simple), None, true),
    ];
    for (i, p) in mc.phi_each.iter().enumerate() {
        out.push(BoundReport::new(format!("multi_cover_rate[{i}]"), 1.0 / p, None, Some(1.0 / mc.phi), true));
    }
    Ok(out)
}

/// All reports for one (κ, λ) pair, with `start` for the thermalization envelope.
pub fn full_report(
    w: &WindowAnalysis,
    threshold: f64,
    t_grid: &[f64],
    start: &[f64],
) -> Result<(HypothesisDiagnostics, Vec<BoundReport>)> {
    let b = w.base;
    let diag = diagnose(b, w.kappa, w.lambda, threshold);
    let mut out = Vec::new();
    out.extend(density_variance(w));
    out.extend(exit_bounds(w)?);
    out.extend(survival_envelope(w, t_grid)?);
    out.extend(thermalization_bounds(w, start, t_grid)?);
    out.extend(capacity_rate_upper(w));
    out.extend(gap_bounds(w));
    out.extend(exit_rate_bounds(w));
    out.extend(potential_means(w));
    let sets = [b.cover.r().clone(), b.cover.s().clone()];
    let mc = multi_cover(b.chain, &sets, &[w.kappa, w.lambda])?;
    let two_set = gap_bounds(w)[0].lower.unwrap();
    out.push(BoundReport::new("multi_cover_two_sets", mc.bound, Some(two_set), Some(two_set), true));
    out.extend(multi_cover_gap_lower(b.chain, &sets, &[w.kappa, w.lambda])?);
    out.extend(whole_space_checks(w)?);
    out.extend(ratio_check(w, &diag));
    let q = &w.soft_r.qsm;
    out.push(BoundReport::new("exit_rate_identity", q.rate, Some(q.mean_kill(&w.soft_r.generator)), Some(q.mean_kill(&w.soft_r.generator)), true));
    Ok((diag, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> (ReversibleChain, CoverPair) {
        let c = ReversibleChain::from_named(&["a", "b"], &[("a", "b", 1.0), ("b", "a", 2.0)], None).unwrap();
        let cover = CoverPair::from_ids(&c, &["a"], &["b"]).unwrap();
        (c, cover)
    }

    #[test]
    fn report_containment_slack() {
        assert!(BoundReport::new("x", 1.0, Some(1.0 + 1e-12), None, true).satisfied);
        assert!(!BoundReport::new("x", 1.0, Some(1.1), None, true).satisfied);
        assert!(!BoundReport::new("x", 1.0, None, Some(2.0), false).satisfied);
    }

    #[test]
    fn ln_plus_clamps() {
        assert_eq!(ln_plus(0.5), 0.0);
        assert_eq!(ln_plus(0.0), 0.0);
        assert!((ln_plus(std::f64::consts::E) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_state_gap_bounds() {
        let (c, cv) = two_state();
        let a = CoverAnalysis::new(&c, &cv).unwrap();
        let w = WindowAnalysis::new(&a, 1.0, 1.0).unwrap();
        assert!((w.phi_kl() - 0.75).abs() < 1e-12);
        let [lo, _] = gap_bounds(&w);
        assert!(lo.satisfied);
        // singleton sets: both restricted gaps are infinite
        assert!((lo.lower.unwrap() - 0.75).abs() < 1e-12);
        let [r, s] = potential_means(&w);
        assert!((r.exact - 0.75).abs() < 1e-12);
        assert!((s.exact - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_state_survival() {
        let (c, cv) = two_state();
        let sg = KilledSemigroup::on_set(&c, cv.s(), 2.0).unwrap();
        let cs = sg.start(&[1.0, 0.0]);
        assert!((sg.survival(&cs, 0.0) - 1.0).abs() < 1e-12);
        // generator on {a,b} killed at 2 on b: eigenvalues (5 ± √17)/2
        let l1 = (5.0 - 17f64.sqrt()) / 2.0;
        let l2 = (5.0 + 17f64.sqrt()) / 2.0;
        // P_a(T > t) = A e^{-l1 t} + B e^{-l2 t} with A + B = 1, A l1 + B l2 = 0 (no killing at a)
        let a_coef = l2 / (l2 - l1);
        let b_coef = 1.0 - a_coef;
        let t = 0.7;
        let exact = a_coef * (-l1 * t).exp() + b_coef * (-l2 * t).exp();
        assert!((sg.survival(&cs, t) - exact).abs() < 1e-12);
    }
}

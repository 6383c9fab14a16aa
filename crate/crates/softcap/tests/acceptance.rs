//! One PASS/FAIL line per acceptance criterion.

mod common;

use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use common::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use softcap::bounds::{full_report, CoverAnalysis, WindowAnalysis, DEFAULT_THRESHOLD};
use softcap::capacity::{Flow, Network};
use softcap::chain::{CoverPair, ReversibleChain};
use softcap::killed::{self, Rate};
use softcap::models::{ising_chain, IsingMode, IsingSpec};
use softcap::sim::{
    corteo_experiment, exit_law_experiment, exp_cdf, gheppio_experiment, ks_statistic, ks_threshold, local_exit_times_with,
    CorteoConfig, Start, StartSampler,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((a - b).abs() <= tol, || format!("{what}: {a:e} vs {b:e}"))
}

fn two_state_closed_forms() -> Outcome {
    let (c, cv) = two_state();
    close(c.mu()[0], 2.0 / 3.0, 1e-12, "mu(a)")?;
    close(c.mu()[1], 1.0 / 3.0, 1e-12, "mu(b)")?;
    close(c.spectral_gap().map_err(|e| e.to_string())?, 3.0, 1e-12, "gamma")?;
    let cert = Network::new(&c, &cv, Rate::Finite(1.0), Rate::Finite(1.0)).capacity().map_err(|e| e.to_string())?;
    close(cert.potential[0], 0.75, 1e-12, "V(a)")?;
    close(cert.potential[1], 0.5, 1e-12, "V(b)")?;
    close(cert.value, 1.0 / 6.0, 1e-12, "C")?;
    let q = killed::soft_qsm(&c, cv.r(), cv.s(), Rate::Finite(2.0)).map_err(|e| e.to_string())?;
    close(q.rate, 0.5, 1e-12, "phi*")?;
    Ok("mu, gamma, V, C, phi* exact".into())
}

/// Shortest path between two states by breadth-first search.
fn bfs_path(c: &ReversibleChain, from: usize, to: usize) -> Vec<usize> {
    let mut prev = vec![usize::MAX; c.n()];
    prev[from] = from;
    let mut q = VecDeque::from([from]);
    while let Some(x) = q.pop_front() {
        for (y, _) in c.neighbors(x) {
            if prev[y] == usize::MAX {
                prev[y] = x;
                q.push_back(y);
            }
        }
    }
    let mut path = vec![to];
    while *path.last().unwrap() != from {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    path
}

/// Unit flow routed from a random entry in R to a random exit in S.
fn path_flow(c: &ReversibleChain, cv: &CoverPair, g: &mut ChaCha8Rng) -> Flow {
    let r = cv.r().members()[g.random_range(0..cv.r().len())];
    let s = cv.s().members()[g.random_range(0..cv.s().len())];
    let mut f = Flow::default();
    f.add_bar(r, 1.0);
    for w in bfs_path(c, r, s).windows(2) {
        f.add(w[0], w[1], 1.0);
    }
    f.add_breve(s, 1.0);
    f
}

fn duality() -> Outcome {
    let mut g = rng(2024);
    let grid = [0.1, 1.0, 10.0];
    let (mut worst_gap, mut checks) = (0.0f64, 0usize);
    for i in 0..50 {
        let n = 2 + i % 9;
        let c = random_chain(n, &mut g);
        let cv = random_cover(&c, &mut g);
        for &k in &grid {
            for &l in &grid {
                let net = Network::new(&c, &cv, Rate::Finite(k), Rate::Finite(l));
                let cert = net.capacity().map_err(|e| e.to_string())?;
                worst_gap = worst_gap.max(cert.duality_gap);
                ensure(cert.duality_gap <= 1e-9, || format!("chain {i} k={k} l={l}: gap {:e}", cert.duality_gap))?;
                for _ in 0..100 {
                    let f: Vec<f64> = (0..n).map(|_| g.random_range(-0.5..1.5)).collect();
                    let up = net.dirichlet_upper(&f).map_err(|e| e.to_string())?;
                    ensure(up >= cert.value * (1.0 - 1e-12), || format!("chain {i}: Dirichlet {up:e} < C {:e}", cert.value))?;
                    checks += 1;
                }
                for _ in 0..20 {
                    let a = path_flow(&c, &cv, &mut g);
                    let b = path_flow(&c, &cv, &mut g);
                    let (s, t): (f64, f64) = (g.random(), g.random());
                    let mix = a.combine(s, &b, 1.0 - s).combine(t, &cert.current, 1.0 - t);
                    let low = net.thomson_lower(&mix).map_err(|e| e.to_string())?;
                    ensure(low <= cert.value * (1.0 + 1e-9), || format!("chain {i}: Thomson {low:e} > C {:e}", cert.value))?;
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("450 capacities, {checks} variational checks, worst gap {worst_gap:.1e}"))
}

fn monotone_and_limits() -> Outcome {
    let lambdas: Vec<f64> = (-3..=8).map(|e| 10f64.powi(e)).collect();
    let cases = [("path3", path3()), ("ring6", ring6()), ("double_well_6", double_well(6.0)), ("double_well_8", double_well(8.0))];
    for (name, (c, cv)) in &cases {
        let (r, s) = (cv.r(), cv.s());
        let e = |x: softcap::error::Error| format!("{name}: {x}");
        let mut prev_phi = 0.0;
        let mut prev_gap = f64::INFINITY;
        let mut last = None;
        for &l in &lambdas {
            let soft = killed::soft_exit(c, r, s, l).map_err(e)?;
            ensure(soft.qsm.rate >= prev_phi * (1.0 - 1e-10), || format!("{name}: phi* decreased at lambda={l:e}"))?;
            ensure(soft.gap <= prev_gap * (1.0 + 1e-10), || format!("{name}: gamma_R,lambda increased at lambda={l:e}"))?;
            prev_phi = soft.qsm.rate;
            prev_gap = soft.gap;
            last = Some(soft);
        }
        let last = last.unwrap();
        let hard = killed::exit_rate_hard(c, r, s).map_err(e)?.rate;
        ensure(rel(last.qsm.rate, hard) <= 1e-6, || format!("{name}: phi*(1e8)={:e} hard={hard:e}", last.qsm.rate))?;
        let gamma_r = c.restricted(r).and_then(|x| x.spectral_gap()).map_err(e)?;
        ensure(rel(last.gap, gamma_r) <= 1e-6, || format!("{name}: gap(1e8)={:e} gamma_R={gamma_r:e}", last.gap))?;
        let cap = |k: f64, l: f64| Network::new(c, cv, Rate::Finite(k), Rate::Finite(l)).capacity().map(|x| x.value);
        let grid: Vec<f64> = (-4..=4).map(|e| 10f64.powi(e)).collect();
        for &fixed in &[1e-3, 1.0] {
            let mut prev_k = 0.0;
            let mut prev_l = 0.0;
            for &v in &grid {
                let ck = cap(v, fixed).map_err(e)?;
                let cl = cap(fixed, v).map_err(e)?;
                ensure(ck >= prev_k * (1.0 - 1e-10), || format!("{name}: C decreased in kappa at {v:e}"))?;
                ensure(cl >= prev_l * (1.0 - 1e-10), || format!("{name}: C decreased in lambda at {v:e}"))?;
                prev_k = ck;
                prev_l = cl;
            }
        }
    }
    Ok(format!("{} chains, lambda 1e-3..1e8", cases.len()))
}

const KEY_REPORTS: &[&str] = &[
    "density_variance",
    "density_tv",
    "exit_bound_1",
    "exit_bound_2",
    "exit_bound_3",
    "survival_envelope[t=0.5]",
    "survival_envelope[t=1]",
    "survival_envelope[t=2]",
    "thermalization_tv",
    "capacity_rate_upper",
    "gap_lower",
    "gap_upper",
    "exit_rate_lower",
    "exit_rate_upper",
    "potential_mean_r",
    "potential_mean_s",
    "multi_cover_two_sets",
    "whole_space_order",
    "whole_space_identity",
    "ratio_gap",
    "ratio_exit",
];

fn bound_suite() -> Outcome {
    let mut seen = std::collections::BTreeSet::new();
    let (mut applicable, mut total) = (0usize, 0usize);
    for beta in [4.0, 6.0, 8.0] {
        let (c, cv) = double_well(beta);
        let a = CoverAnalysis::new(&c, &cv).map_err(|e| e.to_string())?;
        let (ks, ls) = a.window_grid(DEFAULT_THRESHOLD, 3).ok_or_else(|| format!("beta={beta}: empty window"))?;
        let mut start = vec![0.0; c.n()];
        start[2] = 1.0;
        for &k in &ks {
            for &l in &ls {
                let w = WindowAnalysis::new(&a, k, l).map_err(|e| e.to_string())?;
                let (_, reports) = full_report(&w, DEFAULT_THRESHOLD, &[0.5, 1.0, 2.0], &start).map_err(|e| e.to_string())?;
                for r in reports {
                    total += 1;
                    if r.applicable {
                        applicable += 1;
                        seen.insert(r.name.clone());
                        ensure(r.satisfied, || {
                            format!("beta={beta} k={k:e} l={l:e}: {} exact={:e} lower={:?} upper={:?}", r.name, r.exact, r.lower, r.upper)
                        })?;
                    }
                }
            }
        }
    }
    let missing: Vec<&&str> = KEY_REPORTS.iter().filter(|n| !seen.contains(**n)).collect();
    ensure(missing.is_empty(), || format!("never applicable: {missing:?}"))?;
    Ok(format!("{applicable}/{total} reports applicable, all satisfied"))
}

fn exit_law() -> Outcome {
    let mut detail = Vec::new();
    let (c, cv) = two_state();
    let rep = exit_law_experiment(&c, &cv, 2.0, 100_000, 501).map_err(|e| e.to_string())?;
    ensure(rep.pass, || format!("two_state KS {:.4} > {:.4}", rep.ks, rep.ks_threshold))?;
    detail.push(format!("two_state KS {:.4}", rep.ks));
    for beta in [4.0, 8.0] {
        let (c, cv) = double_well(beta);
        let (_, l) = CoverAnalysis::new(&c, &cv).map_err(|e| e.to_string())?.mid_window(DEFAULT_THRESHOLD);
        let rep = exit_law_experiment(&c, &cv, l, 100_000, 502).map_err(|e| e.to_string())?;
        ensure(rep.pass, || format!("double_well beta={beta} KS {:.4} > {:.4}", rep.ks, rep.ks_threshold))?;
        detail.push(format!("double_well_{beta} KS {:.4}", rep.ks));
    }
    Ok(format!("{} (threshold {:.4})", detail.join(", "), ks_threshold(100_000)))
}

fn stopping_time() -> Outcome {
    let (c, cv) = double_well(8.0);
    let (k, l) = CoverAnalysis::new(&c, &cv).map_err(|e| e.to_string())?.mid_window(DEFAULT_THRESHOLD);
    let rep = gheppio_experiment(&c, &cv, k, l, &Start::State(2), 10_000, 20).map_err(|e| e.to_string())?;
    ensure(rep.pass_mean, || format!("E[T*] {:e} > {:e} + 3 SEM", rep.t_star.mean, rep.t_star_bound))?;
    for (name, tv) in [("R", &rep.tv_r), ("S", &rep.tv_s)] {
        ensure(tv.pass != Some(false), || format!("TV|{name} {:?} > {:e} + 3 SE", tv.tv, tv.bound))?;
    }
    ensure(rep.pass_direct, || format!("direct R {:.4} < {:.4}", rep.direct_r.mean, rep.direct_r_bound))?;
    ensure(rep.pass_ks == Some(true), || format!("KS {:?} vs {:?} + {:.4}", rep.ks, rep.ks_threshold, rep.ks_corridor))?;
    ensure(rep.pass, || "report flagged failure".into())?;
    Ok(format!(
        "E[T*]={:.3e} <= {:.3e}, direct {:.4} >= {:.4}, KS {:.4}",
        rep.t_star.mean,
        rep.t_star_bound,
        rep.direct_r.mean,
        rep.direct_r_bound,
        rep.ks.unwrap_or(f64::NAN)
    ))
}

fn window_averages() -> Outcome {
    let (c, cv) = double_well(8.0);
    let (k, l) = CoverAnalysis::new(&c, &cv).map_err(|e| e.to_string())?.mid_window(DEFAULT_THRESHOLD);
    let soft = killed::soft_exit(&c, cv.r(), cv.s(), l).map_err(|e| e.to_string())?;
    let f = cv.r_minus_s().indicator();
    let cfg = CorteoConfig::from_eta(0.2, soft.qsm.rate, l, soft.epsilon(), 1.0, 0).map_err(|e| e.to_string())?;
    let rep = corteo_experiment(&c, &cv, k, l, &f, &cfg, 1000, 30).map_err(|e| e.to_string())?;
    ensure(rep.success.mean >= rep.brace - 3.0 * rep.success.sem, || {
        format!("success {:.4} < brace {:.4} - 3 SEM", rep.success.mean, rep.brace)
    })?;
    ensure(rep.pass, || "report flagged failure".into())?;
    Ok(format!("success {:.3} >= brace {:.4}", rep.success.mean, rep.brace))
}

fn oracle_equivalence() -> Outcome {
    let mut cases: Vec<(String, ReversibleChain, CoverPair)> = vec![
        ("two_state".into(), two_state().0, two_state().1),
        ("path3".into(), path3().0, path3().1),
        ("ring6".into(), ring6().0, ring6().1),
    ];
    for beta in [4.0, 6.0, 8.0] {
        let (c, cv) = double_well(beta);
        cases.push((format!("double_well_{beta}"), c, cv));
    }
    let mut g = rng(88);
    for i in 0..33 {
        let n = 2 + i % 11;
        let c = random_chain(n, &mut g);
        let cv = random_cover(&c, &mut g);
        cases.push((format!("random_{i}"), c, cv));
    }
    let mut comparisons = 0;
    for (name, c, cv) in &cases {
        let e = |x: softcap::error::Error| format!("{name}: {x}");
        let gap = c.spectral_gap().map_err(e)?;
        ensure(rel(gap, oracle_gap(c)) <= 1e-9, || format!("{name}: gap"))?;
        for l in [0.01, 1.0, 100.0] {
            let q = killed::soft_qsm(c, cv.r(), cv.s(), Rate::Finite(l)).map_err(e)?;
            let (phi, m) = oracle_qsm(c, cv.r(), cv.s(), l);
            ensure(rel(q.rate, phi) <= 1e-9, || format!("{name} l={l}: phi* {:e} vs {phi:e}", q.rate))?;
            for (a, b) in q.measure.iter().zip(&m) {
                ensure((a - b).abs() <= 1e-9 * b.max(1e-6), || format!("{name} l={l}: mu* {a:e} vs {b:e}"))?;
            }
            comparisons += 1;
        }
        for (k, l) in [(0.01, 0.01), (1.0, 0.1), (0.1, 10.0)] {
            let cert = Network::new(c, cv, Rate::Finite(k), Rate::Finite(l)).capacity().map_err(e)?;
            let (v, cap) = oracle_capacity(c, cv.r(), cv.s(), k, l);
            ensure(rel(cert.value, cap) <= 1e-9, || format!("{name} k={k} l={l}: C"))?;
            for x in 0..c.n() {
                ensure((cert.potential[x] - v[x]).abs() <= 1e-9 * v[x].abs().max(1e-3), || format!("{name}: V({x})"))?;
            }
            comparisons += 1;
        }
    }
    Ok(format!("{} chains, {comparisons} QSM/capacity comparisons", cases.len()))
}

fn ising() -> Outcome {
    let spec = IsingSpec { side: 3, beta: 0.6, field: 0.1, mode: IsingMode::Exact };
    let sys = ising_chain(&spec).map_err(|e| e.to_string())?;
    let (c, cv) = sys.exact().map_err(|e| e.to_string())?;
    ensure(c.n() == 512, || format!("{} states", c.n()))?;
    let d = sys.dynamics();
    let w: Vec<f64> = (0..512).map(|k| (-0.6 * d.energy(&d.decode(k))).exp()).collect();
    let z: f64 = w.iter().sum();
    for k in 0..512 {
        close(c.mu()[k], w[k] / z, 1e-12, "Gibbs weight")?;
    }
    for (x, y, r) in c.edges() {
        ensure(rel(c.mu()[x] * r, c.mu()[y] * c.rate(y, x)) < 1e-12, || "detailed balance".into())?;
        ensure((d.decode(x).iter().zip(&d.decode(y)).filter(|(a, b)| a != b).count()) == 1, || "non-flip edge".into())?;
    }
    ensure(cv.both().is_empty() && cv.r().len() + cv.s().len() == 512, || "cover".into())?;
    ensure(cv.flags().all(), || "irreducibility".into())?;
    let a = CoverAnalysis::new(c, cv).map_err(|e| e.to_string())?;
    let (k, l) = a.mid_window(DEFAULT_THRESHOLD);
    let wa = WindowAnalysis::new(&a, k, l).map_err(|e| e.to_string())?;
    let mut start = vec![0.0; 512];
    start[0] = 1.0;
    let (_, reports) = full_report(&wa, DEFAULT_THRESHOLD, &[0.5, 1.0, 2.0], &start).map_err(|e| e.to_string())?;
    let bad: Vec<&str> = reports.iter().filter(|r| r.violated()).map(|r| r.name.as_str()).collect();
    ensure(bad.is_empty(), || format!("violated {bad:?}"))?;
    // nucleation times from the lattice dynamics itself, started from μ*
    let q = killed::soft_qsm(c, cv.r(), cv.s(), Rate::Finite(l)).map_err(|e| e.to_string())?;
    let sampler = StartSampler::new(&Start::Law(q.extended(512)), 512).map_err(|e| e.to_string())?;
    let n = 10_000;
    let xs = local_exit_times_with(d, l, |g| d.decode(sampler.sample(g)), n, 909).map_err(|e| e.to_string())?;
    let ks = ks_statistic(&xs, exp_cdf(q.rate)).map_err(|e| e.to_string())?;
    ensure(ks <= ks_threshold(n), || format!("KS {ks:.4} > {:.4}", ks_threshold(n)))?;
    Ok(format!("512 states, {} reports, lambda={l:.3e}, KS {ks:.4} <= {:.4}", reports.len(), ks_threshold(n)))
}

fn run_bin(args: &[&str]) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_softcap")).args(args).output().map_err(|e| e.to_string())?;
    ensure(o.status.code() == Some(0), || format!("{args:?} exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)))?;
    Ok(o.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let chain = dir.path().join("dw.chain");
    let cover = dir.path().join("dw.cover");
    let (cs, vs) = (chain.to_str().unwrap(), cover.to_str().unwrap());
    run_bin(&["doublewell", cs, vs, "--beta", "8", "--timestamp", "0"])?;
    let (c, cv) = double_well(8.0);
    let (k, l) = CoverAnalysis::new(&c, &cv).map_err(|e| e.to_string())?.mid_window(DEFAULT_THRESHOLD);
    let (k, l) = (format!("{k:e}"), format!("{l:e}"));
    let kgrid = format!("{k},{}", 2.0 * k.parse::<f64>().unwrap());
    let verify = ["verify", cs, vs, "--kappa-grid", &kgrid, "--lambda-grid", &l, "--timestamp", "0"];
    ensure(run_bin(&verify)? == run_bin(&verify)?, || "verify output differs".into())?;
    let mut runs = 0;
    for exp in ["saturno", "gheppio", "corteo", "tortora"] {
        let dump = dir.path().join(format!("{exp}.tsv"));
        let args = [
            "simulate", cs, vs, "--kappa", &k, "--lambda", &l, "--experiment", exp, "--n", "500", "--seed", "42", "--timestamp",
            "0", "--dump", dump.to_str().unwrap(),
        ];
        let a = run_bin(&args)?;
        let da = std::fs::read(&dump).map_err(|e| e.to_string())?;
        let b = run_bin(&args)?;
        let db = std::fs::read(&dump).map_err(|e| e.to_string())?;
        ensure(a == b && da == db, || format!("simulate {exp} output differs"))?;
        runs += 1;
    }
    Ok(format!("verify and {runs} simulate experiments byte-identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("two-state closed forms", two_state_closed_forms),
        ("Dirichlet-Thomson duality", duality),
        ("monotonicity and limits", monotone_and_limits),
        ("bound containment suite", bound_suite),
        ("exit law from the soft measure", exit_law),
        ("stopping time T*", stopping_time),
        ("window averages", window_averages),
        ("oracle equivalence", oracle_equivalence),
        ("Ising 3x3", ising),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

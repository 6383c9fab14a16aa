//! Dense brute-force oracles and test fixtures, independent of the library's
//! solvers: cyclic Jacobi for eigenproblems, Gauss elimination with partial
//! pivoting for linear systems, explicit Schur complements for traces.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softcap::chain::{CoverPair, ReversibleChain, Subset};
use softcap::models::{double_well_chain, DoubleWellSpec};

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(n: usize) -> Mat {
    vec![vec![0.0; n]; n]
}

/// Eigenvalues (ascending) and column eigenvectors of a symmetric matrix.
pub fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.len();
    let mut a = a.clone();
    let mut v = zeros(n);
    for i in 0..n {
        v[i][i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-300 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..n).map(|k| order.iter().map(|&i| v[k][i]).collect()).collect();
    (vals, vecs)
}

/// Solves a x = b by Gauss elimination with partial pivoting.
pub fn gauss_solve(a: &Mat, b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Mat = a.iter().zip(b).map(|(row, &bi)| row.iter().copied().chain([bi]).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for k in col..=n {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// diag(μ)(−L): the symmetric conductance Laplacian.
pub fn weighted_laplacian(c: &ReversibleChain) -> Mat {
    let n = c.n();
    let mut m = zeros(n);
    for x in 0..n {
        for y in 0..n {
            if x != y {
                let w = c.rate(x, y);
                if w > 0.0 {
                    let cond = c.mu()[x] * w;
                    m[x][y] -= cond;
                    m[x][x] += cond;
                }
            }
        }
    }
    for x in 0..n {
        for y in x + 1..n {
            let s = 0.5 * (m[x][y] + m[y][x]);
            m[x][y] = s;
            m[y][x] = s;
        }
    }
    m
}

/// D^{-1/2} M D^{-1/2}.
pub fn scale(m: &Mat, d: &[f64]) -> Mat {
    let n = m.len();
    (0..n).map(|i| (0..n).map(|j| m[i][j] / (d[i] * d[j]).sqrt()).collect()).collect()
}

pub fn oracle_gap(c: &ReversibleChain) -> f64 {
    let (vals, _) = jacobi_eigen(&scale(&weighted_laplacian(c), c.mu()));
    vals[1]
}

/// Smallest eigenvalue of the trace on R killed at rate λ on S, with the
/// normalized left eigenvector (quasi-stationary measure) on R.
pub fn oracle_qsm(c: &ReversibleChain, r: &Subset, s: &Subset, lambda: f64) -> (f64, Vec<f64>) {
    let n = c.n();
    let mut m = weighted_laplacian(c);
    for x in s.iter() {
        m[x][x] += c.mu()[x] * lambda;
    }
    let rs: Vec<usize> = r.iter().collect();
    let zs: Vec<usize> = (0..n).filter(|&x| !r.contains(x)).collect();
    let mut schur: Mat = rs.iter().map(|&i| rs.iter().map(|&j| m[i][j]).collect()).collect();
    if !zs.is_empty() {
        let mzz: Mat = zs.iter().map(|&i| zs.iter().map(|&j| m[i][j]).collect()).collect();
        for (b, &j) in rs.iter().enumerate() {
            let col: Vec<f64> = zs.iter().map(|&z| m[z][j]).collect();
            let sol = gauss_solve(&mzz, &col);
            for (a, &i) in rs.iter().enumerate() {
                let row: f64 = zs.iter().zip(&sol).map(|(&z, s)| m[i][z] * s).sum();
                schur[a][b] -= row;
            }
        }
        for a in 0..rs.len() {
            for b in a + 1..rs.len() {
                let v = 0.5 * (schur[a][b] + schur[b][a]);
                schur[a][b] = v;
                schur[b][a] = v;
            }
        }
    }
    let d: Vec<f64> = rs.iter().map(|&x| c.mu()[x]).collect();
    let (vals, vecs) = jacobi_eigen(&scale(&schur, &d));
    let mut mstar: Vec<f64> = (0..rs.len()).map(|a| vecs[a][0] * d[a].sqrt()).collect();
    let z: f64 = mstar.iter().sum();
    mstar.iter_mut().for_each(|v| *v /= z);
    (vals[0], mstar)
}

/// Equilibrium potential and soft capacity from the full system on X.
pub fn oracle_capacity(c: &ReversibleChain, r: &Subset, s: &Subset, kappa: f64, lambda: f64) -> (Vec<f64>, f64) {
    let n = c.n();
    let mut m = weighted_laplacian(c);
    let mut b = vec![0.0; n];
    for x in 0..n {
        let mu = c.mu()[x];
        if r.contains(x) {
            m[x][x] += mu * kappa;
            b[x] += mu * kappa;
        }
        if s.contains(x) {
            m[x][x] += mu * lambda;
        }
    }
    let v = gauss_solve(&m, &b);
    let mut cap = 0.0;
    for x in 0..n {
        for y in 0..n {
            if x != y {
                cap += 0.5 * c.mu()[x] * c.rate(x, y) * (v[x] - v[y]).powi(2);
            }
        }
        if r.contains(x) {
            cap += kappa * c.mu()[x] * (1.0 - v[x]).powi(2);
        }
        if s.contains(x) {
            cap += lambda * c.mu()[x] * v[x].powi(2);
        }
    }
    (v, cap)
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

pub fn two_state() -> (ReversibleChain, CoverPair) {
    let c = ReversibleChain::from_named(&["a", "b"], &[("a", "b", 1.0), ("b", "a", 2.0)], None).unwrap();
    let cv = CoverPair::from_ids(&c, &["a"], &["b"]).unwrap();
    (c, cv)
}

/// a - b - c with unit rates, R = {a, b}, S = {b, c}.
pub fn path3() -> (ReversibleChain, CoverPair) {
    let c = ReversibleChain::from_named(
        &["a", "b", "c"],
        &[("a", "b", 1.0), ("b", "a", 1.0), ("b", "c", 1.0), ("c", "b", 1.0)],
        None,
    )
    .unwrap();
    let cv = CoverPair::from_ids(&c, &["a", "b"], &["b", "c"]).unwrap();
    (c, cv)
}

/// Six-cycle with alternating rates, R = {0,1,2,3}, S = {3,4,5,0}.
pub fn ring6() -> (ReversibleChain, CoverPair) {
    let n = 6;
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        let w = if i % 2 == 0 { 1.0 } else { 0.5 };
        edges.push((i, j, w));
        edges.push((j, i, w));
    }
    let c = ReversibleChain::new(ids, edges, None).unwrap();
    let cv = CoverPair::new(&c, Subset::new(n, vec![0, 1, 2, 3]), Subset::new(n, vec![3, 4, 5, 0])).unwrap();
    (c, cv)
}

pub fn double_well(beta: f64) -> (ReversibleChain, CoverPair) {
    double_well_chain(&DoubleWellSpec::canonical(beta)).unwrap()
}

/// Random connected reversible chain on `n` states: spanning tree plus extra
/// edges, random measure, rates c(x,y)/μ(x).
pub fn random_chain(n: usize, rng: &mut ChaCha8Rng) -> ReversibleChain {
    let mu: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let z: f64 = mu.iter().sum();
    let mu: Vec<f64> = mu.iter().map(|m| m / z).collect();
    let mut pairs = Vec::new();
    for y in 1..n {
        pairs.push((rng.random_range(0..y), y));
    }
    for x in 0..n {
        for y in x + 1..n {
            if !pairs.contains(&(x, y)) && rng.random_bool(0.3) {
                pairs.push((x, y));
            }
        }
    }
    let mut edges = Vec::new();
    for (x, y) in pairs {
        let c = rng.random_range(0.05..2.0) * mu[x].min(mu[y]);
        edges.push((x, y, c / mu[x]));
        edges.push((y, x, c / mu[y]));
    }
    ReversibleChain::new((0..n).map(|i| format!("s{i}")).collect(), edges, Some(mu)).unwrap()
}

/// Random cover: each state in R, S or both, with both sets nonempty.
pub fn random_cover(c: &ReversibleChain, rng: &mut ChaCha8Rng) -> CoverPair {
    let n = c.n();
    loop {
        let tags: Vec<u8> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let r = Subset::from_predicate(n, |x| tags[x] != 1);
        let s = Subset::from_predicate(n, |x| tags[x] != 0);
        if !r.is_empty() && !s.is_empty() {
            return CoverPair::new(c, r, s).unwrap();
        }
    }
}

/// Random cover with all four sets irreducible, by rejection.
pub fn random_irreducible_cover(c: &ReversibleChain, rng: &mut ChaCha8Rng) -> Option<CoverPair> {
    for _ in 0..50 {
        let cv = random_cover(c, rng);
        if cv.flags().all() {
            return Some(cv);
        }
    }
    None
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

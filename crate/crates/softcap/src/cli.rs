//! Batch command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{self, BoundReport, CoverAnalysis, WindowAnalysis};
use crate::capacity::Network;
use crate::chain::{CoverPair, ReversibleChain};
use crate::error::{Error, Result};
use crate::io;
use crate::killed::{self, Rate};
use crate::models::{self, DoubleWellSpec, IsingMode, IsingSpec};
use crate::sim::{self, CorteoConfig, Start};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "softcap", version, about = "Soft capacities, metastable exit rates and their bounds for reversible Markov chains")]
pub struct Cli {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Timestamp recorded in the manifest (defaults to SOURCE_DATE_EPOCH, else "unset").
    #[arg(long, global = true)]
    pub timestamp: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Experiment {
    /// Local exit time from the quasi-stationary measure against Exp(φ*).
    #[value(name = "saturno", alias = "exit-law")]
    #[serde(rename = "saturno")]
    ExitLaw,
    /// The stopping time T* and the laws around it.
    #[value(name = "gheppio", alias = "tstar")]
    #[serde(rename = "gheppio")]
    TStar,
    /// Window averages before the first transition.
    #[value(name = "corteo", alias = "averages")]
    #[serde(rename = "corteo")]
    Averages,
    /// Survival from a fixed start and the law at the κ-clock.
    #[value(name = "tortora", alias = "thermalization")]
    #[serde(rename = "tortora")]
    Thermalization,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Spectral gap of the chain, and of the restricted chains when a cover is given.
    Gap {
        chain: String,
        #[arg(long)]
        cover: Option<String>,
    },
    /// Soft capacity certificate.
    Capacity {
        chain: String,
        cover: String,
        #[arg(long)]
        kappa: String,
        #[arg(long)]
        lambda: String,
        /// Flow file giving a Thomson lower bound.
        #[arg(long)]
        flow: Option<String>,
        /// Test function file giving a Dirichlet upper bound.
        #[arg(long)]
        testfn: Option<String>,
    },
    /// Quasi-stationary measure and exit rate of the trace on R killed at rate λ on S.
    Qsm {
        chain: String,
        cover: String,
        #[arg(long)]
        lambda: String,
    },
    /// Every bound over a (κ, λ) grid, as TSV.
    Verify {
        chain: String,
        cover: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        kappa_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        lambda_grid: Vec<f64>,
        #[arg(long, default_value_t = bounds::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        t_grid: Vec<f64>,
        /// Starting state for the thermalization envelope (default: heaviest state of R\S).
        #[arg(long)]
        start: Option<String>,
    },
    /// Seeded simulation experiment, as JSON.
    Simulate {
        chain: String,
        cover: String,
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_enum)]
        experiment: Experiment,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Starting state (default: heaviest state of R\S).
        #[arg(long)]
        start: Option<String>,
        #[arg(long, default_value_t = 0.2)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        n_cycles: usize,
        /// Observable for window averages (default: indicator of R\S).
        #[arg(long)]
        testfn: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        t_grid: Vec<f64>,
        /// Also write one trajectory (stream 0) as TSV.
        #[arg(long)]
        dump: Option<String>,
        #[arg(long, default_value_t = f64::INFINITY)]
        horizon: f64,
    },
    /// Kinetic Ising chain on the L×L torus with the magnetization cover.
    Ising {
        chain_out: String,
        cover_out: String,
        #[arg(long, default_value_t = 3)]
        side: usize,
        #[arg(long, default_value_t = 0.6)]
        beta: f64,
        #[arg(long, default_value_t = 0.1)]
        field: f64,
    },
    /// Metropolis double well: the 11-state canonical profile, or a quartic on --states states.
    Doublewell {
        chain_out: String,
        cover_out: String,
        #[arg(long, default_value_t = 8.0)]
        beta: f64,
        #[arg(long)]
        states: Option<usize>,
        #[arg(long)]
        overlap: Option<usize>,
    },
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub parameters: BTreeMap<String, Value>,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    fn new(command: &str, inputs: &[&str], parameters: BTreeMap<String, Value>, timestamp: &Option<String>) -> Self {
        let timestamp = timestamp
            .clone()
            .or_else(|| std::env::var("SOURCE_DATE_EPOCH").ok())
            .unwrap_or_else(|| "unset".to_string());
        RunManifest {
            command: command.to_string(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            parameters,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
        }
    }
}

fn params(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or_else(|| Value::String(format!("{v}")), Value::Number)
}

fn by_id(chain: &ReversibleChain, idx: impl Iterator<Item = usize>, vals: impl Iterator<Item = f64>) -> BTreeMap<String, Value> {
    idx.zip(vals).map(|(x, v)| (chain.id(x).to_string(), num(v))).collect()
}

fn load_pair(chain: &str, cover: &str) -> Result<(ReversibleChain, CoverPair)> {
    let c = io::load_chain(chain)?;
    let cv = io::load_cover(&c, cover)?;
    Ok((c, cv))
}

/// Heaviest state of R\S, falling back to R.
fn default_start(chain: &ReversibleChain, cover: &CoverPair) -> usize {
    let set = if cover.r_minus_s().is_empty() { cover.r() } else { cover.r_minus_s() };
    set.iter().fold(set.members()[0], |b, x| if chain.mu()[x] > chain.mu()[b] { x } else { b })
}

fn resolve_start(chain: &ReversibleChain, cover: &CoverPair, start: &Option<String>) -> Result<usize> {
    match start {
        Some(id) => chain.index_of(id),
        None => Ok(default_start(chain, cover)),
    }
}

/// Shortest representation after rounding to 15 significant digits.
fn rounded(v: f64) -> f64 {
    format!("{v:.14e}").parse().unwrap_or(v)
}

fn to_json(v: &impl Serialize) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Error::Io(e.to_string()))
}

/// Output text and exit code of one command.
pub fn execute(cli: &Cli) -> Result<(String, i32)> {
    let ts = &cli.timestamp;
    match &cli.command {
        Command::Gap { chain, cover } => {
            let c = io::load_chain(chain)?;
            let mut out = format!("gamma {:?}\n", rounded(c.spectral_gap()?));
            if let Some(path) = cover {
                let cv = io::load_cover(&c, path)?;
                for (name, set) in [("R", cv.r()), ("S", cv.s())] {
                    match c.restricted(set).and_then(|r| r.spectral_gap()) {
                        Ok(g) => writeln!(out, "gamma_{name} {:?}", rounded(g)).unwrap(),
                        Err(Error::NotIrreducible(_)) => writeln!(out, "gamma_{name} reducible").unwrap(),
                        Err(e) => return Err(e),
                    }
                }
            }
            Ok((out, EXIT_OK))
        }
        Command::Capacity { chain, cover, kappa, lambda, flow, testfn } => {
            let (c, cv) = load_pair(chain, cover)?;
            let (k, l) = (Rate::parse(kappa)?, Rate::parse(lambda)?);
            let net = Network::new(&c, &cv, k, l);
            let cert = net.capacity()?;
            let mut inputs = vec![chain.as_str(), cover.as_str()];
            let mut body = json!({
                "capacity": num(cert.value),
                "potential": by_id(&c, 0..c.n(), cert.potential.iter().copied()),
                "duality_gap": num(cert.duality_gap),
                "upper_at_potential": num(cert.upper_at_potential),
                "lower_at_current": num(cert.lower_at_current),
                "flux_bar": num(cert.flux_bar),
                "flux_breve": num(cert.flux_breve),
                "phi_kl": num(cert.phi_kl),
            });
            if let Some(p) = flow {
                inputs.push(p);
                body["thomson_lower"] = num(net.thomson_lower(&io::load_flow(&c, p)?)?);
            }
            if let Some(p) = testfn {
                inputs.push(p);
                body["dirichlet_upper"] = num(net.dirichlet_upper(&io::load_testfn(&c, p)?)?);
            }
            let m = RunManifest::new(
                "capacity",
                &inputs,
                params(&[("kappa", json!(k.to_string())), ("lambda", json!(l.to_string()))]),
                ts,
            );
            body["manifest"] = serde_json::to_value(&m).unwrap();
            Ok((to_json(&body)?, EXIT_OK))
        }
        Command::Qsm { chain, cover, lambda } => {
            let (c, cv) = load_pair(chain, cover)?;
            let l = Rate::parse(lambda)?;
            let q = killed::soft_qsm(&c, cv.r(), cv.s(), l)?;
            let m = RunManifest::new("qsm", &[chain, cover], params(&[("lambda", json!(l.to_string()))]), ts);
            let body = json!({
                "phi_star": num(q.rate),
                "mu_star": by_id(&c, q.domain.iter().copied(), q.measure.iter().copied()),
                "residual": num(q.residual),
                "manifest": m,
            });
            Ok((to_json(&body)?, EXIT_OK))
        }
        Command::Verify { chain, cover, kappa_grid, lambda_grid, threshold, t_grid, start } => {
            let (c, cv) = load_pair(chain, cover)?;
            let m = RunManifest::new(
                "verify",
                &[chain, cover],
                params(&[
                    ("kappa_grid", json!(kappa_grid)),
                    ("lambda_grid", json!(lambda_grid)),
                    ("threshold", json!(threshold)),
                    ("t_grid", json!(t_grid)),
                    ("start", json!(start)),
                ]),
                ts,
            );
            verify(&c, &cv, kappa_grid, lambda_grid, *threshold, t_grid, start, &m)
        }
        Command::Simulate {
            chain,
            cover,
            kappa,
            lambda,
            experiment,
            n,
            seed,
            start,
            eta,
            n_cycles,
            testfn,
            t_grid,
            dump,
            horizon,
        } => {
            let (c, cv) = load_pair(chain, cover)?;
            let x0 = resolve_start(&c, &cv, start)?;
            let mut inputs = vec![chain.as_str(), cover.as_str()];
            let f = match testfn {
                Some(p) => {
                    inputs.push(p);
                    io::load_testfn(&c, p)?
                }
                None => cv.r_minus_s().indicator(),
            };
            let report = match experiment {
                Experiment::ExitLaw => serde_json::to_value(sim::exit_law_experiment(&c, &cv, *lambda, *n, *seed)?),
                Experiment::TStar => {
                    serde_json::to_value(sim::gheppio_experiment(&c, &cv, *kappa, *lambda, &Start::State(x0), *n, *seed)?)
                }
                Experiment::Averages => {
                    let soft = killed::soft_exit(&c, cv.r(), cv.s(), *lambda)?;
                    let sup = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    let cfg = CorteoConfig::from_eta(*eta, soft.qsm.rate, *lambda, soft.epsilon(), sup, *n_cycles)?;
                    serde_json::to_value(sim::corteo_experiment(&c, &cv, *kappa, *lambda, &f, &cfg, *n, *seed)?)
                }
                Experiment::Thermalization => serde_json::to_value(sim::thermalization_experiment(
                    &c,
                    &cv,
                    *kappa,
                    *lambda,
                    &Start::State(x0),
                    t_grid,
                    *n,
                    *seed,
                )?),
            }
            .map_err(|e| Error::Io(e.to_string()))?;
            if let Some(path) = dump {
                let rec = sim::simulate(&c, &cv, *kappa, *lambda, &Start::State(x0), *horizon, *seed)?;
                std::fs::write(path, rec.to_tsv(&c))?;
            }
            let m = RunManifest::new(
                "simulate",
                &inputs,
                params(&[
                    ("kappa", num(*kappa)),
                    ("lambda", num(*lambda)),
                    ("experiment", serde_json::to_value(experiment).unwrap()),
                    ("n", json!(n)),
                    ("seed", json!(seed)),
                    ("start", json!(c.id(x0))),
                    ("eta", num(*eta)),
                    ("n_cycles", json!(n_cycles)),
                    ("t_grid", json!(t_grid)),
                    ("rng", json!(sim::RNG_NAME)),
                ]),
                ts,
            );
            Ok((to_json(&json!({ "manifest": m, "report": report }))?, EXIT_OK))
        }
        Command::Ising { chain_out, cover_out, side, beta, field } => {
            let sys = models::ising_chain(&IsingSpec { side: *side, beta: *beta, field: *field, mode: IsingMode::Exact })?;
            let (c, cv) = sys.exact()?;
            io::save_bundle(c, cv, chain_out, cover_out)?;
            let m = RunManifest::new(
                "ising",
                &[],
                params(&[("side", json!(side)), ("beta", num(*beta)), ("field", num(*field))]),
                ts,
            );
            Ok((to_json(&summary(c, cv, m))?, EXIT_OK))
        }
        Command::Doublewell { chain_out, cover_out, beta, states, overlap } => {
            let spec = match states {
                Some(n) => DoubleWellSpec::quartic(*n, *beta, overlap.unwrap_or(3)),
                None => DoubleWellSpec { overlap: overlap.unwrap_or(1), ..DoubleWellSpec::canonical(*beta) },
            };
            let (c, cv) = models::double_well_chain(&spec)?;
            io::save_bundle(&c, &cv, chain_out, cover_out)?;
            let m = RunManifest::new(
                "doublewell",
                &[],
                params(&[("beta", num(*beta)), ("states", json!(spec.n_states())), ("overlap", json!(spec.overlap))]),
                ts,
            );
            Ok((to_json(&summary(&c, &cv, m))?, EXIT_OK))
        }
    }
}

fn summary(c: &ReversibleChain, cv: &CoverPair, m: RunManifest) -> Value {
    json!({
        "states": c.n(),
        "r": cv.r().len(),
        "s": cv.s().len(),
        "overlap": cv.both().len(),
        "mu_r": num(c.mass(cv.r())),
        "mu_s": num(c.mass(cv.s())),
        "manifest": m,
    })
}

fn flag_row(name: &str, ok: bool) -> BoundReport {
    BoundReport::new(name, if ok { 1.0 } else { 0.0 }, Some(1.0), None, true)
}

#[allow(clippy::too_many_arguments)]
fn verify(
    c: &ReversibleChain,
    cv: &CoverPair,
    kappas: &[f64],
    lambdas: &[f64],
    threshold: f64,
    t_grid: &[f64],
    start: &Option<String>,
    m: &RunManifest,
) -> Result<(String, i32)> {
    let mut out = format!("# manifest {}\n", serde_json::to_string(m).map_err(|e| Error::Io(e.to_string()))?);
    out.push_str("kappa\tlambda\t");
    out.push_str(io::REPORT_HEADER);
    out.push('\n');
    if kappas.is_empty() || lambdas.is_empty() {
        return Ok((out, EXIT_OK));
    }
    let flags = cv.flags();
    let row = |out: &mut String, k: &str, l: &str, r: &BoundReport| {
        out.push_str(&io::report_row(&format!("{k}\t{l}\t"), r));
        out.push('\n');
    };
    for (name, ok) in [
        ("irreducible_R", flags.r),
        ("irreducible_S", flags.s),
        ("irreducible_R_minus_S", flags.r_minus_s),
        ("irreducible_S_minus_R", flags.s_minus_r),
    ] {
        row(&mut out, "-", "-", &flag_row(name, ok));
    }
    if !flags.all() {
        return Ok((out, EXIT_OK));
    }
    let a = CoverAnalysis::new(c, cv)?;
    let x0 = resolve_start(c, cv, start)?;
    let mut law = vec![0.0; c.n()];
    law[x0] = 1.0;
    let mut violated = false;
    for &k in kappas {
        for &l in lambdas {
            let (ks, ls) = (io::fmt_f64(k), io::fmt_f64(l));
            let w = WindowAnalysis::new(&a, k, l)?;
            let (diag, reports) = bounds::full_report(&w, threshold, t_grid, &law)?;
            for (key, value) in &diag.ratios {
                let r = BoundReport::new(format!("hypothesis:{key}"), *value, None, Some(threshold), true);
                row(&mut out, &ks, &ls, &r);
            }
            for r in &reports {
                violated |= r.violated();
                row(&mut out, &ks, &ls, r);
            }
        }
    }
    Ok((out, if violated { EXIT_VIOLATION } else { EXIT_OK }))
}

/// Parses `args`, runs the command and writes its output; returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    match execute(&cli) {
        Ok((text, code)) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &text),
                None => stdout.write_all(text.as_bytes()),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_USAGE;
            }
            code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}


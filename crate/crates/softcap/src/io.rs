//! Text formats: chain, cover, flow and test-function files, and report TSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::bounds::BoundReport;
use crate::capacity::{Flow, FlowEdge};
use crate::chain::{CoverPair, ReversibleChain, Subset};
use crate::error::{Error, Result};

pub const CHAIN_HEADER: &str = "# chain v1";

/// Shortest round-trip decimal, in exponent form for very small or large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("not a number: {tok:?}") })
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.split_whitespace().collect()))
}

pub fn parse_chain(text: &str) -> Result<ReversibleChain> {
    let first = text.lines().position(|l| !l.trim().is_empty());
    match first {
        Some(i) if text.lines().nth(i).unwrap().trim() == CHAIN_HEADER => {}
        Some(i) => return Err(Error::Parse { line: i + 1, msg: format!("expected header {CHAIN_HEADER:?}") }),
        None => return Err(Error::Parse { line: 1, msg: "empty chain file".into() }),
    }
    let mut ids: Vec<String> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut mu: Vec<Option<f64>> = Vec::new();
    let mut edges = Vec::new();
    for (line, toks) in content_lines(text) {
        match toks.as_slice() {
            ["state", id] | ["state", id, _] => {
                if index.insert(id.to_string(), ids.len()).is_some() {
                    return Err(Error::Parse { line, msg: format!("duplicate state {id}") });
                }
                ids.push(id.to_string());
                mu.push(match toks.get(2) {
                    Some(t) => Some(parse_f64(t, line)?),
                    None => None,
                });
            }
            ["rate", x, y, w] => {
                let lookup = |s: &str| index.get(s).copied().ok_or_else(|| Error::Parse { line, msg: format!("unknown state {s}") });
                edges.push((lookup(x)?, lookup(y)?, parse_f64(w, line)?));
            }
            _ => return Err(Error::Parse { line, msg: format!("unrecognized line: {}", toks.join(" ")) }),
        }
    }
    let measure = if mu.iter().all(|m| m.is_some()) && !mu.is_empty() {
        Some(mu.into_iter().map(|m| m.unwrap()).collect())
    } else if mu.iter().all(|m| m.is_none()) {
        None
    } else {
        return Err(Error::Parse { line: 0, msg: "measure must be given for all states or none".into() });
    };
    ReversibleChain::new(ids, edges, measure)
}

pub fn chain_to_string(chain: &ReversibleChain, with_measure: bool) -> String {
    let mut out = String::from(CHAIN_HEADER);
    out.push('\n');
    for x in 0..chain.n() {
        if with_measure {
            let _ = writeln!(out, "state\t{}\t{}", chain.id(x), fmt_f64(chain.mu()[x]));
        } else {
            let _ = writeln!(out, "state\t{}", chain.id(x));
        }
    }
    for (x, y, w) in chain.edges() {
        let _ = writeln!(out, "rate\t{}\t{}\t{}", chain.id(x), chain.id(y), fmt_f64(w));
    }
    out
}

pub fn load_chain(path: impl AsRef<Path>) -> Result<ReversibleChain> {
    parse_chain(&fs::read_to_string(path)?)
}

pub fn save_chain(chain: &ReversibleChain, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, chain_to_string(chain, true))?)
}

pub fn parse_cover(chain: &ReversibleChain, text: &str) -> Result<CoverPair> {
    let (mut r, mut s) = (Vec::new(), Vec::new());
    for (line, toks) in content_lines(text) {
        let x = match toks.as_slice() {
            [_, id] => chain.index_of(id).map_err(|_| Error::Parse { line, msg: format!("unknown state {id}") })?,
            _ => return Err(Error::Parse { line, msg: format!("expected `R <id>` or `S <id>`, got {}", toks.join(" ")) }),
        };
        match toks[0] {
            "R" => r.push(x),
            "S" => s.push(x),
            other => return Err(Error::Parse { line, msg: format!("unknown set tag {other}") }),
        }
    }
    CoverPair::new(chain, Subset::new(chain.n(), r), Subset::new(chain.n(), s))
}

pub fn cover_to_string(chain: &ReversibleChain, cover: &CoverPair) -> String {
    let mut out = String::new();
    for x in cover.r().iter() {
        let _ = writeln!(out, "R\t{}", chain.id(x));
    }
    for x in cover.s().iter() {
        let _ = writeln!(out, "S\t{}", chain.id(x));
    }
    out
}

pub fn load_cover(chain: &ReversibleChain, path: impl AsRef<Path>) -> Result<CoverPair> {
    parse_cover(chain, &fs::read_to_string(path)?)
}

pub fn save_cover(chain: &ReversibleChain, cover: &CoverPair, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, cover_to_string(chain, cover))?)
}

/// Writes the chain and its cover side by side.
pub fn save_bundle(chain: &ReversibleChain, cover: &CoverPair, chain_path: impl AsRef<Path>, cover_path: impl AsRef<Path>) -> Result<()> {
    save_chain(chain, chain_path)?;
    save_cover(chain, cover, cover_path)
}

/// Lines `flow <x> <y> <v>`, `flow BAR:<r> <r> <v>`, `flow <s> BREVE:<s> <v>`.
pub fn parse_flow(chain: &ReversibleChain, text: &str) -> Result<Flow> {
    let mut flow = Flow::default();
    for (line, toks) in content_lines(text) {
        let ["flow", a, b, v] = toks.as_slice() else {
            return Err(Error::Parse { line, msg: format!("expected `flow <from> <to> <value>`, got {}", toks.join(" ")) });
        };
        let v = parse_f64(v, line)?;
        let state = |s: &str| chain.index_of(s).map_err(|_| Error::Parse { line, msg: format!("unknown state {s}") });
        if let Some(r) = a.strip_prefix("BAR:") {
            if r != *b {
                return Err(Error::Parse { line, msg: format!("BAR:{r} must feed {r}") });
            }
            flow.add_bar(state(r)?, v);
        } else if let Some(s) = b.strip_prefix("BREVE:") {
            if s != *a {
                return Err(Error::Parse { line, msg: format!("BREVE:{s} must be fed by {s}") });
            }
            flow.add_breve(state(s)?, v);
        } else {
            flow.add(state(a)?, state(b)?, v);
        }
    }
    Ok(flow)
}

pub fn flow_to_string(chain: &ReversibleChain, flow: &Flow) -> String {
    let mut out = String::new();
    for (k, v) in &flow.edges {
        let v = fmt_f64(*v);
        let _ = match *k {
            FlowEdge::Internal(x, y) => writeln!(out, "flow\t{}\t{}\t{v}", chain.id(x), chain.id(y)),
            FlowEdge::Bar(r) => writeln!(out, "flow\tBAR:{0}\t{0}\t{v}", chain.id(r)),
            FlowEdge::Breve(s) => writeln!(out, "flow\t{0}\tBREVE:{0}\t{v}", chain.id(s)),
        };
    }
    out
}

pub fn load_flow(chain: &ReversibleChain, path: impl AsRef<Path>) -> Result<Flow> {
    parse_flow(chain, &fs::read_to_string(path)?)
}

/// Lines `testfn <state> <value>`; unlisted states get 0.
pub fn parse_testfn(chain: &ReversibleChain, text: &str) -> Result<Vec<f64>> {
    let mut f = vec![0.0; chain.n()];
    for (line, toks) in content_lines(text) {
        let ["testfn", x, v] = toks.as_slice() else {
            return Err(Error::Parse { line, msg: format!("expected `testfn <state> <value>`, got {}", toks.join(" ")) });
        };
        let x = chain.index_of(x).map_err(|_| Error::Parse { line, msg: format!("unknown state {x}") })?;
        f[x] = parse_f64(v, line)?;
    }
    Ok(f)
}

pub fn load_testfn(chain: &ReversibleChain, path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_testfn(chain, &fs::read_to_string(path)?)
}

pub const REPORT_HEADER: &str = "name\texact\tlower\tupper\tapplicable\tsatisfied\tdiagnostics";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), fmt_f64)
}

/// One row per report; diagnostics as `key=value` pairs separated by `;`.
pub fn report_row(prefix: &str, r: &BoundReport) -> String {
    let diag: Vec<String> = r.diagnostics.iter().map(|(k, v)| format!("{k}={}", fmt_f64(*v))).collect();
    format!(
        "{prefix}{}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.name,
        fmt_f64(r.exact),
        opt(r.lower),
        opt(r.upper),
        r.applicable,
        r.satisfied,
        if diag.is_empty() { "-".to_string() } else { diag.join(";") }
    )
}

//! Plain-text embedding and posterior snapshot files. Floats are written
//! with 17 significant digits so every value reads back bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use conts_core::linalg::SquareMatrix;
use conts_core::{EmbeddingStore, PosteriorState, UserId};

use crate::error::{read_to_string, write_string, Error, Result};

fn push_vec(out: &mut String, v: &[f64]) {
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.16e}");
    }
}

fn parse_vec(path: &Path, line: usize, field: &str, d: usize) -> Result<Vec<f64>> {
    let v = field
        .split_ascii_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::parse(path, line, format!("bad number: {e}")))?;
    if v.len() != d {
        return Err(Error::parse(path, line, format!("expected {d} values, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::parse(path, line, "non-finite value"));
    }
    Ok(v)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn embeddings_to_string(store: &EmbeddingStore) -> String {
    let mut out = format!("d={}\n", store.dim());
    let mut row = |kind: &str, id: String, v: &[f64]| {
        out.push_str(kind);
        out.push('\t');
        out.push_str(&id);
        out.push('\t');
        push_vec(&mut out, v);
        out.push('\n');
    };
    for (u, v) in store.users() {
        row("user", u.0.to_string(), v);
    }
    for (i, v) in store.items().iter().enumerate() {
        row("item", i.to_string(), v);
    }
    for (i, v) in store.attributes().iter().enumerate() {
        row("attr", i.to_string(), v);
    }
    row("u_init", "-".into(), store.u_init());
    out
}

pub fn write_embeddings(store: &EmbeddingStore, path: &Path) -> Result<()> {
    write_string(path, &embeddings_to_string(store))
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingStore> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, head) = lines.next().ok_or_else(|| Error::format(path, "empty file"))?;
    let d: usize = head
        .strip_prefix("d=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "expected d=<int>"))?;

    let mut users = BTreeMap::new();
    let mut items = Vec::new();
    let mut attrs = Vec::new();
    let mut u_init = None;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if u_init.is_some() {
            return Err(Error::parse(path, n, "rows after u_init"));
        }
        let f: Vec<&str> = line.splitn(3, '\t').collect();
        if f.len() != 3 {
            return Err(Error::parse(path, n, "expected kind<TAB>id<TAB>values"));
        }
        let v = parse_vec(path, n, f[2], d)?;
        if f[0] == "u_init" {
            u_init = Some(v);
            continue;
        }
        let id: u32 = f[1]
            .parse()
            .map_err(|_| Error::parse(path, n, format!("bad id {:?}", f[1])))?;
        match f[0] {
            "user" => {
                if users.insert(UserId(id), v).is_some() {
                    return Err(Error::parse(path, n, format!("user {id} listed twice")));
                }
            }
            "item" | "attr" => {
                let list = if f[0] == "item" { &mut items } else { &mut attrs };
                if id as usize != list.len() {
                    return Err(Error::parse(
                        path,
                        n,
                        format!("{} ids must run 0, 1, ... in order", f[0]),
                    ));
                }
                list.push(v);
            }
            k => return Err(Error::parse(path, n, format!("unknown row kind {k:?}"))),
        }
    }
    let u_init = u_init.ok_or_else(|| Error::format(path, "missing u_init row"))?;
    let store = EmbeddingStore::new(d, users, items, attrs)?;
    // the stored mean is informational; a large mismatch means a damaged file
    if u_init.iter().zip(store.u_init()).any(|(a, b)| !close(*a, *b, 1e-9)) {
        return Err(Error::format(path, "u_init is not the mean of the user rows"));
    }
    Ok(store)
}

/// `d`, then row-major `B`, `f` and `mu`, one array per line.
pub fn posterior_to_string(state: &PosteriorState) -> String {
    let mut out = format!("{}\n", state.b().dim());
    for v in [state.b().as_slice(), state.f(), state.mu()] {
        push_vec(&mut out, v);
        out.push('\n');
    }
    out
}

pub fn write_posterior(state: &PosteriorState, path: &Path) -> Result<()> {
    write_string(path, &posterior_to_string(state))
}

/// The file carries no sampling scale, so `l` is supplied by the caller.
/// `mu` is recomputed from `B` and `f` and checked against the stored copy.
pub fn read_posterior(path: &Path, l: f64) -> Result<PosteriorState> {
    let text = read_to_string(path)?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != 4 {
        return Err(Error::format(path, format!("expected 4 lines, got {}", lines.len())));
    }
    let d: usize = lines[0]
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, 1, "expected the dimension"))?;
    let b = parse_vec(path, 2, lines[1], d * d)?;
    let f = parse_vec(path, 3, lines[2], d)?;
    let mu = parse_vec(path, 4, lines[3], d)?;
    let state = PosteriorState::from_parts(SquareMatrix::from_row_major(d, b)?, f, l)?;
    if mu.iter().zip(state.mu()).any(|(a, b)| !close(*a, *b, 1e-8)) {
        return Err(Error::format(path, "mu does not solve B mu = f"));
    }
    Ok(state)
}

//! `sessions.jsonl` and `summary.csv`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use conts_core::{compute_metrics, ItemId, MetricsReport, SessionResult, UserId};
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};
use crate::stats::{paired_test, PairedTest};

/// One line of `sessions.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub user: u32,
    pub target: u32,
    pub success: bool,
    pub turn: usize,
    pub policy: String,
    pub seed: u64,
}

impl SessionRecord {
    pub fn new(r: &SessionResult, policy: &str, seed: u64) -> Self {
        Self {
            user: r.user.0,
            target: r.target.0,
            success: r.success,
            turn: r.end_turn,
            policy: policy.to_string(),
            seed,
        }
    }

    pub fn result(&self) -> SessionResult {
        SessionResult {
            user: UserId(self.user),
            target: ItemId(self.target),
            success: self.success,
            end_turn: self.turn,
        }
    }
}

pub fn sessions_to_jsonl(records: &[SessionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("plain struct serialises"));
        out.push('\n');
    }
    out
}

pub fn read_sessions(path: &Path) -> Result<Vec<SessionRecord>> {
    read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}

/// Header `policy,seed,n,AT,SR@1,...,SR@T`; every report must share `T`.
pub fn summary_csv(reports: &[MetricsReport]) -> Result<String> {
    let t = reports.first().map_or(0, MetricsReport::max_turns);
    if reports.iter().any(|r| r.max_turns() != t) {
        return Err(Error::Data("reports disagree on the number of turns".into()));
    }
    let mut out = String::from("policy,seed,n,AT");
    for i in 1..=t {
        let _ = write!(out, ",SR@{i}");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{},{},{},{}", r.policy, r.seed, r.n_sessions, r.at);
        for s in &r.sr_at {
            let _ = write!(out, ",{s}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Metrics per `(policy, seed)` group, in order of first appearance.
pub fn recompute(records: &[SessionRecord], max_turns: usize) -> Result<Vec<MetricsReport>> {
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut groups: HashMap<(String, u64), Vec<SessionResult>> = HashMap::new();
    for r in records {
        let key = (r.policy.clone(), r.seed);
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.result());
    }
    order
        .into_iter()
        .map(|key| {
            let results = &groups[&key];
            Ok(compute_metrics(results, max_turns, &key.0, key.1)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    pub policy_a: String,
    pub policy_b: String,
    pub n: usize,
    /// Mean of `turn_a - turn_b`.
    pub mean_diff_at: f64,
    pub t: f64,
    pub p_value: f64,
}

/// Per-session values keyed by `(user, target, occurrence)`, where the
/// occurrence counts repeats of the same pair in log order.
fn keyed(records: &[&SessionRecord], value: impl Fn(&SessionRecord) -> f64) -> BTreeMap<(u32, u32, usize), f64> {
    let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
    let mut out = BTreeMap::new();
    for r in records {
        let occ = seen.entry((r.user, r.target)).or_insert(0);
        out.insert((r.user, r.target, *occ), value(r));
        *occ += 1;
    }
    out
}

fn single_policy<'a>(records: &'a [SessionRecord], want: Option<&str>, which: &str) -> Result<(String, Vec<&'a SessionRecord>)> {
    let name = match want {
        Some(p) => p.to_string(),
        None => {
            let first = records
                .first()
                .ok_or_else(|| Error::Data(format!("log {which} is empty")))?;
            if records.iter().any(|r| r.policy != first.policy) {
                return Err(Error::Data(format!("log {which} holds several policies; pick one")));
            }
            first.policy.clone()
        }
    };
    let picked: Vec<&SessionRecord> = records.iter().filter(|r| r.policy == name).collect();
    if picked.is_empty() {
        return Err(Error::Data(format!("log {which} has no sessions for {name}")));
    }
    Ok((name, picked))
}

/// Which per-session quantity to pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairedMetric {
    Turn,
    Success,
}

/// Paired test between two logs. Sessions must match one to one.
pub fn compare_logs(
    a: &[SessionRecord],
    b: &[SessionRecord],
    policy_a: Option<&str>,
    policy_b: Option<&str>,
    metric: PairedMetric,
) -> Result<ComparisonResult> {
    let (name_a, ra) = single_policy(a, policy_a, "a")?;
    let (name_b, rb) = single_policy(b, policy_b, "b")?;
    let value = |r: &SessionRecord| match metric {
        PairedMetric::Turn => r.turn as f64,
        PairedMetric::Success => f64::from(u8::from(r.success)),
    };
    let ka = keyed(&ra, value);
    let kb = keyed(&rb, value);
    if ka.len() != kb.len() || ka.keys().zip(kb.keys()).any(|(x, y)| x != y) {
        return Err(Error::Data("the two logs do not cover the same sessions".into()));
    }
    let xs: Vec<f64> = ka.values().copied().collect();
    let ys: Vec<f64> = kb.values().copied().collect();
    let PairedTest { n, mean_diff, t, p_value } = paired_test(&xs, &ys)?;
    Ok(ComparisonResult { policy_a: name_a, policy_b: name_b, n, mean_diff_at: mean_diff, t, p_value })
}

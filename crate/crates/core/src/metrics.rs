use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::simulator::SessionResult;

/// Success rate by turn and average turns over a set of sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// `sr_at[t - 1]` is SR@t for `t = 1..=T`.
    pub sr_at: Vec<f64>,
    pub at: f64,
    pub n_sessions: usize,
    pub policy: String,
    pub seed: u64,
}

impl MetricsReport {
    pub fn max_turns(&self) -> usize {
        self.sr_at.len()
    }

    /// SR@t, 1-based.
    pub fn sr(&self, t: usize) -> f64 {
        self.sr_at[t - 1]
    }
}

/// SR@t is the fraction of sessions that succeeded by turn `t`; AT averages
/// the end turn with failures counted as `T`.
pub fn compute_metrics(
    results: &[SessionResult],
    max_turns: usize,
    policy: &str,
    seed: u64,
) -> Result<MetricsReport> {
    if results.is_empty() {
        return Err(Error::Metrics("no sessions to summarise".into()));
    }
    if max_turns == 0 {
        return Err(Error::Metrics("max turns must be at least 1".into()));
    }
    let mut successes_at = alloc::vec![0usize; max_turns + 1];
    let mut turn_sum = 0usize;
    for r in results {
        if r.success && r.end_turn <= max_turns {
            successes_at[r.end_turn.max(1)] += 1;
            turn_sum += r.end_turn;
        } else {
            turn_sum += max_turns;
        }
    }
    let n = results.len() as f64;
    let mut cumulative = 0usize;
    let sr_at = (1..=max_turns)
        .map(|t| {
            cumulative += successes_at[t];
            cumulative as f64 / n
        })
        .collect();
    Ok(MetricsReport {
        sr_at,
        at: turn_sum as f64 / n,
        n_sessions: results.len(),
        policy: String::from(policy),
        seed,
    })
}

//! Action selection and feedback handling for every policy behind one
//! interface: ConTS and its ablations, Abs-Greedy, Seamless-UCB and ConUCB.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::bandit::{ArmKind, ArmSpace, PosteriorState};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::model::{AttrId, Catalog, ItemId, ParentId, QuestionMode, QuestionSetting, RewardTable};
use crate::simulator::{Feedback, SessionState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyKind {
    ConTS,
    /// Zero prior mean instead of the existing-user average.
    ConTSNoInit,
    /// Drops the accepted-attribute term from reward estimation.
    ConTSNoPu,
    /// Scores with the posterior mean and keeps `B = I`.
    ConTSNoExp,
    AbsGreedy,
    SeamlessUcb,
    ConUcb,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        Self::ConTS,
        Self::ConTSNoInit,
        Self::ConTSNoPu,
        Self::ConTSNoExp,
        Self::AbsGreedy,
        Self::SeamlessUcb,
        Self::ConUcb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ConTS => "ConTS",
            Self::ConTSNoInit => "ConTS-u_init",
            Self::ConTSNoPu => "ConTS-P_u",
            Self::ConTSNoExp => "ConTS-exp",
            Self::AbsGreedy => "AbsGreedy",
            Self::SeamlessUcb => "SeamlessUCB",
            Self::ConUcb => "ConUCB",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }

    fn is_thompson(self) -> bool {
        matches!(
            self,
            Self::ConTS | Self::ConTSNoInit | Self::ConTSNoPu | Self::ConTSNoExp
        )
    }

    /// Whether accepted attributes enter scoring and reward de-biasing.
    fn uses_accepted_attrs(self) -> bool {
        matches!(
            self,
            Self::ConTS | Self::ConTSNoInit | Self::ConTSNoExp | Self::SeamlessUcb
        )
    }
}

/// ConUCB ask schedules `b(t)`; the policy asks at turn `t` iff
/// `⌊b(t)⌋ > ⌊b(t−1)⌋`, with `b(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BtSchedule {
    /// `5 ⌊log t⌋`
    Floor5Log,
    /// `5 log t`
    FiveLog,
    /// `10 log t`
    TenLog,
    /// `15 log t`
    FifteenLog,
}

impl BtSchedule {
    pub const ALL: [BtSchedule; 4] = [Self::Floor5Log, Self::FiveLog, Self::TenLog, Self::FifteenLog];

    pub fn name(self) -> &'static str {
        match self {
            Self::Floor5Log => "floor_5_log",
            Self::FiveLog => "5_log",
            Self::TenLog => "10_log",
            Self::FifteenLog => "15_log",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == s)
    }

    /// `b(t)` with logarithms in `base`; `b(0) = 0`.
    pub fn value(self, t: usize, base: f64) -> f64 {
        if t == 0 {
            return 0.0;
        }
        let log = libm::log(t as f64) / libm::log(base);
        match self {
            Self::Floor5Log => 5.0 * libm::floor(log),
            Self::FiveLog => 5.0 * log,
            Self::TenLog => 10.0 * log,
            Self::FifteenLog => 15.0 * log,
        }
    }

    pub fn asks_at(self, t: usize, base: f64) -> bool {
        t >= 1 && libm::floor(self.value(t, base)) > libm::floor(self.value(t - 1, base))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttrChooser {
    /// Largest confidence width `√(xᵀA⁻¹x)`.
    MaximalConfidence,
    /// Largest `u·x + Σ x·p`.
    ModifiedFm,
}

impl AttrChooser {
    pub fn name(self) -> &'static str {
        match self {
            Self::MaximalConfidence => "MaximalConfidence",
            Self::ModifiedFm => "ModifiedFM",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::MaximalConfidence, Self::ModifiedFm]
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Confidence multiplier for the UCB policies.
    pub alpha: f64,
    pub bt_schedule: BtSchedule,
    pub log_base: f64,
    pub attr_chooser: AttrChooser,
    /// Keep `B` fixed and update only `f` (always on for `ConTSNoExp`).
    pub freeze_b: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self::new(PolicyKind::ConTS)
    }
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            alpha: 1.0,
            bt_schedule: BtSchedule::TenLog,
            log_base: core::f64::consts::E,
            attr_chooser: AttrChooser::MaximalConfidence,
            freeze_b: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.log_base > 1.0 && self.log_base.is_finite()) {
            return Err(Error::Config(format!(
                "log_base must be > 1, got {}",
                self.log_base
            )));
        }
        Ok(())
    }

    fn frozen(&self) -> bool {
        self.freeze_b || self.kind == PolicyKind::ConTSNoExp
    }
}

/// A user's bandit state, carried across that user's sessions. The UCB
/// policies reuse the same `(A, b, u)` layout as the posterior `(B, f, mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    pub posterior: PosteriorState,
    pub u_init: Vec<f64>,
}

impl PolicyState {
    pub fn new(policy: &PolicyConfig, u_init: &[f64], l: f64) -> Result<Self> {
        let u_init = if policy.kind == PolicyKind::ConTSNoInit {
            vec![0.0; u_init.len()]
        } else {
            u_init.to_vec()
        };
        Ok(Self {
            posterior: PosteriorState::new(&u_init, l)?,
            u_init,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// Attributes ordered by descending score.
    AskAttributes(Vec<AttrId>),
    AskParent(ParentId),
    /// Items ordered by descending score, ties by id.
    Recommend(Vec<ItemId>),
}

impl Action {
    pub fn is_ask(&self) -> bool {
        !matches!(self, Self::Recommend(_))
    }
}

/// One posterior update applied while observing feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedUpdate {
    pub kind: ArmKind,
    pub id: u32,
    pub raw_reward: f64,
    pub debiased_reward: f64,
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    kind: ArmKind,
    id: u32,
    score: f64,
}

fn rank(a: &Scored, b: &Scored) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.kind.cmp(&b.kind))
        .then(a.id.cmp(&b.id))
}

fn attribute_kind(setting: &QuestionSetting) -> ArmKind {
    match setting.mode {
        QuestionMode::Enumerated => ArmKind::ParentAttribute,
        _ => ArmKind::Attribute,
    }
}

fn score_attrs(
    session: &SessionState,
    setting: &QuestionSetting,
    arms: &ArmSpace<'_>,
    mut f: impl FnMut(&[f64]) -> f64,
) -> Result<Vec<Scored>> {
    let kind = attribute_kind(setting);
    session
        .attr_pool
        .iter()
        .map(|&id| {
            let arm = arms.arm(kind, id)?;
            Ok(Scored {
                kind,
                id,
                score: f(arm.x),
            })
        })
        .collect()
}

fn score_items(
    session: &SessionState,
    arms: &ArmSpace<'_>,
    mut f: impl FnMut(&[f64]) -> f64,
) -> Result<Vec<Scored>> {
    session
        .item_pool
        .iter()
        .map(|&v| {
            Ok(Scored {
                kind: ArmKind::Item,
                id: v.0,
                score: f(arms.item(v)?.x),
            })
        })
        .collect()
}

fn recommend(mut items: Vec<Scored>, k: usize) -> Result<Action> {
    if items.is_empty() {
        return Err(Error::PoolExhausted);
    }
    items.sort_by(rank);
    items.truncate(k);
    Ok(Action::Recommend(items.into_iter().map(|s| ItemId(s.id)).collect()))
}

fn ask(mut attrs: Vec<Scored>, setting: &QuestionSetting) -> Action {
    attrs.sort_by(rank);
    match setting.mode {
        QuestionMode::Enumerated => Action::AskParent(ParentId(attrs[0].id)),
        QuestionMode::Binary => Action::AskAttributes(vec![AttrId(attrs[0].id)]),
        QuestionMode::MultiAttribute => {
            attrs.truncate(setting.attributes_per_ask);
            Action::AskAttributes(attrs.into_iter().map(|s| AttrId(s.id)).collect())
        }
    }
}

/// Picks the next action for the current turn of `session`.
pub fn select_action<R: Rng + ?Sized>(
    policy: &PolicyConfig,
    pstate: &PolicyState,
    session: &SessionState,
    arms: &ArmSpace<'_>,
    setting: &QuestionSetting,
    k: usize,
    rng: &mut R,
) -> Result<Action> {
    if session.item_pool.is_empty() && session.attr_pool.is_empty() {
        return Err(Error::PoolExhausted);
    }
    let post = &pstate.posterior;
    let pref = if policy.kind.uses_accepted_attrs() {
        arms.preference_sum(&session.accepted_attrs)?
    } else {
        vec![0.0; arms.dim()]
    };

    match policy.kind {
        kind if kind.is_thompson() || kind == PolicyKind::SeamlessUcb => {
            let mut w = match kind {
                PolicyKind::ConTSNoExp | PolicyKind::SeamlessUcb => post.mu().to_vec(),
                _ => post.sample(rng),
            };
            axpy(1.0, &pref, &mut w);
            let alpha = if kind == PolicyKind::SeamlessUcb {
                policy.alpha
            } else {
                0.0
            };
            let chol = post.cholesky();
            let mut score = |x: &[f64]| {
                let s = dot(&w, x);
                if alpha > 0.0 {
                    s + alpha * libm::sqrt(chol.inv_quad_form(x))
                } else {
                    s
                }
            };
            let attrs = score_attrs(session, setting, arms, &mut score)?;
            let items = score_items(session, arms, &mut score)?;
            let best_attr = attrs.iter().min_by(|a, b| rank(a, b));
            let best_item = items.iter().min_by(|a, b| rank(a, b));
            let asks = match (best_attr, best_item) {
                (Some(a), Some(i)) => rank(a, i) == Ordering::Less,
                (Some(_), None) => true,
                _ => false,
            };
            if asks {
                Ok(ask(attrs, setting))
            } else {
                recommend(items, k)
            }
        }
        PolicyKind::AbsGreedy => {
            let mu = post.mu();
            let items = score_items(session, arms, |x| dot(mu, x))?;
            recommend(items, k)
        }
        PolicyKind::ConUcb => {
            let mu = post.mu();
            let chol = post.cholesky();
            let wants_ask = policy.bt_schedule.asks_at(session.turn, policy.log_base);
            if wants_ask && !session.attr_pool.is_empty() {
                let attrs = match policy.attr_chooser {
                    AttrChooser::MaximalConfidence => {
                        score_attrs(session, setting, arms, |x| libm::sqrt(chol.inv_quad_form(x)))?
                    }
                    AttrChooser::ModifiedFm => {
                        let mut w = mu.to_vec();
                        axpy(1.0, &arms.preference_sum(&session.accepted_attrs)?, &mut w);
                        score_attrs(session, setting, arms, |x| dot(&w, x))?
                    }
                };
                return Ok(ask(attrs, setting));
            }
            let alpha = policy.alpha;
            let items = score_items(session, arms, |x| {
                dot(mu, x) + alpha * libm::sqrt(chol.inv_quad_form(x))
            })?;
            recommend(items, k)
        }
        _ => unreachable!("all policy kinds handled"),
    }
}

/// Raw reward per played arm, in arm-id order within each kind.
fn played_arms(
    action: &Action,
    feedback: &Feedback,
    catalog: &Catalog,
    rewards: &RewardTable,
) -> Result<(Vec<(ArmKind, u32, f64)>, Vec<AttrId>)> {
    let mut played = Vec::new();
    let mut newly_accepted = Vec::new();
    match (action, feedback) {
        (Action::AskAttributes(asked), Feedback::Attributes { accepted, rejected }) => {
            let asked_set: BTreeSet<AttrId> = asked.iter().copied().collect();
            let acc: BTreeSet<AttrId> = accepted.iter().copied().collect();
            let rej: BTreeSet<AttrId> = rejected.iter().copied().collect();
            if !acc.is_disjoint(&rej) || acc.union(&rej).copied().collect::<BTreeSet<_>>() != asked_set {
                return Err(Error::FeedbackMismatch);
            }
            for a in &asked_set {
                let r = if acc.contains(a) {
                    newly_accepted.push(*a);
                    rewards.suc_ask
                } else {
                    rewards.fail_ask
                };
                played.push((ArmKind::Attribute, a.0, r));
            }
        }
        (Action::AskParent(p), Feedback::Parent { parent, accepted_children }) => {
            if p != parent {
                return Err(Error::FeedbackMismatch);
            }
            let taxonomy = catalog.taxonomy().ok_or(Error::FeedbackMismatch)?;
            let kids = taxonomy.children(*p);
            if accepted_children.iter().any(|c| !kids.contains(c)) {
                return Err(Error::FeedbackMismatch);
            }
            for c in kids {
                let r = if accepted_children.contains(c) {
                    newly_accepted.push(*c);
                    rewards.suc_ask
                } else {
                    rewards.fail_ask
                };
                played.push((ArmKind::Attribute, c.0, r));
            }
        }
        (Action::Recommend(list), Feedback::RecAccepted(item)) => {
            if !list.contains(item) {
                return Err(Error::FeedbackMismatch);
            }
        }
        (Action::Recommend(list), Feedback::RecRejected(items)) => {
            let a: BTreeSet<ItemId> = list.iter().copied().collect();
            let b: BTreeSet<ItemId> = items.iter().copied().collect();
            if a != b {
                return Err(Error::FeedbackMismatch);
            }
            played.extend(a.into_iter().map(|v| (ArmKind::Item, v.0, rewards.fail_rec)));
        }
        _ => return Err(Error::FeedbackMismatch),
    }
    Ok((played, newly_accepted))
}

/// Updates the bandit state from the user's answer to `action`. The
/// accepted-attribute bias includes attributes accepted in this very turn.
/// A successful recommendation ends the session and triggers no update.
#[allow(clippy::too_many_arguments)]
pub fn observe_feedback(
    policy: &PolicyConfig,
    pstate: &mut PolicyState,
    session: &SessionState,
    action: &Action,
    feedback: &Feedback,
    arms: &ArmSpace<'_>,
    catalog: &Catalog,
    rewards: &RewardTable,
) -> Result<Vec<AppliedUpdate>> {
    let (played, newly_accepted) = played_arms(action, feedback, catalog, rewards)?;
    if played.is_empty() {
        return Ok(Vec::new());
    }
    let mut bias = pstate.u_init.clone();
    if policy.kind.uses_accepted_attrs() {
        let mut accepted = session.accepted_attrs.clone();
        accepted.extend(newly_accepted.iter().filter(|a| !session.accepted_attrs.contains(a)));
        axpy(1.0, &arms.preference_sum(&accepted)?, &mut bias);
    }
    let frozen = policy.frozen();
    let mut applied = Vec::with_capacity(played.len());
    for (kind, id, raw) in played {
        let x = arms.arm(kind, id)?.x;
        let r_prime = raw - dot(x, &bias);
        if frozen {
            pstate.posterior.update_mean_only(x, r_prime)?;
        } else {
            pstate.posterior.update(x, r_prime)?;
        }
        applied.push(AppliedUpdate {
            kind,
            id,
            raw_reward: raw,
            debiased_reward: r_prime,
        });
    }
    Ok(applied)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(PolicyKind::parse(k.name()), Some(k));
        }
        for b in BtSchedule::ALL {
            assert_eq!(BtSchedule::parse(b.name()), Some(b));
        }
        assert_eq!(AttrChooser::parse("modifiedfm"), Some(AttrChooser::ModifiedFm));
    }

    #[test]
    fn schedule_first_turn_never_asks() {
        for b in BtSchedule::ALL {
            assert!(!b.asks_at(1, core::f64::consts::E));
        }
    }

    #[test]
    fn validate_rejects_negative_alpha() {
        let mut p = PolicyConfig::new(PolicyKind::SeamlessUcb);
        p.alpha = -1.0;
        assert!(p.validate().is_err());
        p.alpha = 0.5;
        p.log_base = 1.0;
        assert!(p.validate().is_err());
    }
}

//! Multi-round conversational environment: simulated user answers,
//! candidate-pool maintenance and the per-session / per-user loops.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::bandit::ArmSpace;
use crate::error::{Error, Result};
use crate::model::{
    AttrId, Catalog, ItemId, ItemRecord, ParentId, QuestionMode, QuestionSetting, RewardTable,
    Taxonomy, UserId,
};
use crate::policy::{observe_feedback, select_action, Action, PolicyConfig, PolicyState};
use crate::rng::session_rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feedback {
    /// Verdicts on asked attributes (binary and multi-attribute questions).
    Attributes {
        accepted: Vec<AttrId>,
        rejected: Vec<AttrId>,
    },
    /// Answer to an enumerated question: the children the user picked. An
    /// empty list rejects the parent.
    Parent {
        parent: ParentId,
        accepted_children: Vec<AttrId>,
    },
    RecAccepted(ItemId),
    RecRejected(Vec<ItemId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TranscriptEntry {
    Turn {
        turn: usize,
        action: Action,
        feedback: Feedback,
    },
    /// Both candidate pools were empty at this turn.
    PoolsExhausted { turn: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    /// Current turn, starting at 1.
    pub turn: usize,
    pub item_pool: BTreeSet<ItemId>,
    /// Askable attribute ids; parent ids in enumerated mode.
    pub attr_pool: BTreeSet<u32>,
    pub accepted_attrs: Vec<AttrId>,
    pub rejected_attrs: BTreeSet<AttrId>,
    pub transcript: Vec<TranscriptEntry>,
}

impl SessionState {
    pub fn new(catalog: &Catalog, setting: &QuestionSetting) -> Self {
        let attr_pool = match (setting.mode, catalog.taxonomy()) {
            (QuestionMode::Enumerated, Some(t)) => t.parents().map(|p| p.0).collect(),
            (QuestionMode::Enumerated, None) => BTreeSet::new(),
            _ => (0..catalog.n_attributes() as u32).collect(),
        };
        Self {
            turn: 1,
            item_pool: (0..catalog.n_items()).map(ItemId::from).collect(),
            attr_pool,
            accepted_attrs: Vec::new(),
            rejected_attrs: BTreeSet::new(),
            transcript: Vec::new(),
        }
    }
}

/// The simulated user likes exactly the target item and its attributes.
pub fn simulate_feedback(
    action: &Action,
    target: &ItemRecord,
    taxonomy: Option<&Taxonomy>,
) -> Result<Feedback> {
    Ok(match action {
        Action::AskAttributes(asked) => {
            let (accepted, rejected) = asked.iter().partition(|a| target.has(**a));
            Feedback::Attributes { accepted, rejected }
        }
        Action::AskParent(p) => {
            let t = taxonomy.ok_or_else(|| {
                Error::Config("enumerated question without a taxonomy".into())
            })?;
            Feedback::Parent {
                parent: *p,
                accepted_children: t
                    .children(*p)
                    .iter()
                    .filter(|c| target.has(**c))
                    .copied()
                    .collect(),
            }
        }
        Action::Recommend(list) => {
            if list.contains(&target.item_id) {
                Feedback::RecAccepted(target.item_id)
            } else {
                Feedback::RecRejected(list.clone())
            }
        }
    })
}

/// Applies the user's answer to the candidate pools and advances the turn.
pub fn apply_feedback(session: &mut SessionState, feedback: &Feedback, catalog: &Catalog) {
    let mut newly = Vec::new();
    match feedback {
        Feedback::Attributes { accepted, rejected } => {
            for a in rejected {
                session.attr_pool.remove(&a.0);
                session.rejected_attrs.insert(*a);
            }
            for a in accepted {
                session.attr_pool.remove(&a.0);
                newly.push(*a);
            }
        }
        Feedback::Parent {
            parent,
            accepted_children,
        } => {
            session.attr_pool.remove(&parent.0);
            if let Some(t) = catalog.taxonomy() {
                for c in t.children(*parent) {
                    if !accepted_children.contains(c) {
                        session.rejected_attrs.insert(*c);
                    }
                }
            }
            newly.extend(accepted_children.iter().copied());
        }
        Feedback::RecRejected(items) => {
            for v in items {
                session.item_pool.remove(v);
            }
        }
        Feedback::RecAccepted(_) => {}
    }
    newly.retain(|a| !session.accepted_attrs.contains(a));
    if !newly.is_empty() {
        session.item_pool.retain(|v| {
            catalog
                .item(*v)
                .map(|item| newly.iter().all(|a| item.has(*a)))
                .unwrap_or(false)
        });
        session.accepted_attrs.extend(newly);
    }
    session.turn += 1;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionResult {
    pub user: UserId,
    pub target: ItemId,
    pub success: bool,
    /// Turn of the accepted recommendation, or `T` on failure.
    pub end_turn: usize,
}

/// Read-only inputs shared by every session of a run.
#[derive(Debug, Clone, Copy)]
pub struct SimEnv<'a> {
    pub catalog: &'a Catalog,
    pub arms: &'a ArmSpace<'a>,
    pub setting: QuestionSetting,
    pub rewards: RewardTable,
    pub max_turns: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOutcome {
    pub result: SessionResult,
    pub transcript: Vec<TranscriptEntry>,
}

/// Runs one conversation. `observer` sees the session state at the start of
/// every turn and once more after the last answer has been applied.
#[allow(clippy::too_many_arguments)]
pub fn run_session_observed<R: rand::Rng + ?Sized>(
    env: &SimEnv<'_>,
    policy: &PolicyConfig,
    pstate: &mut PolicyState,
    user: UserId,
    target: ItemId,
    rng: &mut R,
    observer: &mut dyn FnMut(&SessionState),
) -> Result<SessionOutcome> {
    let record = env.catalog.item(target)?;
    let mut session = SessionState::new(env.catalog, &env.setting);
    let mut success = false;
    let mut end_turn = env.max_turns;
    while session.turn <= env.max_turns {
        observer(&session);
        let turn = session.turn;
        let action = match select_action(
            policy,
            pstate,
            &session,
            env.arms,
            &env.setting,
            env.k,
            rng,
        ) {
            Ok(a) => a,
            Err(Error::PoolExhausted) => {
                session.transcript.push(TranscriptEntry::PoolsExhausted { turn });
                break;
            }
            Err(e) => return Err(e),
        };
        let feedback = simulate_feedback(&action, record, env.catalog.taxonomy())?;
        observe_feedback(
            policy,
            pstate,
            &session,
            &action,
            &feedback,
            env.arms,
            env.catalog,
            &env.rewards,
        )?;
        let accepted = matches!(feedback, Feedback::RecAccepted(_));
        apply_feedback(&mut session, &feedback, env.catalog);
        session.transcript.push(TranscriptEntry::Turn {
            turn,
            action,
            feedback,
        });
        if accepted {
            success = true;
            end_turn = turn;
            break;
        }
    }
    observer(&session);
    Ok(SessionOutcome {
        result: SessionResult {
            user,
            target,
            success,
            end_turn,
        },
        transcript: session.transcript,
    })
}

pub fn run_session<R: rand::Rng + ?Sized>(
    env: &SimEnv<'_>,
    policy: &PolicyConfig,
    pstate: &mut PolicyState,
    user: UserId,
    target: ItemId,
    rng: &mut R,
) -> Result<SessionOutcome> {
    run_session_observed(env, policy, pstate, user, target, rng, &mut |_| {})
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRun {
    pub results: Vec<SessionResult>,
    pub final_state: PolicyState,
    /// Transcript of the last session only.
    pub last_transcript: Vec<TranscriptEntry>,
}

/// One session per target in order; the policy state is created once from
/// `u_init` and persists across the user's sessions. Session `i` draws from
/// `session_rng(seed, user, i)`.
pub fn run_user(
    env: &SimEnv<'_>,
    policy: &PolicyConfig,
    u_init: &[f64],
    l: f64,
    user: UserId,
    targets: &[ItemId],
    seed: u64,
) -> Result<UserRun> {
    let mut state = PolicyState::new(policy, u_init, l)?;
    let mut results = Vec::with_capacity(targets.len());
    let mut last_transcript = Vec::new();
    for (i, target) in targets.iter().enumerate() {
        let mut rng = session_rng(seed, user.0, i);
        let out = run_session(env, policy, &mut state, user, *target, &mut rng)?;
        results.push(out.result);
        last_transcript = out.transcript;
    }
    Ok(UserRun {
        results,
        final_state: state,
        last_transcript,
    })
}

mod common;

use std::collections::BTreeMap;

use conts_core::rng::session_rng;
use conts_core::simulator::{run_session_observed, TranscriptEntry};
use conts_core::{
    apply_feedback, run_session, run_user, simulate_feedback, Action, ArmSpace, AttrId, Catalog,
    EmbeddingStore, Feedback, ItemId, ParentId, PolicyConfig, PolicyKind, PolicyState,
    QuestionSetting, RewardTable, SessionState, SimEnv, UserId,
};

fn env<'a>(catalog: &'a Catalog, arms: &'a ArmSpace<'a>, setting: QuestionSetting, t: usize) -> SimEnv<'a> {
    SimEnv {
        catalog,
        arms,
        setting,
        rewards: RewardTable::default(),
        max_turns: t,
        k: 10,
    }
}

fn catalog() -> Catalog {
    Catalog::new(
        vec![
            vec![AttrId(3), AttrId(7)],
            vec![AttrId(2), AttrId(9)],
            vec![AttrId(1), AttrId(2)],
            vec![AttrId(3)],
        ],
        10,
        Some(vec![vec![AttrId(1), AttrId(2), AttrId(3)], vec![AttrId(7), AttrId(9)]]),
    )
    .unwrap()
}

#[test]
fn feedback_examples() {
    let c = catalog();
    let target = c.item(ItemId(0)).unwrap();
    let fb = simulate_feedback(&Action::AskAttributes(vec![AttrId(3)]), target, None).unwrap();
    assert_eq!(fb, Feedback::Attributes { accepted: vec![AttrId(3)], rejected: vec![] });

    let list: Vec<ItemId> = (10..20).map(ItemId).collect();
    let fb = simulate_feedback(&Action::Recommend(list.clone()), target, None).unwrap();
    assert_eq!(fb, Feedback::RecRejected(list));

    let fb = simulate_feedback(&Action::AskParent(ParentId(0)), c.item(ItemId(1)).unwrap(), c.taxonomy())
        .unwrap();
    assert_eq!(fb, Feedback::Parent { parent: ParentId(0), accepted_children: vec![AttrId(2)] });

    let fb = simulate_feedback(
        &Action::AskAttributes(vec![AttrId(1), AttrId(3), AttrId(7)]),
        target,
        None,
    )
    .unwrap();
    assert_eq!(
        fb,
        Feedback::Attributes { accepted: vec![AttrId(3), AttrId(7)], rejected: vec![AttrId(1)] }
    );
}

#[test]
fn apply_examples() {
    let c = catalog();
    let mut s = SessionState::new(&c, &QuestionSetting::binary());
    apply_feedback(&mut s, &Feedback::Attributes { accepted: vec![AttrId(3)], rejected: vec![] }, &c);
    let pool: Vec<ItemId> = s.item_pool.iter().copied().collect();
    assert_eq!(pool, vec![ItemId(0), ItemId(3)]);
    assert!(!s.attr_pool.contains(&3));
    assert_eq!(s.accepted_attrs, vec![AttrId(3)]);
    assert_eq!(s.turn, 2);

    let params = conts_core::SynthParams::default();
    let ds = conts_core::generate_synthetic(&params, 0).unwrap();
    let mut s = SessionState::new(&ds.catalog, &QuestionSetting::binary());
    let rejected: Vec<ItemId> = (0..10).map(ItemId).collect();
    let before = s.item_pool.len();
    apply_feedback(&mut s, &Feedback::RecRejected(rejected), &ds.catalog);
    assert_eq!(s.item_pool.len(), before - 10);

    let mut s = SessionState::new(&c, &QuestionSetting::enumerated());
    assert_eq!(s.attr_pool.len(), 2);
    apply_feedback(
        &mut s,
        &Feedback::Parent { parent: ParentId(0), accepted_children: vec![AttrId(2)] },
        &c,
    );
    assert!(!s.attr_pool.contains(&0));
    assert_eq!(s.accepted_attrs, vec![AttrId(2)]);
    assert!(s.rejected_attrs.contains(&AttrId(1)) && s.rejected_attrs.contains(&AttrId(3)));
    assert!(s.item_pool.iter().all(|v| c.item(*v).unwrap().has(AttrId(2))));
}

fn check_session(
    env: &SimEnv<'_>,
    policy: &PolicyConfig,
    state: &mut PolicyState,
    user: UserId,
    target: ItemId,
    index: usize,
) -> usize {
    let record = env.catalog.item(target).unwrap().clone();
    let mut prev: Option<(usize, usize)> = None;
    let mut violations = 0;
    let mut observer = |s: &SessionState| {
        let sizes = (s.item_pool.len(), s.attr_pool.len());
        if let Some(p) = prev {
            violations += (sizes.0 > p.0 || sizes.1 > p.1) as usize;
        }
        prev = Some(sizes);
        violations += !s.item_pool.contains(&target) as usize;
        violations += s.accepted_attrs.iter().any(|a| !record.has(*a)) as usize;
        violations += s.accepted_attrs.iter().any(|a| s.rejected_attrs.contains(a)) as usize;
        violations += s
            .item_pool
            .iter()
            .any(|v| s.accepted_attrs.iter().any(|a| !env.catalog.item(*v).unwrap().has(*a)))
            as usize;
        violations += (s.turn > env.max_turns + 1) as usize;
    };
    let mut rng = session_rng(7, user.0, index);
    let out = run_session_observed(env, policy, state, user, target, &mut rng, &mut observer).unwrap();
    let turns = out
        .transcript
        .iter()
        .filter(|e| matches!(e, TranscriptEntry::Turn { .. }))
        .count();
    let hit = out.transcript.iter().any(|e| match e {
        TranscriptEntry::Turn { action: Action::Recommend(list), .. } => list.contains(&target),
        _ => false,
    });
    violations += (turns > env.max_turns) as usize;
    violations += (out.result.end_turn > env.max_turns) as usize;
    violations += (out.result.success != hit) as usize;
    for e in &out.transcript {
        if let TranscriptEntry::Turn { action: Action::Recommend(list), .. } = e {
            let distinct: std::collections::BTreeSet<_> = list.iter().collect();
            violations += (distinct.len() != list.len() || list.len() > env.k) as usize;
        }
    }
    violations
}

#[test]
fn invariants_over_ten_thousand_sessions() {
    let mut sessions = 0;
    let mut violations = 0;
    for setting in common::settings() {
        for seed in 0..2 {
            let fx = common::small(&setting, seed);
            let arms = ArmSpace::new(&fx.store, &fx.ds.catalog).unwrap();
            let env = env(&fx.ds.catalog, &arms, setting, 15);
            let by_user = fx.ds.log.items_by_user();
            for kind in PolicyKind::ALL {
                let policy = PolicyConfig::new(kind);
                for (u, items) in &by_user {
                    let mut st = PolicyState::new(&policy, fx.store.u_init(), 0.01).unwrap();
                    for (i, t) in items.iter().enumerate() {
                        violations += check_session(&env, &policy, &mut st, *u, *t, i);
                        sessions += 1;
                    }
                }
            }
        }
    }
    assert!(sessions >= 10_000, "{sessions}");
    assert_eq!(violations, 0);
}

fn one_item_store(d: usize, item: Vec<f64>, attrs: Vec<Vec<f64>>) -> EmbeddingStore {
    EmbeddingStore::new(d, BTreeMap::new(), vec![item], attrs).unwrap()
}

#[test]
fn single_item_catalog_succeeds_at_once() {
    let c = Catalog::new(vec![vec![AttrId(0)]], 1, None).unwrap();
    let store = one_item_store(2, vec![1.0, 0.0], vec![vec![0.0, 1.0]]);
    let arms = ArmSpace::new(&store, &c).unwrap();
    let env = env(&c, &arms, QuestionSetting::binary(), 15);
    let policy = PolicyConfig::new(PolicyKind::AbsGreedy);
    let mut st = PolicyState::new(&policy, &[0.0, 0.0], 0.01).unwrap();
    let out = run_session(&env, &policy, &mut st, UserId(0), ItemId(0), &mut session_rng(0, 0, 0)).unwrap();
    assert!(out.result.success);
    assert_eq!(out.result.end_turn, 1);
}

#[test]
fn ask_on_last_turn_fails() {
    let c = Catalog::new(vec![vec![AttrId(0)]], 1, None).unwrap();
    let store = one_item_store(2, vec![1.0, 0.0], vec![vec![0.0, 1.0]]);
    let arms = ArmSpace::new(&store, &c).unwrap();
    let env = env(&c, &arms, QuestionSetting::binary(), 1);
    let policy = PolicyConfig::new(PolicyKind::ConTS);
    let mut st = PolicyState::new(&policy, &[0.0, 1.0], 0.0).unwrap();
    let out = run_session(&env, &policy, &mut st, UserId(0), ItemId(0), &mut session_rng(0, 0, 0)).unwrap();
    assert!(matches!(
        out.transcript[0],
        TranscriptEntry::Turn { action: Action::AskAttributes(_), .. }
    ));
    assert!(!out.result.success);
    assert_eq!(out.result.end_turn, 1);
}

#[test]
fn session_replays_identically() {
    let setting = QuestionSetting::binary();
    let params = conts_core::SynthParams {
        n_users: 30,
        n_items: 20,
        n_attrs: 6,
        d: 6,
        ..conts_core::SynthParams::default()
    };
    let fx = common::fixture(params, 4);
    let arms = ArmSpace::new(&fx.store, &fx.ds.catalog).unwrap();
    let env = env(&fx.ds.catalog, &arms, setting, 15);
    let policy = PolicyConfig::new(PolicyKind::ConTS);
    let (u, items) = fx.split.test_records.items_by_user().into_iter().next().unwrap();
    let run = || {
        let mut st = PolicyState::new(&policy, fx.store.u_init(), 0.5).unwrap();
        let out = run_session(&env, &policy, &mut st, u, items[0], &mut session_rng(3, u.0, 0)).unwrap();
        (out, st)
    };
    assert_eq!(run(), run());
}

#[test]
fn state_persists_across_sessions() {
    let setting = QuestionSetting::binary();
    let fx = common::small(&setting, 2);
    let arms = ArmSpace::new(&fx.store, &fx.ds.catalog).unwrap();
    let env = env(&fx.ds.catalog, &arms, setting, 15);
    let (u, items) = fx.split.test_records.items_by_user().into_iter().next().unwrap();
    let targets = &items[..3];
    for kind in [PolicyKind::ConTS, PolicyKind::SeamlessUcb, PolicyKind::ConUcb] {
        let policy = PolicyConfig::new(kind);
        let run = run_user(&env, &policy, fx.store.u_init(), 0.01, u, targets, 11).unwrap();
        assert_eq!(run.results.len(), 3);

        let mut st = PolicyState::new(&policy, fx.store.u_init(), 0.01).unwrap();
        for (i, t) in targets.iter().enumerate() {
            let before = st.clone();
            let out = run_session(&env, &policy, &mut st, u, *t, &mut session_rng(11, u.0, i)).unwrap();
            assert_eq!(out.result, run.results[i]);
            if i == 0 {
                assert_ne!(st, before, "first session should move the state");
            }
        }
        assert_eq!(st, run.final_state);
    }
}

#[test]
fn zero_init_ablation_starts_at_zero() {
    let fx = common::small(&QuestionSetting::binary(), 0);
    assert!(fx.store.u_init().iter().any(|v| *v != 0.0));
    let policy = PolicyConfig::new(PolicyKind::ConTSNoInit);
    let st = PolicyState::new(&policy, fx.store.u_init(), 0.01).unwrap();
    assert!(st.posterior.mu().iter().all(|v| *v == 0.0));
    assert!(st.u_init.iter().all(|v| *v == 0.0));
}

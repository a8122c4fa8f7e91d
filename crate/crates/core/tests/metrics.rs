use conts_core::{compute_metrics, ItemId, SessionResult, UserId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_results(rng: &mut ChaCha8Rng, t: usize) -> Vec<SessionResult> {
    let n = rng.random_range(1..60);
    (0..n)
        .map(|i| {
            let success = rng.random_bool(0.5);
            SessionResult {
                user: UserId(i),
                target: ItemId(0),
                success,
                end_turn: if success { rng.random_range(1..=t) } else { t },
            }
        })
        .collect()
}

#[test]
fn monotone_and_matches_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..1000 {
        let t = [7, 10, 15][case % 3];
        let results = random_results(&mut rng, t);
        let m = compute_metrics(&results, t, "p", case as u64).unwrap();
        assert_eq!(m.max_turns(), t);
        assert_eq!(m.n_sessions, results.len());
        for w in m.sr_at.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let n = results.len() as f64;
        for k in 1..=t {
            let c = results.iter().filter(|r| r.success && r.end_turn <= k).count();
            assert_eq!(m.sr(k), c as f64 / n);
        }
        let turns: usize = results.iter().map(|r| if r.success { r.end_turn } else { t }).sum();
        assert!((m.at - turns as f64 / n).abs() < 1e-12);
        assert!(m.at >= 1.0 && m.at <= t as f64);
    }
}

#[test]
fn degenerate_inputs() {
    assert!(compute_metrics(&[], 15, "p", 0).is_err());
    let r = [SessionResult { user: UserId(0), target: ItemId(0), success: true, end_turn: 1 }];
    assert!(compute_metrics(&r, 0, "p", 0).is_err());
    let m = compute_metrics(&r, 15, "p", 0).unwrap();
    assert_eq!(m.sr(1), 1.0);
    assert_eq!(m.at, 1.0);
}

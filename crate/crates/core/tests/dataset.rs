use std::collections::BTreeSet;

use conts_core::linalg::dot;
use conts_core::{
    filter_by_frequency, generate_synthetic, split_cold_start, AttrId, Catalog, Error,
    FrequencyFilter, InteractionLog, ItemId, SynthParams, UserId,
};
use proptest::prelude::*;

fn log_with_counts(counts: &[usize]) -> InteractionLog {
    let mut records = Vec::new();
    for (u, &c) in counts.iter().enumerate() {
        for i in 0..c {
            records.push((UserId::from(u), ItemId::from(i % 7)));
        }
    }
    InteractionLog::new(records)
}

#[test]
fn boundary_user_alone_reaches_fraction() {
    let log = log_with_counts(&[7, 3]);
    let mut saw_first = false;
    for seed in 0..32 {
        match split_cold_start(&log, 0.7, seed) {
            Ok(s) => {
                assert_eq!(s.existing_users, BTreeSet::from([UserId(0)]));
                saw_first = true;
            }
            // the 3-record user came first, so both users were needed
            Err(Error::DegenerateSplit(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }
    assert!(saw_first);
}

#[test]
fn ten_by_ten_takes_seven() {
    let log = log_with_counts(&[10; 10]);
    for seed in 0..20 {
        let s = split_cold_start(&log, 0.7, seed).unwrap();
        assert_eq!(s.existing_users.len(), 7);
        assert_eq!(s.train_records.len(), 70);
    }
}

#[test]
fn yelp_scale_share() {
    // 27,675 users holding 1,345,606 records, spread unevenly.
    let users = 27_675usize;
    let total = 1_345_606usize;
    let mut counts: Vec<usize> = (0..users).map(|u| 10 + (u * 7919) % 78).collect();
    let sum: usize = counts.iter().sum();
    let mut diff = total as i64 - sum as i64;
    let mut u = 0;
    while diff != 0 {
        if diff > 0 {
            counts[u] += 1;
            diff -= 1;
        } else if counts[u] > 10 {
            counts[u] -= 1;
            diff += 1;
        }
        u = (u + 1) % users;
    }
    assert_eq!(counts.iter().sum::<usize>(), total);
    let max_share = *counts.iter().max().unwrap() as f64 / total as f64;
    let log = log_with_counts(&counts);
    let s = split_cold_start(&log, 0.7, 3).unwrap();
    let share = s.train_share();
    assert!(share >= 0.70 && share <= 0.70 + max_share, "{share}");
}

#[test]
fn single_user_is_degenerate() {
    let log = log_with_counts(&[5]);
    assert!(matches!(split_cold_start(&log, 0.7, 0), Err(Error::DegenerateSplit(_))));
    assert!(split_cold_start(&InteractionLog::default(), 0.7, 0).is_err());
    assert!(split_cold_start(&log_with_counts(&[3, 3]), 1.0, 0).is_err());
}

proptest! {
    #[test]
    fn split_properties(
        counts in proptest::collection::vec(1usize..20, 2..40),
        seed in any::<u64>(),
    ) {
        let log = log_with_counts(&counts);
        let Ok(s) = split_cold_start(&log, 0.7, seed) else { return Ok(()) };
        prop_assert!(s.existing_users.is_disjoint(&s.new_users));
        prop_assert_eq!(s.existing_users.len() + s.new_users.len(), counts.len());
        prop_assert!(s.train_records.records.iter().all(|(u, _)| s.existing_users.contains(u)));
        prop_assert!(s.test_records.records.iter().all(|(u, _)| s.new_users.contains(u)));
        prop_assert!(s.train_share() >= 0.7);
        // minimal prefix: without the crossing user the share is below the
        // fraction, so it is below it without the largest user too
        let max_user = s.existing_users.iter().map(|u| counts[u.index()]).max().unwrap();
        prop_assert!(((s.train_records.len() - max_user) as f64) < 0.7 * log.len() as f64);
        prop_assert_eq!(&s, &split_cold_start(&log, 0.7, seed).unwrap());
    }
}

#[test]
fn frequency_filter_drops_sparse_users_and_attributes() {
    // attribute 1 sits on 4 items only; attribute 0 on all 12
    let items: Vec<Vec<AttrId>> = (0..12)
        .map(|i| if i < 4 { vec![AttrId(0), AttrId(1)] } else { vec![AttrId(0)] })
        .collect();
    let catalog = Catalog::new(items, 2, None).unwrap();
    let mut records = Vec::new();
    for i in 0..9 {
        records.push((UserId(0), ItemId(i)));
    }
    for i in 0..12 {
        records.push((UserId(1), ItemId(i)));
    }
    let log = InteractionLog::new(records);
    let out = filter_by_frequency(&catalog, &log, FrequencyFilter::default()).unwrap();
    assert_eq!(out.users_kept, vec![UserId(1)]);
    assert_eq!(out.attrs_kept, vec![AttrId(0)]);
    assert_eq!(out.catalog.n_attributes(), 1);
    assert!(out.catalog.items().iter().all(|it| it.attribute_ids == vec![AttrId(0)]));
    assert!(out.log.records.iter().all(|(u, _)| *u == UserId(0)));
    assert_eq!(out.log.len(), 12);
}

#[test]
fn catalog_rejects_bad_references() {
    assert!(Catalog::new(vec![vec![AttrId(5)]], 2, None).is_err());
    let two_parents = Some(vec![vec![AttrId(0)], vec![AttrId(0)]]);
    assert!(Catalog::new(vec![vec![AttrId(0)]], 1, two_parents).is_err());
    let catalog = Catalog::new(vec![vec![AttrId(0)]], 1, None).unwrap();
    assert!(InteractionLog::new(vec![(UserId(0), ItemId(3))]).validate(&catalog).is_err());
}

#[test]
fn synthetic_shape_and_determinism() {
    let p = SynthParams { n_users: 1, records_per_user: 5, ..SynthParams::default() };
    let ds = generate_synthetic(&p, 1).unwrap();
    assert_eq!(ds.log.len(), 5);
    assert!(ds.log.records.iter().all(|(u, _)| *u == UserId(0)));

    let p = SynthParams { n_parents: 5, ..SynthParams::default() };
    assert_eq!(generate_synthetic(&p, 9).unwrap(), generate_synthetic(&p, 9).unwrap());
    assert_ne!(generate_synthetic(&p, 9).unwrap().log, generate_synthetic(&p, 10).unwrap().log);

    let bad = SynthParams { attrs_per_item: (2, 30), ..SynthParams::default() };
    assert!(matches!(generate_synthetic(&bad, 0), Err(Error::Config(_))));
}

#[test]
fn aligned_users_record_their_attribute() {
    let p = SynthParams::default();
    let (mut hits, mut total) = (0usize, 0usize);
    for seed in 0..5 {
        let ds = generate_synthetic(&p, seed).unwrap();
        let by_user = ds.log.items_by_user();
        for (u, items) in &by_user {
            let uv = ds.ground_truth.user(*u).unwrap();
            let un = dot(uv, uv).sqrt();
            // the attribute this user's vector points at most closely
            let (best, cos) = ds
                .ground_truth
                .attributes()
                .iter()
                .enumerate()
                .map(|(a, pv)| (a, dot(uv, pv) / (un * dot(pv, pv).sqrt())))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if cos < 0.5 {
                continue;
            }
            let a = AttrId::from(best);
            for v in items {
                total += 1;
                hits += ds.catalog.item(*v).unwrap().has(a) as usize;
            }
        }
    }
    assert!(total > 0);
    let share = hits as f64 / total as f64;
    assert!(share >= 0.6, "{share} over {total} records");
}

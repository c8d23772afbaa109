mod common;

use common::{dataset, cascade_fixture, random_log, rng};
use rankstab::dataset::{item_popularity, Dataset, Interaction};
use rankstab::harness::casper_graph;
use rankstab::perturb::*;

fn rows(ds: &Dataset) -> Vec<Interaction> {
    ds.interactions().to_vec()
}

#[test]
fn loo_removes_exactly_the_target() {
    let mut r = rng(1);
    for _ in 0..30 {
        let ds = random_log(&mut r, 80);
        let target = ds.get(ds.len() / 2).seq_index;
        let out = apply(
            &ds,
            &Perturbation {
                kind: EditKind::Loo,
                target,
                new_item: None,
                item_strategy: None,
            },
        )
        .unwrap();
        let mut want = rows(&ds);
        want.retain(|x| x.seq_index != target);
        assert_eq!(rows(&out), want);
        assert_eq!(out.n_items(), ds.n_items());
    }
}

#[test]
fn replace_changes_one_item_only() {
    let ds = cascade_fixture();
    let target = ds.get(4).seq_index;
    let out = apply(
        &ds,
        &Perturbation {
            kind: EditKind::Replace,
            target,
            new_item: Some(5),
            item_strategy: Some(ItemStrategy::Random),
        },
    )
    .unwrap();
    let diff: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.get(i) != out.get(i))
        .collect();
    assert_eq!(diff, [4]);
    assert_eq!(out.get(4).item, 5);
    assert_eq!(out.item_sequence(5).len(), ds.item_sequence(5).len() + 1);
}

#[test]
fn insert_follows_target_and_repeats() {
    let ds = dataset(&[(0, 0, 1.0), (1, 1, 1.0), (0, 2, 2.0)]);
    let target = ds.get(0).seq_index;
    let edit = Perturbation {
        kind: EditKind::Insert,
        target,
        new_item: Some(1),
        item_strategy: None,
    };
    let mut out = apply(&ds, &edit).unwrap();
    assert_eq!(out.len(), 4);
    assert_eq!(out.get(1).item, 1);
    assert_eq!(out.get(1).user, 0);
    assert_eq!(out.get(2).user, 1, "inserted row sorts before the next original row");
    // every insert halves the remaining gap; it eventually runs out
    let mut n = 0;
    while let Ok(next) = apply(&out, &edit) {
        out = next;
        n += 1;
        assert!(n < 64);
    }
    assert!(n >= 10);
}

#[test]
fn bad_edits_are_rejected() {
    let ds = cascade_fixture();
    let target = ds.get(0).seq_index;
    let replace = |item| Perturbation {
        kind: EditKind::Replace,
        target,
        new_item: item,
        item_strategy: None,
    };
    assert!(apply(&ds, &replace(Some(ds.get(0).item))).is_err());
    assert!(apply(&ds, &replace(None)).is_err());
    assert!(apply(&ds, &replace(Some(99))).is_err());
    let missing = Perturbation {
        kind: EditKind::Loo,
        target: 12345,
        new_item: None,
        item_strategy: None,
    };
    assert!(apply(&ds, &missing).is_err());
}

#[test]
fn planned_targets_are_reproducible_and_distinct() {
    let ds = cascade_fixture();
    let pop = item_popularity(&ds).unwrap();
    let spec = PerturbationSpec {
        kind: Some(EditKind::Replace),
        strategy: TargetVariant::Random,
        item_strategy: ItemStrategy::Random,
        k: 5,
        seed: None,
    };
    let a = plan_perturbations(&ds, &spec, 3, &pop, None).unwrap();
    assert_eq!(a, plan_perturbations(&ds, &spec, 3, &pop, None).unwrap());
    let mut targets: Vec<u64> = a.iter().map(|p| p.target).collect();
    targets.sort();
    targets.dedup();
    assert_eq!(targets.len(), 5);
    for p in &a {
        let original = ds.get(ds.position_of(p.target).unwrap()).item;
        assert_ne!(p.new_item, Some(original));
    }
    // a fixed target seed overrides the run seed
    let fixed = PerturbationSpec { seed: Some(9), ..spec };
    assert_eq!(
        plan_perturbations(&ds, &fixed, 1, &pop, None).unwrap(),
        plan_perturbations(&ds, &fixed, 2, &pop, None).unwrap()
    );
}

#[test]
fn casper_picks_highest_cascade() {
    let ds = cascade_fixture();
    let pop = item_popularity(&ds).unwrap();
    let (g, scores) = casper_graph(&ds, None).unwrap();
    let spec = PerturbationSpec {
        kind: Some(EditKind::Loo),
        strategy: TargetVariant::Casper,
        item_strategy: ItemStrategy::Random,
        k: 2,
        seed: None,
    };
    let edits = plan_perturbations(&ds, &spec, 0, &pop, Some((&g, &scores))).unwrap();
    let targets: Vec<u64> = edits.iter().map(|p| p.target).collect();
    assert_eq!(targets, [ds.get(2).seq_index, ds.get(0).seq_index]);
    assert!(plan_perturbations(&ds, &spec, 0, &pop, None).is_err());
}

#[test]
fn popular_and_unpopular_items() {
    // counts: item 0 x3, item 1 x2, item 2 x1, item 3 x0
    let ds = dataset(&[
        (0, 0, 1.0),
        (0, 0, 2.0),
        (1, 0, 3.0),
        (1, 1, 4.0),
        (2, 1, 5.0),
        (2, 2, 6.0),
        (2, 3, 7.0),
    ]);
    let mut pop = item_popularity(&ds).unwrap();
    pop.counts[3] = 0;
    pop.order = vec![0, 1, 2, 3];
    let mut r = rng(0);
    assert_eq!(choose_item(&pop, ItemStrategy::Popular, &[], &mut r).unwrap(), 0);
    assert_eq!(choose_item(&pop, ItemStrategy::Popular, &[0], &mut r).unwrap(), 1);
    assert_eq!(choose_item(&pop, ItemStrategy::Unpopular, &[], &mut r).unwrap(), 3);
    assert_eq!(choose_item(&pop, ItemStrategy::Unpopular, &[3], &mut r).unwrap(), 2);
    for _ in 0..50 {
        assert_ne!(choose_item(&pop, ItemStrategy::Random, &[2], &mut r).unwrap(), 2);
    }
    assert!(choose_item(&pop, ItemStrategy::Random, &[0, 1, 2, 3], &mut r).is_err());
}

#[test]
fn strategy_names_round_trip() {
    for v in [
        TargetVariant::Random,
        TargetVariant::EarliestRandom,
        TargetVariant::LatestRandom,
        TargetVariant::Casper,
    ] {
        assert_eq!(TargetVariant::parse(v.name()), Some(v));
    }
    assert_eq!(TargetVariant::parse("bogus"), None);
}

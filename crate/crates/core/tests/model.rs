mod common;

use common::cascade_fixture;
use rankstab::dataset::{filter_min_activity, item_popularity, synth_generate, temporal_split, SynthConfig, TemporalSplit};
use rankstab::metrics::reciprocal_rank;
use rankstab::model::*;
use rankstab::perturb::{apply, EditKind, Perturbation};

fn synth_split(concentration: f64, seed: u64) -> TemporalSplit {
    let cfg = SynthConfig {
        n_users: 60,
        n_items: 36,
        events_per_user: 60,
        concentration,
        ..SynthConfig::default()
    };
    let ds = filter_min_activity(&synth_generate(&cfg, seed).unwrap(), 2).unwrap();
    temporal_split(&ds, 0.9).unwrap()
}

fn mrr(ranked: &[RankedTest]) -> f64 {
    ranked
        .iter()
        .map(|r| reciprocal_rank(&r.list, r.test.item).unwrap())
        .sum::<f64>()
        / ranked.len() as f64
}

/// MRR of ranking every test interaction by raw training counts.
fn popularity_baseline(split: &TemporalSplit) -> f64 {
    let mut counts = vec![0u64; split.train.n_items()];
    for x in split.train.interactions() {
        counts[x.item as usize] += 1;
    }
    let mrr: f64 = split
        .test
        .interactions()
        .iter()
        .map(|x| {
            let c = counts[x.item as usize];
            // rank = items strictly more popular + lower ids tied with it + 1
            let ahead = counts
                .iter()
                .enumerate()
                .filter(|&(i, &n)| n > c || (n == c && (i as u32) < x.item))
                .count();
            1.0 / (ahead + 1) as f64
        })
        .sum();
    mrr / split.test.len() as f64
}

#[test]
fn learns_more_than_popularity_on_structured_data() {
    for seed in 0..3 {
        let split = synth_split(50.0, seed);
        let m = fit(init(split.train.n_users(), split.train.n_items(), &ModelConfig::default()).unwrap(), &split.train).unwrap();
        let model_mrr = mrr(&rank_for_test(&m, &split).unwrap());
        let base = popularity_baseline(&split);
        assert!(model_mrr > base, "seed {seed}: model {model_mrr} vs popularity {base}");
    }
}

#[test]
fn popularity_baseline_agrees_with_index() {
    let split = synth_split(5.0, 1);
    let pop = item_popularity(&split.train).unwrap();
    let via_index = rankstab::harness::popularity_mrr(&split).unwrap();
    assert!((via_index - popularity_baseline(&split)).abs() < 1e-12);
    assert_eq!(pop.counts.iter().sum::<u64>() as usize, split.train.len());
}

#[test]
fn training_is_bitwise_reproducible() {
    let split = synth_split(5.0, 2);
    let cfg = ModelConfig {
        seed: 4,
        ..ModelConfig::default()
    };
    let a = fit(init(60, 36, &cfg).unwrap(), &split.train).unwrap();
    let b = fit(init(60, 36, &cfg).unwrap(), &split.train).unwrap();
    assert_eq!(a, b);
    for u in 0..60 {
        let n: f64 = a.user(u).iter().map(|v| v * v).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
    let c = fit(init(60, 36, &ModelConfig { seed: 5, ..cfg }).unwrap(), &split.train).unwrap();
    assert_ne!(a, c);
}

#[test]
fn zero_rates_reproduce_init() {
    let split = synth_split(5.0, 3);
    let cfg = ModelConfig {
        drift: 0.0,
        learning_rate: 0.0,
        epochs: 1,
        ..ModelConfig::default()
    };
    let start = init(60, 36, &cfg).unwrap();
    assert_eq!(fit(start.clone(), &split.train).unwrap(), start);
}

#[test]
fn single_deletion_changes_some_list() {
    let split = synth_split(5.0, 4);
    let m = fit(init(60, 36, &ModelConfig::default()).unwrap(), &split.train).unwrap();
    let before = rank_for_test(&m, &split).unwrap();
    let edit = Perturbation {
        kind: EditKind::Loo,
        target: split.train.get(0).seq_index,
        new_item: None,
        item_strategy: None,
    };
    let train = apply(&split.train, &edit).unwrap();
    let m2 = fit(init(60, 36, &ModelConfig::default()).unwrap(), &train).unwrap();
    let after = rank_for_test(&m2, &TemporalSplit { train, ..split }).unwrap();
    assert!(before.iter().zip(&after).any(|(a, b)| a.list != b.list));
}

#[test]
fn rank_lists_are_full_permutations_in_test_order() {
    let split = synth_split(5.0, 5);
    let m = fit(init(60, 36, &ModelConfig::default()).unwrap(), &split.train).unwrap();
    let ranked = rank_for_test(&m, &split).unwrap();
    assert_eq!(ranked.len(), split.test.len());
    for (r, x) in ranked.iter().zip(split.test.interactions()) {
        assert_eq!(r.test, *x);
        let mut items = r.list.items().to_vec();
        items.sort();
        assert_eq!(items, (0..36).collect::<Vec<u32>>());
    }
    assert_eq!(ranked, rank_for_test(&m, &split).unwrap());
}

#[test]
fn unseen_test_user_ranks_from_initial_state() {
    // user 3 never appears in train: only its init vector is used
    let ds = cascade_fixture();
    let split = temporal_split(&ds, 0.5).unwrap();
    let cfg = ModelConfig {
        dim: 4,
        ..ModelConfig::default()
    };
    let m = fit(init(5, ds.n_items(), &cfg).unwrap(), &split.train).unwrap();
    let extra = TemporalSplit {
        test: rankstab::dataset::Dataset::new(
            vec![rankstab::dataset::Interaction {
                user: 4,
                item: 0,
                timestamp: 100.0,
                seq_index: 1 << 40,
            }],
            5,
            ds.n_items(),
        )
        .unwrap(),
        ..split
    };
    let ranked = rank_for_test(&m, &extra).unwrap();
    assert_eq!(ranked[0].list, m.rank_items(m.user(4)));
}

#[test]
fn window_limits_participation() {
    let split = synth_split(5.0, 6);
    let full = fit(init(60, 36, &ModelConfig::default()).unwrap(), &split.train).unwrap();
    let cfg = ModelConfig {
        max_seq_len: Some(5),
        ..ModelConfig::default()
    };
    let short = fit(init(60, 36, &cfg).unwrap(), &split.train).unwrap();
    assert_ne!(full.user(0), short.user(0));
}

#[test]
fn checkpoint_round_trip() {
    let split = synth_split(5.0, 7);
    let m = fit(init(60, 36, &ModelConfig::default()).unwrap(), &split.train).unwrap();
    let mut buf = Vec::new();
    write_checkpoint(&m, &mut buf).unwrap();
    let back = read_checkpoint(buf.as_slice()).unwrap();
    assert_eq!(back, m);
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.contains(CHECKPOINT_FORMAT));
    assert!(read_checkpoint("{\"format\":\"other\"}\n".as_bytes()).is_err());
}

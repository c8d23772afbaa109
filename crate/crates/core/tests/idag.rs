mod common;

use common::{closure_counts, dataset, cascade_fixture, random_log, rng};
use rand::Rng;
use rankstab::idag::*;

#[test]
fn fixture_scores_and_selection() {
    let ds = cascade_fixture();
    let g = build_idag(&ds, None).unwrap();
    assert_eq!(g.node_count(), 12);
    let scores = cascading_scores(&g);
    // nodes are in time order, so node n is X(n+1)
    let zero: Vec<u32> = g.zero_in_degree_nodes().collect();
    assert_eq!(zero, [0, 1, 2]);
    assert_eq!(scores.score_of(2), Some(8));
    assert_eq!(scores.score_of(0), Some(5));
    assert_eq!(scores.score_of(1), Some(3));
    assert_eq!(select_targets(&g, &scores, 1).unwrap(), [2]);
    assert_eq!(select_targets(&g, &scores, 3).unwrap(), [2, 0, 1]);
    assert!(select_targets(&g, &scores, 4).is_err());

    let edges: Vec<(u32, u32, EdgeKind)> = g.edges().collect();
    assert!(edges.contains(&(0, 3, EdgeKind::User)));
    assert!(edges.contains(&(2, 4, EdgeKind::Item)));
    assert_eq!(closure_counts(&g)[2], 8);
}

#[test]
fn descendant_counts_match_reachability_oracle() {
    let mut r = rng(99);
    for _ in 0..100 {
        let ds = random_log(&mut r, 300);
        let g = build_idag(&ds, None).unwrap();
        let oracle = closure_counts(&g);
        for n in 0..g.node_count() as u32 {
            assert_eq!(descendant_count(&g, n).unwrap(), oracle[n as usize]);
        }
        let scores = cascading_scores(&g);
        for (n, s) in &scores.scores {
            assert_eq!(*s, oracle[*n as usize]);
        }
        // a parent reaches everything its child reaches, plus the child
        for (s, d, _) in g.edges() {
            assert!(oracle[s as usize] > oracle[d as usize]);
        }
    }
}

#[test]
fn tied_timestamps_link_to_next_later_group() {
    // user 0: t=1, t=1, t=2 -> both t=1 events point at the t=2 one
    let ds = dataset(&[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 2.0)]);
    let g = build_idag(&ds, None).unwrap();
    let mut edges: Vec<(u32, u32)> = g.edges().map(|(s, d, _)| (s, d)).collect();
    edges.sort();
    assert_eq!(edges, [(0, 2), (1, 2)]);
    assert_eq!(g.in_degree(2), 2);
}

#[test]
fn every_edge_points_forward_in_time() {
    let mut r = rng(7);
    for _ in 0..30 {
        let ds = random_log(&mut r, 200);
        let g = build_idag(&ds, None).unwrap();
        for (s, d, kind) in g.edges() {
            assert!(g.timestamp(s) < g.timestamp(d));
            let (a, b) = (ds.get(g.position(s)), ds.get(g.position(d)));
            match kind {
                EdgeKind::User => assert_eq!(a.user, b.user),
                EdgeKind::Item => assert_eq!(a.item, b.item),
            }
        }
    }
}

#[test]
fn window_keeps_latest_interactions_per_user() {
    let mut r = rng(8);
    for l in [1usize, 2, 5] {
        let ds = random_log(&mut r, 150);
        let g = build_idag(&ds, Some(l)).unwrap();
        let want: usize = ds.user_sequences().iter().map(|s| s.len().min(l)).sum();
        assert_eq!(g.node_count(), want);
        let oracle = closure_counts(&g);
        let scores = cascading_scores(&g);
        for (n, s) in &scores.scores {
            assert_eq!(*s, oracle[*n as usize]);
        }
    }
    assert!(build_idag(&dataset(&[(0, 0, 1.0)]), Some(0)).is_err());
}

#[test]
fn outputs_are_written() {
    let g = build_idag(&cascade_fixture(), None).unwrap();
    let mut edges = Vec::new();
    g.write_edge_list(&mut edges).unwrap();
    let text = String::from_utf8(edges).unwrap();
    assert_eq!(text.lines().count(), g.edge_count());
    let scores = cascading_scores(&g);
    let mut csv = Vec::new();
    scores.write_csv(&g, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + scores.z());
}

#[test]
fn scores_span_several_root_blocks() {
    // many short users over many items: hundreds of zero-in-degree nodes
    let mut r = rng(21);
    let rows: Vec<(u32, u32, f64)> = (0..1500)
        .map(|i| (r.random_range(0..3000), r.random_range(0..3000), i as f64))
        .collect();
    let ds = dataset(&rows);
    let g = build_idag(&ds, None).unwrap();
    let scores = cascading_scores(&g);
    assert!(scores.z() > 512, "{}", scores.z());
    let oracle = closure_counts(&g);
    for (n, s) in &scores.scores {
        assert_eq!(*s, oracle[*n as usize]);
        assert_eq!(*s, descendant_count(&g, *n).unwrap());
    }
}

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rwa_control::experiments::instance::prufer_decode;
use rwa_control::graph::{
    assign_gamma, build_graph, check_cycle_consistency, prune_order, Detunings, LevelGraph,
};
use rwa_control::rwa::{build_effective_generator, build_m2, hermitian_deviation, UndrivenEdges, HERMITIAN_TOL};

fn tree_and_detunings() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<f64>)> {
    (2usize..=9).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(0..n, n.saturating_sub(2)),
            prop::collection::vec(-10.0f64..10.0, n - 1),
        )
            .prop_map(|(n, code, d)| {
                let edges = if n == 2 { vec![(0, 1)] } else { prufer_decode(&code, n) };
                (n, edges, d)
            })
    })
}

fn random_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..=8).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        (Just(n), prop::sample::subsequence(pairs.clone(), 0..=pairs.len()))
    })
}

fn labels(edges: &[(usize, usize)], values: &[f64]) -> Detunings {
    let mut d = Detunings::new();
    for (&(a, b), &v) in edges.iter().zip(values) {
        d.set(b, a, v);
    }
    d
}

proptest! {
    #[test]
    fn gamma_residuals_vanish((n, edges, d) in tree_and_detunings(), root in -5.0f64..5.0) {
        let graph = LevelGraph::from_edges(n, edges.clone());
        let gamma = assign_gamma(&graph, &labels(&edges, &d), root).unwrap();
        for r in &gamma.residuals {
            prop_assert!(r.value.abs() <= 1e-12 * r.detuning.abs().max(1.0), "{r:?}");
        }
        prop_assert_eq!(gamma.gamma[gamma.root], root);
    }

    #[test]
    fn gamma_differs_only_by_root_value((n, edges, d) in tree_and_detunings(), shift in -5.0f64..5.0) {
        let graph = LevelGraph::from_edges(n, edges.clone());
        let a = assign_gamma(&graph, &labels(&edges, &d), 0.0).unwrap();
        let b = assign_gamma(&graph, &labels(&edges, &d), shift).unwrap();
        for (x, y) in a.gamma.iter().zip(&b.gamma) {
            prop_assert!((y - x - shift).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn tree_flags_match_edge_count((n, edges) in random_graph()) {
        let graph = LevelGraph::from_edges(n, edges.clone());
        prop_assert_eq!(graph.connected && graph.acyclic, edges.len() == n - 1 && graph.connected);
        prop_assert_eq!(graph.components().len() == 1, graph.connected);
        if graph.acyclic {
            prop_assert_eq!(edges.len(), n - graph.components().len());
        }
    }

    #[test]
    fn prune_order_removes_every_edge_once((n, edges, _d) in tree_and_detunings()) {
        let graph = LevelGraph::from_edges(n, edges.clone());
        let order = prune_order(&graph).unwrap();
        prop_assert_eq!(order.removals.len(), n - 1);
        let mut removed: Vec<(usize, usize)> = order.removals.iter().map(|&(v, s)| (v.min(s), v.max(s))).collect();
        removed.sort_unstable();
        let mut expected = edges.clone();
        expected.sort_unstable();
        prop_assert_eq!(removed, expected);
        let mut gone = vec![false; n];
        for &(v, _) in &order.removals {
            prop_assert!(!gone[v]);
            gone[v] = true;
        }
        prop_assert!(!gone[order.root]);
    }

    #[test]
    fn acyclic_cycle_check_matches_assignment((n, edges, d) in tree_and_detunings()) {
        let graph = LevelGraph::from_edges(n, edges.clone());
        let det = labels(&edges, &d);
        let report = check_cycle_consistency(&graph, &det).unwrap();
        prop_assert!(report.cycles.is_empty());
        prop_assert_eq!(report.gamma.unwrap(), assign_gamma(&graph, &det, 0.0).unwrap());
    }

    #[test]
    fn generator_is_hermitian_and_time_independent(seed in any::<u64>(), n in 2usize..=7, t in 0.0f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (system, drives) = common::random_driven_tree(n, &mut rng);
        let m2 = build_m2(&system, &drives, UndrivenEdges::Error).unwrap();
        let graph = build_graph(&system);
        let det = drives.detunings(&system);
        let gamma = assign_gamma(&graph, &det, 0.0).unwrap();
        let generator = build_effective_generator(&m2, &gamma).unwrap();
        prop_assert!(hermitian_deviation(&generator.matrix) <= HERMITIAN_TOL);
        for &(a, b) in graph.edges() {
            let (k, j) = (b, a);
            let phase = (gamma.gamma[k] - gamma.gamma[j] + det.get(k, j).unwrap()) * t;
            prop_assert!((num_complex::Complex64::from_polar(1.0, phase) - 1.0).norm() < 1e-10);
        }
        // Sparsity of the RWA matrix follows the coupling edges exactly.
        for r in 0..n {
            for c in 0..n {
                prop_assert_eq!(m2[(r, c)].norm() > 0.0, graph.has_edge(r, c) && drives.field_for(r, c).map_or(false, |f| drives.fields()[f].amplitude.norm() > 0.0));
            }
        }
    }
}

#[test]
fn cycle_with_zero_detuning_sum_is_reducible() {
    let graph = LevelGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]);
    let d = Detunings::new().with(1, 0, 0.3).with(2, 1, -0.1).with(2, 0, 0.2);
    let report = check_cycle_consistency(&graph, &d).unwrap();
    assert_eq!(report.cycles.len(), 1);
    assert!(report.reducible());
    let gamma = report.gamma.unwrap();
    assert!(gamma.residuals_vanish());

    let bad = Detunings::new().with(1, 0, 0.3).with(2, 1, -0.1).with(2, 0, 0.25);
    assert!(!check_cycle_consistency(&graph, &bad).unwrap().reducible());
}

#[test]
fn figure_one_graphs() {
    let cyclic = LevelGraph::from_edges(5, [(0, 1), (0, 2), (0, 4), (1, 3), (0, 3)]);
    assert!(cyclic.connected && !cyclic.acyclic);
    let tree = LevelGraph::from_edges(5, [(0, 1), (0, 2), (0, 4), (1, 3)]);
    assert!(tree.connected && tree.acyclic);
}

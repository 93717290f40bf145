use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rlcausal::data::{Dataset, VariableTable};
use rlcausal::graph::{AdjacencyMatrix, CausalGraph, ACYCLIC_TOLERANCE};
use rlcausal::numeric::Matrix;
use rlcausal::pipeline::GraphDocument;
use rlcausal::policy::{log_prob, sample_adjacency};
use rlcausal::scoring::{BicScorer, RegressionKind};
use rlcausal::sim::{generate, model_for_graph, structural_hamming_distance, GeneratorConfig};
use rlcausal::strength::{digamma, edge_strengths, prune, spacing_entropy};

fn adjacency(d: usize) -> impl Strategy<Value = AdjacencyMatrix> {
    prop::collection::vec(any::<bool>(), d * d).prop_map(move |bits| {
        let edges = (0..d * d).filter(|&k| bits[k] && k / d != k % d).map(|k| (k / d, k % d));
        AdjacencyMatrix::from_edges(d, edges).unwrap()
    })
}

fn sized_adjacency() -> impl Strategy<Value = AdjacencyMatrix> {
    (2usize..=6).prop_flat_map(adjacency)
}

fn permutation(d: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..d).collect::<Vec<_>>()).prop_shuffle()
}

/// Data from a random linear model on `d` nodes.
fn dataset(d: usize, seed: u64) -> Dataset {
    let cfg = GeneratorConfig {
        d,
        seed,
        ..GeneratorConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = rlcausal::sim::random_dag_with(d, 0.5, &mut rng);
    generate(&model_for_graph(g, &cfg, &mut rng).unwrap(), 300, seed).unwrap()
}

fn permute_columns(ds: &Dataset, perm: &[usize]) -> Dataset {
    let d = ds.n_vars();
    let mut cols = vec![Vec::new(); d];
    for j in 0..d {
        cols[perm[j]] = ds.column(j).unwrap().to_vec();
    }
    Dataset::from_columns(cols, VariableTable::numbered(d)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn penalty_vanishes_iff_dag(a in sized_adjacency()) {
        let h = a.acyclicity_penalty();
        prop_assert!(h >= 0.0);
        prop_assert_eq!(h <= ACYCLIC_TOLERANCE, a.is_dag());
        if a.is_dag() {
            let order = a.topological_order().unwrap();
            let pos: Vec<usize> = (0..a.d()).map(|n| order.iter().position(|&o| o == n).unwrap()).collect();
            for (i, j) in a.edges() {
                prop_assert!(pos[i] < pos[j]);
            }
        }
    }

    #[test]
    fn bic_is_decomposable(a in adjacency(5), node in 0usize..5, flip in 0usize..5, seed in 0u64..50) {
        let ds = dataset(5, seed);
        let s = BicScorer::with_cache_capacity(&ds, RegressionKind::Linear, 0).unwrap();
        let local: Vec<f64> = (0..5).map(|j| s.local_bic(j, &a.parents(j).unwrap()).unwrap()).collect();
        let total = s.graph_bic(&a).unwrap();
        prop_assert!((total - local.iter().sum::<f64>()).abs() <= 1e-9 * total.abs());

        prop_assume!(flip != node);
        let mut b = a.clone();
        if b.has_edge(flip, node) { b.remove(flip, node) } else { b.insert(flip, node).unwrap() }
        for j in 0..5 {
            let after = s.local_bic(j, &b.parents(j).unwrap()).unwrap();
            if j == node {
                prop_assert_ne!(after, local[j]);
            } else {
                prop_assert_eq!(after, local[j]);
            }
        }
    }

    #[test]
    fn bic_is_permutation_invariant(
        (a, perm) in (3usize..=6).prop_flat_map(|d| (adjacency(d), permutation(d))),
        seed in 0u64..50,
        quadratic in any::<bool>(),
    ) {
        let d = a.d();
        let kind = if quadratic { RegressionKind::Quadratic } else { RegressionKind::Linear };
        let ds = dataset(d, seed);
        let base = BicScorer::new(&ds, kind).unwrap().graph_bic(&a).unwrap();
        let moved = BicScorer::new(&permute_columns(&ds, &perm), kind)
            .unwrap()
            .graph_bic(&a.permuted(&perm).unwrap())
            .unwrap();
        prop_assert!((base - moved).abs() <= 1e-9 * base.abs().max(1.0), "{} vs {}", base, moved);
    }

    #[test]
    fn cache_does_not_change_scores(graphs in prop::collection::vec(adjacency(5), 1..20), seed in 0u64..50) {
        let ds = dataset(5, seed);
        let cached = BicScorer::new(&ds, RegressionKind::Quadratic).unwrap();
        let plain = BicScorer::with_cache_capacity(&ds, RegressionKind::Quadratic, 0).unwrap();
        for _ in 0..2 {
            for g in &graphs {
                prop_assert_eq!(cached.graph_bic(g).unwrap().to_bits(), plain.graph_bic(g).unwrap().to_bits());
            }
        }
        prop_assert_eq!(plain.cache_hits(), 0);
    }

    #[test]
    fn entropy_affine_identity(
        grid in prop::collection::btree_set(-2000i32..2000, 2..200),
        a in prop_oneof![-8.0f64..-0.125, 0.125f64..8.0],
        b in -50.0f64..50.0,
    ) {
        // Well-separated points keep the rounding of a·x + b negligible.
        let xs: Vec<f64> = grid.iter().map(|&k| f64::from(k) * 0.1).collect();
        let base = spacing_entropy(&xs).unwrap().value;
        let moved: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let e = spacing_entropy(&moved).unwrap().value;
        prop_assert!((e - base - a.abs().ln()).abs() < 1e-9, "{} vs {}", e, base + a.abs().ln());
    }

    #[test]
    fn entropy_power_of_two_scaling(xs in prop::collection::vec(-100.0f64..100.0, 2..200), k in -6i32..6) {
        let base = spacing_entropy(&xs).unwrap();
        let a = 2f64.powi(k);
        let e = spacing_entropy(&xs.iter().map(|x| a * x).collect::<Vec<_>>()).unwrap();
        prop_assume!(base.tie_corrections == 0);
        prop_assert!((e.value - base.value - a.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_ignores_sample_order(xs in prop::collection::vec(-10.0f64..10.0, 2..100), perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = xs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        prop_assert_eq!(spacing_entropy(&xs).unwrap().value, spacing_entropy(&shuffled).unwrap().value);
    }

    #[test]
    fn digamma_recurrence(x in 1e-3f64..1e3) {
        let lhs = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
        prop_assert!((lhs - 1.0 / x).abs() < 1e-10 * (1.0 / x).max(1.0));
    }

    #[test]
    fn prune_is_subset_and_idempotent(a in adjacency(5), seed in 0u64..50, threshold in -2.0f64..6.0) {
        let ds = dataset(5, seed);
        let g = CausalGraph::new(a, VariableTable::numbered(5)).unwrap();
        let s = edge_strengths(&g, &ds).unwrap();
        let p = prune(&g, &s, threshold).unwrap();
        for (i, j) in p.adjacency.edges() {
            prop_assert!(g.adjacency.has_edge(i, j));
            prop_assert!(s.log_strength(i, j).unwrap() >= threshold);
        }
        let again = prune(&p, &s, threshold).unwrap();
        prop_assert_eq!(&again, &p);
        let higher = prune(&g, &s, threshold + 1.0).unwrap();
        for (i, j) in higher.adjacency.edges() {
            prop_assert!(p.adjacency.has_edge(i, j));
        }
    }

    #[test]
    fn sampled_graphs_have_no_self_loops(d in 2usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits = Matrix::from_fn(d, d, |i, j| if i == j { 50.0 } else { ((i * 7 + j * 3) as f64).sin() * 3.0 });
        let (a, lp) = sample_adjacency(&logits, &mut rng).unwrap();
        for i in 0..d {
            prop_assert!(!a.has_edge(i, i));
        }
        prop_assert!((lp - log_prob(&logits, &a).unwrap()).abs() < 1e-12);
        prop_assert!(lp <= 0.0);
    }

    #[test]
    fn shd_is_a_metric(a in adjacency(5), b in adjacency(5), c in adjacency(5)) {
        let ab = structural_hamming_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, structural_hamming_distance(&b, &a).unwrap());
        prop_assert_eq!(structural_hamming_distance(&a, &a).unwrap(), 0);
        let via = structural_hamming_distance(&a, &c).unwrap() + structural_hamming_distance(&c, &b).unwrap();
        prop_assert!(ab <= via);
    }

    #[test]
    fn graph_json_round_trips(a in sized_adjacency()) {
        let d = a.d();
        let g = CausalGraph::new(a, VariableTable::numbered(d)).unwrap();
        let text = GraphDocument::new(&g, None).to_json().unwrap();
        let back = GraphDocument::from_json(&text).unwrap().to_graph().unwrap();
        prop_assert_eq!(back.adjacency, g.adjacency);
        prop_assert_eq!(back.variables, g.variables);
    }
}

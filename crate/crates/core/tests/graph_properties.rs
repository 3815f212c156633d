mod common;

use common::*;
use mgcn::graphdata::{
    generate_sbm, load_dataset, make_splits, normalize_adjacency, Dataset, Graph, SbmParams, SPARSE_SPLIT,
};
use mgcn::ndiff::Matrix;
use proptest::prelude::*;

fn edge_list(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..3 * n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_storage_invariants((n, edges) in edge_list(30)) {
        let g = Graph::from_edges(n, &edges).unwrap();
        for u in 0..n {
            let nb = g.neighbours(u);
            prop_assert!(nb.windows(2).all(|w| w[0] < w[1]), "row {} not strictly sorted", u);
            prop_assert!(!nb.contains(&u));
            for &v in nb {
                prop_assert!(g.has_edge(v, u));
            }
        }
        for &(u, v) in &edges {
            prop_assert_eq!(g.has_edge(u, v), u != v);
        }
    }

    #[test]
    fn normalized_adjacency_invariants((n, edges) in edge_list(30)) {
        let g = Graph::from_edges(n, &edges).unwrap();
        let adj = normalize_adjacency(&g);
        let deg: Vec<f64> = (0..n).map(|i| g.degree(i) as f64 + 1.0).collect();
        for i in 0..n {
            let (cols, vals) = adj.row(i);
            prop_assert!(cols.contains(&i));
            let mut identity = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                prop_assert!(v > 0.0 && v <= 1.0);
                prop_assert_eq!(v, adj.get(j, i));
                identity += v * (deg[j] / deg[i]).sqrt();
            }
            prop_assert!((identity - 1.0).abs() < 1e-12);
        }
        prop_assert!(max_abs_diff(&dense_normalized(n, &edges), &adj.to_dense()) < 1e-15);
    }

    #[test]
    fn splits_partition_and_cover_classes(
        labels in prop::collection::vec(0usize..5, 5..200),
        seed in any::<u64>(),
    ) {
        let mut labels = labels;
        for c in 0..5 {
            labels.push(c);
        }
        let s = make_splits(&labels, SPARSE_SPLIT, seed).unwrap();
        let mut seen = vec![0u8; labels.len()];
        for &i in s.train.iter().chain(&s.val).chain(&s.test) {
            seen[i] += 1;
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for c in 0..5 {
            prop_assert!(s.train.iter().any(|&i| labels[i] == c));
        }
        prop_assert_eq!(make_splits(&labels, SPARSE_SPLIT, seed).unwrap(), s);
    }

    #[test]
    fn save_then_load_is_bit_exact(seed in 0u64..1000, blocks in prop::collection::vec(1usize..12, 1..4)) {
        let ds = generate_sbm(&SbmParams { block_sizes: blocks, p_in: 0.5, p_out: 0.1, feature_dim: 3, feature_shift: 1.0, seed }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        prop_assert_eq!(back.graph, ds.graph);
        prop_assert_eq!(back.labels, ds.labels);
        prop_assert_eq!(back.num_classes, ds.num_classes);
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.features), bits(&ds.features));
    }
}

#[test]
fn smallest_dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("edges.txt"), "0 1\n").unwrap();
    std::fs::write(dir.path().join("features.csv"), "1,0\n0,1\n").unwrap();
    std::fs::write(dir.path().join("labels.txt"), "0\n1\n").unwrap();
    let ds = load_dataset(dir.path()).unwrap();
    assert_eq!((ds.num_nodes(), ds.feature_dim(), ds.num_classes), (2, 2, 2));
    assert!(ds.graph.has_edge(0, 1) && ds.graph.has_edge(1, 0));
}

#[test]
fn duplicate_and_reversed_edges_collapse() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("edges.txt"), "0 1\n1 0\n0 1\n2 2\n").unwrap();
    std::fs::write(dir.path().join("features.csv"), "1\n2\n3\n").unwrap();
    std::fs::write(dir.path().join("labels.txt"), "0\n1\n1\n").unwrap();
    let ds = load_dataset(dir.path()).unwrap();
    assert_eq!(ds.graph.neighbours(0), &[1]);
    assert_eq!(ds.graph.neighbours(1), &[0]);
    assert!(ds.graph.neighbours(2).is_empty());
}

#[test]
fn sbm_class_means_are_separated_by_shift_times_sqrt_two() {
    let ds: Dataset = generate_sbm(&SbmParams { feature_shift: 2.0, seed: 3, ..SbmParams::default() }).unwrap();
    let d = ds.feature_dim();
    let mut means = vec![vec![0.0; d]; ds.num_classes];
    let mut counts = vec![0.0; ds.num_classes];
    for i in 0..ds.num_nodes() {
        counts[ds.labels[i]] += 1.0;
        for (m, v) in means[ds.labels[i]].iter_mut().zip(ds.features.row(i)) {
            *m += v;
        }
    }
    for (m, c) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= c);
    }
    let expected = 2.0 * 2f64.sqrt();
    for a in 0..3 {
        for b in a + 1..3 {
            let dist = means[a].iter().zip(&means[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            // 100 samples per class: each mean coordinate has standard error 0.1
            assert!((dist - expected).abs() < 0.6, "classes {a},{b}: {dist}");
        }
    }
}

#[test]
fn sbm_is_deterministic_in_seed() {
    let p = SbmParams { seed: 11, ..SbmParams::default() };
    let a = generate_sbm(&p).unwrap();
    let b = generate_sbm(&p).unwrap();
    assert_eq!(a.graph, b.graph);
    assert_eq!(a.features, b.features);
}

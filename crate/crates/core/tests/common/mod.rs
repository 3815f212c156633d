#![allow(dead_code)]

use mgcn::encoder::{B1, B2, GAMMA, W1, W2};
use mgcn::graphdata::Graph;
use mgcn::ndiff::Matrix;
use mgcn::ndiff::ParamStore;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(name, node count, undirected edges)`.
pub type NamedGraph = (&'static str, usize, Vec<(usize, usize)>);

/// Small named graphs, all with at most 16 nodes.
pub fn small_graph_corpus() -> Vec<NamedGraph> {
    let mut corpus = vec![
        ("single node", 1, vec![]),
        ("single edge", 2, vec![(0, 1)]),
        ("path 3", 3, vec![(0, 1), (1, 2)]),
        ("triangle", 3, vec![(0, 1), (1, 2), (2, 0)]),
        ("star 6", 6, (1..6).map(|i| (0, i)).collect()),
        ("cycle 8", 8, (0..8).map(|i| (i, (i + 1) % 8)).collect()),
        ("isolated pair plus edge", 4, vec![(1, 2)]),
    ];
    let mut cliques = Vec::new();
    for block in [0usize, 5] {
        for i in 0..5 {
            for j in i + 1..5 {
                cliques.push((block + i, block + j));
            }
        }
    }
    corpus.push(("two 5-cliques", 10, cliques));
    let mut grid = Vec::new();
    for r in 0..4 {
        for c in 0..4 {
            let v = r * 4 + c;
            if c < 3 {
                grid.push((v, v + 1));
            }
            if r < 3 {
                grid.push((v, v + 4));
            }
        }
    }
    corpus.push(("grid 4x4", 16, grid));
    for (name, n, p, seed) in [("gnp 12", 12, 0.3, 1u64), ("gnp 16 sparse", 16, 0.12, 2), ("gnp 16 dense", 16, 0.6, 3)]
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        corpus.push((name, n, edges));
    }
    corpus
}

/// `D^{-1/2} (A + I) D^{-1/2}` computed densely from an edge list.
pub fn dense_normalized(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for &(u, v) in edges {
        if u != v {
            a[u][v] = 1.0;
            a[v][u] = 1.0;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    (0..n).map(|i| (0..n).map(|j| a[i][j] / (deg[i] * deg[j]).sqrt()).collect()).collect()
}

pub fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn naive_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|ar| {
            assert_eq!(ar.len(), inner);
            (0..cols).map(|j| (0..inner).map(|k| ar[k] * b[k][j]).sum()).collect()
        })
        .collect()
}

pub fn add_bias(m: &mut [Vec<f64>], bias: &[f64]) {
    for row in m {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

pub fn relu_all(m: &mut [Vec<f64>]) {
    for v in m.iter_mut().flatten() {
        *v = v.max(0.0);
    }
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &Matrix) -> f64 {
    assert_eq!((a.len(), a.first().map_or(0, |r| r.len())), b.shape());
    a.iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, v)| (v - b.get(i, j)).abs()))
        .fold(0.0, f64::max)
}

pub fn random_features(seed: u64, n: usize, d: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

pub fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    Graph::from_edges(n, edges).unwrap()
}

pub fn dense(p: &ParamStore, name: &str) -> Vec<Vec<f64>> {
    rows_of(p.value(name).unwrap())
}

pub fn dense_mlp(x: &Matrix, p: &ParamStore) -> Vec<Vec<f64>> {
    let mut z = naive_matmul(&rows_of(x), &dense(p, W1));
    add_bias(&mut z, p.value(B1).unwrap().row(0));
    relu_all(&mut z);
    let mut m = naive_matmul(&z, &dense(p, W2));
    add_bias(&mut m, p.value(B2).unwrap().row(0));
    m
}

pub fn dense_gpr(a: &[Vec<f64>], x: &Matrix, p: &ParamStore) -> Vec<Vec<f64>> {
    let m = dense_mlp(x, p);
    let gamma = p.value(GAMMA).unwrap().row(0).to_vec();
    let mut power = m.clone();
    let mut h: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| gamma[0] * v).collect()).collect();
    for g in &gamma[1..] {
        power = naive_matmul(a, &power);
        for (hr, pr) in h.iter_mut().zip(&power) {
            for (hv, pv) in hr.iter_mut().zip(pr) {
                *hv += g * pv;
            }
        }
    }
    h
}

pub fn dense_gcn2(a: &[Vec<f64>], x: &Matrix, p: &ParamStore) -> Vec<Vec<f64>> {
    let mut z = naive_matmul(a, &naive_matmul(&rows_of(x), &dense(p, W1)));
    add_bias(&mut z, p.value(B1).unwrap().row(0));
    relu_all(&mut z);
    let mut h = naive_matmul(a, &naive_matmul(&z, &dense(p, W2)));
    add_bias(&mut h, p.value(B2).unwrap().row(0));
    h
}

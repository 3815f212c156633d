//! Graph datasets: loading, validation, normalization, splits and synthetic
//! stochastic-block-model generation.
//!
//! On-disk layout of a dataset directory:
//!
//! * `edges.txt`: one edge per line, two whitespace-separated node ids.
//! * `features.csv`: `N` rows of `D` comma-separated reals, no header.
//! * `labels.txt`: one class id per line, `N` lines.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::ndiff::Matrix;

pub const EDGES_FILE: &str = "edges.txt";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.txt";

/// Default sparse split: 2.5% train, 2.5% validation, the rest test.
pub const SPARSE_SPLIT: (f64, f64) = (0.025, 0.025);

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing dataset file {0}")]
    MissingFile(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error("node count mismatch: {0}")]
    CountMismatch(String),
    #[error("label {label} of node {node} is not below the class count {num_classes}")]
    LabelOutOfRange { node: usize, label: usize, num_classes: usize },
    #[error("class {0} has no nodes")]
    EmptyClass(usize),
    #[error("invalid split fractions ({0}, {1}): both must be positive with sum < 1")]
    BadFractions(f64, f64),
    #[error("class {class} ({size} nodes) is too small for a train allocation")]
    ClassTooSmall { class: usize, size: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid generator parameters: {0}")]
    InvalidGenerator(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

/// Undirected, unweighted graph in CSR layout without self loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list. Edges are symmetrized and
    /// deduplicated; self loops are dropped.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self, DataError> {
        let mut neighbours: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_nodes];
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(DataError::CountMismatch(format!(
                    "edge ({u}, {v}) references a node outside [0, {num_nodes})"
                )));
            }
            if u == v {
                continue;
            }
            neighbours[u].insert(v);
            neighbours[v].insert(u);
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in &neighbours {
            col_indices.extend(row.iter().copied());
            row_offsets.push(col_indices.len());
        }
        Ok(Self { num_nodes, row_offsets, col_indices })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn neighbours(&self, node: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[node]..self.row_offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.row_offsets[node + 1] - self.row_offsets[node]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbours(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in row order.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        (0..self.num_nodes)
            .flat_map(|u| self.neighbours(u).iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .collect()
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, DataError> {
        if perm.len() != self.num_nodes {
            return Err(DataError::CountMismatch("permutation length".into()));
        }
        let edges: Vec<_> = self.undirected_edges().into_iter().map(|(u, v)| (perm[u], perm[v])).collect();
        Self::from_edges(self.num_nodes, &edges)
    }
}

/// Symmetrically normalized adjacency `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃`
/// holds the degrees of `A + I`. Stored in CSR with the diagonal included.
#[derive(Clone, Debug, PartialEq)]
pub struct NormAdj {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl NormAdj {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    /// Stored value at `(i, j)`, zero when the entry is structurally absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.num_nodes, self.num_nodes);
        for i in 0..self.num_nodes {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m.set(i, j, v);
            }
        }
        m
    }
}

pub fn normalize_adjacency(g: &Graph) -> NormAdj {
    let n = g.num_nodes();
    let deg: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(g.col_indices.len() + n);
    let mut values = Vec::with_capacity(g.col_indices.len() + n);
    row_offsets.push(0);
    for i in 0..n {
        let nb = g.neighbours(i);
        let split = nb.partition_point(|&j| j < i);
        let cols = nb[..split].iter().copied().chain(std::iter::once(i)).chain(nb[split..].iter().copied());
        for j in cols {
            col_indices.push(j);
            // product first so that (i, j) and (j, i) round identically
            values.push(1.0 / (deg[i] * deg[j]).sqrt());
        }
        row_offsets.push(col_indices.len());
    }
    NormAdj { num_nodes: n, row_offsets, col_indices, values }
}

/// Disjoint train / validation / test node sets, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMasks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitMasks {
    pub fn num_nodes(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    /// `true` for nodes in the train set, indexed by node id.
    pub fn train_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_nodes()];
        for &i in &self.train {
            mask[i] = true;
        }
        mask
    }
}

/// Stratified split: within every class, `max(1, round(fraction * size))`
/// nodes go to train, then the same rule (bounded by what is left) to val,
/// the remainder to test.
pub fn make_splits(labels: &[usize], fractions: (f64, f64), seed: u64) -> Result<SplitMasks, DataError> {
    let (ft, fv) = fractions;
    if !(ft > 0.0 && fv > 0.0 && ft + fv < 1.0) {
        return Err(DataError::BadFractions(ft, fv));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (node, &c) in labels.iter().enumerate() {
        by_class[c].push(node);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (class, mut nodes) in by_class.into_iter().enumerate() {
        let size = nodes.len();
        let n_train = (ft * size as f64).round().max(1.0) as usize;
        if size == 0 || n_train > size {
            return Err(DataError::ClassTooSmall { class, size });
        }
        let n_val = ((fv * size as f64).round().max(1.0) as usize).min(size - n_train);
        nodes.shuffle(&mut rng);
        train.extend_from_slice(&nodes[..n_train]);
        val.extend_from_slice(&nodes[n_train..n_train + n_val]);
        test.extend_from_slice(&nodes[n_train + n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitMasks { train, val, test })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub splits: SplitMasks,
}

impl Dataset {
    /// Validates the invariants and assembles a dataset.
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        splits: SplitMasks,
    ) -> Result<Self, DataError> {
        let n = graph.num_nodes();
        if features.rows() != n {
            return Err(DataError::CountMismatch(format!("{} feature rows for {n} nodes", features.rows())));
        }
        if labels.len() != n {
            return Err(DataError::CountMismatch(format!("{} labels for {n} nodes", labels.len())));
        }
        let mut seen = vec![false; num_classes];
        for (node, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(DataError::LabelOutOfRange { node, label, num_classes });
            }
            seen[label] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(DataError::EmptyClass(c));
        }
        check_splits(&splits, &labels, num_classes)?;
        Ok(Self { name: name.into(), graph, features, labels, num_classes, splits })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Same dataset with different splits.
    pub fn with_splits(&self, splits: SplitMasks) -> Result<Self, DataError> {
        check_splits(&splits, &self.labels, self.num_classes)?;
        Ok(Self { splits, ..self.clone() })
    }

    /// One-hot label matrix for the given nodes, in order.
    pub fn one_hot(&self, nodes: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(nodes.len(), self.num_classes);
        for (r, &i) in nodes.iter().enumerate() {
            m.set(r, self.labels[i], 1.0);
        }
        m
    }

    /// Writes the three text files into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), DataError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut edges = String::new();
        for (u, v) in self.graph.undirected_edges() {
            writeln!(edges, "{u} {v}").unwrap();
        }
        let mut feats = String::new();
        for i in 0..self.features.rows() {
            let row: Vec<String> = self.features.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(feats, "{}", row.join(",")).unwrap();
        }
        let mut labels = String::new();
        for l in &self.labels {
            writeln!(labels, "{l}").unwrap();
        }
        for (file, body) in [(EDGES_FILE, edges), (FEATURES_FILE, feats), (LABELS_FILE, labels)] {
            let path = dir.join(file);
            fs::write(&path, body).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

fn check_splits(splits: &SplitMasks, labels: &[usize], num_classes: usize) -> Result<(), DataError> {
    let n = labels.len();
    let mut owner = vec![0u8; n];
    for (set, tag) in [(&splits.train, 1u8), (&splits.val, 2), (&splits.test, 3)] {
        for &i in set {
            if i >= n || owner[i] != 0 {
                return Err(DataError::InvalidGraph(format!("split masks are not a partition at node {i}")));
            }
            owner[i] = tag;
        }
    }
    if owner.contains(&0) {
        return Err(DataError::InvalidGraph("split masks do not cover every node".into()));
    }
    let mut in_train = vec![false; num_classes];
    for &i in &splits.train {
        in_train[labels[i]] = true;
    }
    if let Some(c) = in_train.iter().position(|s| !s) {
        return Err(DataError::InvalidGraph(format!("class {c} has no train node")));
    }
    Ok(())
}

fn read_required(path: &Path) -> Result<String, DataError> {
    if !path.is_file() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(io_err(path))
}

fn parse_usize(tok: &str, file: &str, line: usize) -> Result<usize, DataError> {
    tok.parse().map_err(|_| DataError::Parse {
        file: file.into(),
        line,
        msg: format!("expected a non-negative integer, found {tok:?}"),
    })
}

/// Loads a dataset directory, taking the class count from the labels.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset, DataError> {
    load_dataset_with(dir, None)
}

/// Loads a dataset directory. When `num_classes` is given every label must
/// be below it; otherwise it is one more than the largest label.
pub fn load_dataset_with(dir: impl AsRef<Path>, num_classes: Option<usize>) -> Result<Dataset, DataError> {
    let dir = dir.as_ref();
    let edges_txt = read_required(&dir.join(EDGES_FILE))?;
    let feats_txt = read_required(&dir.join(FEATURES_FILE))?;
    let labels_txt = read_required(&dir.join(LABELS_FILE))?;

    let mut edges = Vec::new();
    for (ln, line) in edges_txt.lines().enumerate() {
        let mut toks = line.split_whitespace();
        match (toks.next(), toks.next(), toks.next()) {
            (None, ..) => continue,
            (Some(a), Some(b), None) => {
                edges.push((parse_usize(a, EDGES_FILE, ln + 1)?, parse_usize(b, EDGES_FILE, ln + 1)?))
            }
            _ => {
                return Err(DataError::Parse {
                    file: EDGES_FILE.into(),
                    line: ln + 1,
                    msg: "expected two node ids".into(),
                })
            }
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in feats_txt.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| DataError::Parse {
                    file: FEATURES_FILE.into(),
                    line: ln + 1,
                    msg: format!("non-numeric feature entry {tok:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(DataError::Parse {
                    file: FEATURES_FILE.into(),
                    line: ln + 1,
                    msg: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }

    let labels = labels_txt
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(ln, l)| parse_usize(l.trim(), LABELS_FILE, ln + 1))
        .collect::<Result<Vec<_>, _>>()?;

    let n = rows.len();
    if labels.len() != n {
        return Err(DataError::CountMismatch(format!("{n} feature rows but {} labels", labels.len())));
    }
    if let Some(max_id) = edges.iter().map(|&(u, v)| u.max(v)).max() {
        if max_id >= n {
            return Err(DataError::CountMismatch(format!(
                "edges reference node {max_id} but only {n} feature rows exist"
            )));
        }
    }
    let num_classes = match num_classes {
        Some(c) => c,
        None => labels.iter().max().map_or(0, |&m| m + 1),
    };
    if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
        return Err(DataError::LabelOutOfRange { node, label, num_classes });
    }
    let graph = Graph::from_edges(n, &edges)?;
    let features = Matrix::from_rows(&rows).map_err(|e| DataError::InvalidGraph(e.to_string()))?;
    let splits = make_splits(&labels, SPARSE_SPLIT, 0)?;
    let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(name, graph, features, labels, num_classes, splits)
}

/// Converts a citation corpus in the LINQS layout (`<id> <0/1 words...>
/// <class name>` content lines plus `<cited> <citing>` link lines) into a
/// dataset. Class ids follow the sorted class names; node ids follow the
/// order of the content file. Links to unknown papers are skipped.
pub fn import_linqs(content: impl AsRef<Path>, cites: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let content_path = content.as_ref();
    let content_txt = read_required(content_path)?;
    let cites_txt = read_required(cites.as_ref())?;
    let file = content_path.display().to_string();

    let mut ids = std::collections::HashMap::new();
    let mut rows = Vec::new();
    let mut class_names = Vec::new();
    for (ln, line) in content_txt.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() < 3 {
            return Err(DataError::Parse { file: file.clone(), line: ln + 1, msg: "short content line".into() });
        }
        let row = toks[1..toks.len() - 1]
            .iter()
            .map(|t| {
                t.parse::<f64>().map_err(|_| DataError::Parse {
                    file: file.clone(),
                    line: ln + 1,
                    msg: format!("non-numeric feature entry {t:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        ids.insert(toks[0].to_string(), rows.len());
        rows.push(row);
        class_names.push(toks[toks.len() - 1].to_string());
    }
    let classes: BTreeSet<&str> = class_names.iter().map(String::as_str).collect();
    let classes: Vec<&str> = classes.into_iter().collect();
    let labels: Vec<usize> = class_names.iter().map(|c| classes.binary_search(&c.as_str()).unwrap()).collect();

    let edges: Vec<(usize, usize)> = cites_txt
        .lines()
        .filter_map(|line| {
            let mut t = line.split_whitespace();
            Some((*ids.get(t.next()?)?, *ids.get(t.next()?)?))
        })
        .collect();
    let n = rows.len();
    let graph = Graph::from_edges(n, &edges)?;
    let features = Matrix::from_rows(&rows).map_err(|e| DataError::InvalidGraph(e.to_string()))?;
    let splits = make_splits(&labels, SPARSE_SPLIT, 0)?;
    let name = content_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(name, graph, features, labels, classes.len(), splits)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SbmParams {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_shift: f64,
    pub seed: u64,
}

impl Default for SbmParams {
    fn default() -> Self {
        Self { block_sizes: vec![100, 100, 100], p_in: 0.1, p_out: 0.01, feature_dim: 16, feature_shift: 2.0, seed: 0 }
    }
}

/// Stochastic block model with Gaussian node features. Block `c` gets the
/// feature mean `feature_shift * e_{c mod feature_dim}` and unit variance.
pub fn generate_sbm(p: &SbmParams) -> Result<Dataset, DataError> {
    if p.block_sizes.is_empty() || p.block_sizes.contains(&0) {
        return Err(DataError::InvalidGenerator("every block needs at least one node".into()));
    }
    if !(0.0 <= p.p_out && p.p_out < p.p_in && p.p_in <= 1.0) {
        return Err(DataError::InvalidGenerator(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
            p.p_in, p.p_out
        )));
    }
    if p.feature_dim == 0 {
        return Err(DataError::InvalidGenerator("feature_dim must be positive".into()));
    }
    let labels: Vec<usize> = p.block_sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let prob = if labels[u] == labels[v] { p.p_in } else { p.p_out };
            if rng.random::<f64>() < prob {
                edges.push((u, v));
            }
        }
    }
    let mut features = Matrix::zeros(n, p.feature_dim);
    for (i, &c) in labels.iter().enumerate() {
        for (j, x) in features.row_mut(i).iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *x = z + if j == c % p.feature_dim { p.feature_shift } else { 0.0 };
        }
    }
    let graph = Graph::from_edges(n, &edges)?;
    let num_classes = p.block_sizes.len();
    let splits = make_splits(&labels, SPARSE_SPLIT, p.seed)?;
    Dataset::new("sbm", graph, features, labels, num_classes, splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn dedup_and_symmetrize() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 0), (0, 1), (2, 2)]).unwrap();
        assert_eq!(g.neighbours(0), &[1]);
        assert_eq!(g.neighbours(1), &[0]);
        assert!(g.neighbours(2).is_empty());
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn normalized_single_edge() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let a = normalize_adjacency(&g).to_dense();
        for v in a.data() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn normalized_isolated_node() {
        let g = Graph::from_edges(1, &[]).unwrap();
        assert_eq!(normalize_adjacency(&g).to_dense().data(), &[1.0]);
    }

    #[test]
    fn normalized_path() {
        let a = normalize_adjacency(&path3());
        assert!((a.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.get(0, 2), 0.0);
    }

    #[test]
    fn splits_balanced_hundred() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let s = make_splits(&labels, (0.025, 0.025), 7).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (2, 2, 96));
        assert_eq!(s, make_splits(&labels, (0.025, 0.025), 7).unwrap());
    }

    #[test]
    fn splits_reject_bad_fractions_and_missing_class() {
        assert!(matches!(make_splits(&[0, 1], (0.6, 0.5), 0), Err(DataError::BadFractions(..))));
        let err = make_splits(&[0, 2, 2], (0.1, 0.1), 0).unwrap_err();
        assert!(err.to_string().contains("class 1"), "{err}");
    }

    #[test]
    fn sbm_extremes() {
        let d =
            generate_sbm(&SbmParams { block_sizes: vec![5, 5], p_in: 1.0, p_out: 0.0, ..Default::default() }).unwrap();
        assert_eq!(d.labels, [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        for u in 0..10 {
            for v in 0..10 {
                assert_eq!(d.graph.has_edge(u, v), u != v && d.labels[u] == d.labels[v]);
            }
        }
    }

    #[test]
    fn sbm_rejects_empty_block_and_bad_probabilities() {
        let base = SbmParams::default();
        assert!(generate_sbm(&SbmParams { block_sizes: vec![3, 0], ..base.clone() }).is_err());
        assert!(generate_sbm(&SbmParams { p_in: 0.1, p_out: 0.2, ..base }).is_err());
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(DataError::MissingFile(_))));
        fs::write(dir.path().join(EDGES_FILE), "0 1\n").unwrap();
        fs::write(dir.path().join(FEATURES_FILE), "1,0\n0,x\n").unwrap();
        fs::write(dir.path().join(LABELS_FILE), "0\n1\n").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(DataError::Parse { .. })));
        fs::write(dir.path().join(FEATURES_FILE), "1,0\n").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(DataError::CountMismatch(_))));
        fs::write(dir.path().join(FEATURES_FILE), "1,0\n0,1\n").unwrap();
        fs::write(dir.path().join(LABELS_FILE), "0\n3\n").unwrap();
        assert!(matches!(load_dataset_with(dir.path(), Some(2)), Err(DataError::LabelOutOfRange { .. })));
    }
}

//! Training loop, evaluation, model selection, multi-seed aggregation,
//! ablations and exports.

use std::fmt;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corered::{self, CorrelationBatch, Eq7Form};
use crate::encoder::{self, EncoderConfig};
use crate::graphdata::{self, DataError, Dataset, NormAdj, SbmParams, SplitMasks};
use crate::mixview::{self, BlockPermutation, MixError};
use crate::ndiff::{
    adam_step, finite_diff_check_scaled, AdamState, Checkpoint, GradCheckReport, Input, InputMatrix, Matrix,
    ParamStore, Tape, TensorError, Var,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error("non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("accuracy requested over an empty node set")]
    EmptyMask,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TrainError + '_ {
    move |source| TrainError::Io { path: path.to_path_buf(), source }
}

/// Model variants of the ablation study.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Ablation {
    /// Plain supervised backbone.
    B,
    /// Mixed views for classification, no correlation term.
    BI,
    /// Unmixed classification path, correlation term on mixed views.
    BC,
    #[default]
    Full,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::B, Ablation::BI, Ablation::BC, Ablation::Full];

    pub fn label(self) -> &'static str {
        match self {
            Ablation::B => "B",
            Ablation::BI => "B+I",
            Ablation::BC => "B+C",
            Ablation::Full => "Ours",
        }
    }

    fn classify_lambda(self, lambda: f64) -> f64 {
        match self {
            Ablation::B | Ablation::BC => 1.0,
            Ablation::BI | Ablation::Full => lambda,
        }
    }

    fn view_lambda(self, lambda: f64) -> f64 {
        match self {
            Ablation::B => 1.0,
            _ => lambda,
        }
    }

    fn alpha(self, alpha: f64) -> f64 {
        match self {
            Ablation::B | Ablation::BI => 0.0,
            Ablation::BC | Ablation::Full => alpha,
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "b" => Ok(Ablation::B),
            "b+i" => Ok(Ablation::BI),
            "b+c" => Ok(Ablation::BC),
            "full" | "ours" => Ok(Ablation::Full),
            _ => Err(format!("unknown ablation {s:?} (expected B, B+I, B+C or full)")),
        }
    }
}

impl TryFrom<String> for Ablation {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Ablation> for String {
    fn from(a: Ablation) -> Self {
        a.label().to_string()
    }
}

/// Per-dataset Adam learning rates; unknown names get `2e-2`.
pub fn default_learning_rate(dataset: &str) -> f64 {
    match dataset.to_ascii_lowercase().as_str() {
        "citeseer" => 1e-3,
        "dblp" => 5e-2,
        "cora" | "amac" => 2e-2,
        "acm" | "amap" => 1e-2,
        _ => 2e-2,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub lr: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub encoder: EncoderConfig,
    pub seed: u64,
    pub runs: usize,
    pub correlation_batch: CorrelationBatch,
    pub ablation: Ablation,
    pub eq7_form: Eq7Form,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.9,
            alpha: 0.5,
            lr: 2e-2,
            epochs: 1000,
            weight_decay: 5e-4,
            encoder: EncoderConfig::default(),
            seed: 0,
            runs: 10,
            correlation_batch: CorrelationBatch::All,
            ablation: Ablation::Full,
            eq7_form: Eq7Form::Decomposed,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be a finite value >= 0, got {}", self.alpha));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.correlation_batch == CorrelationBatch::Size(0) {
            return bad("correlation_batch must be at least 1".into());
        }
        self.encoder.validate().map_err(TrainError::Config)
    }

    fn validate_for(&self, ds: &Dataset) -> Result<(), TrainError> {
        self.validate()?;
        if let CorrelationBatch::Size(b) = self.correlation_batch {
            if b > ds.num_nodes() {
                return Err(TrainError::Config(format!(
                    "correlation_batch {b} exceeds the node count {}",
                    ds.num_nodes()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochMetrics {
    pub run: usize,
    pub epoch: usize,
    pub loss_c: f64,
    pub loss_r: f64,
    pub loss: f64,
    pub acc_train: f64,
    pub acc_val: f64,
    pub acc_test: f64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    /// Epoch (1-based) with the highest validation accuracy, earliest on ties.
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Test accuracy at `best_epoch`.
    pub test_acc: f64,
    pub history: Vec<EpochMetrics>,
    /// Parameters after the last epoch.
    pub params: ParamStore,
}

impl RunResult {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_params(&self.params)
    }
}

#[derive(Clone, Debug)]
pub struct MultiResult {
    pub runs: Vec<RunResult>,
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Tape handles of the three loss values of one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub l_c: Var,
    pub l_r: Option<Var>,
    pub loss: Var,
}

/// Randomness consumed by one epoch besides dropout.
#[derive(Clone, Debug)]
pub struct EpochDraw {
    pub pi1: BlockPermutation,
    pub pi2: BlockPermutation,
    pub batch: Vec<usize>,
}

impl EpochDraw {
    pub fn sample(splits: &SplitMasks, batch: CorrelationBatch, rng: &mut ChaCha8Rng) -> Result<Self, TrainError> {
        let pi1 = mixview::sample_block_permutation(splits, rng);
        let pi2 = mixview::sample_block_permutation(splits, rng);
        let batch = corered::correlation_batch(splits.num_nodes(), batch, rng).map_err(TrainError::Config)?;
        Ok(Self { pi1, pi2, batch })
    }
}

/// Joint objective `L = L_C + α·L_R` of one forward pass. `y2` holds the
/// view-2 mixed train labels for the classification rate of the variant.
#[allow(clippy::too_many_arguments)]
pub fn joint_loss<'a>(
    tape: &mut Tape<'a>,
    ds: &Dataset,
    features: Input<'a>,
    adj: &'a NormAdj,
    params: &ParamStore,
    cfg: &TrainConfig,
    draw: &EpochDraw,
    y2: &Matrix,
    rng: &mut ChaCha8Rng,
    train: bool,
) -> Result<LossTerms, TensorError> {
    let h = encoder::encode(tape, features, adj, params, &cfg.encoder, rng, train)?;

    let lam_c = cfg.ablation.classify_lambda(cfg.lambda);
    let h2c = tape.mix_rows(h, draw.pi2.as_slice(), lam_c)?;
    let h2_train = tape.gather_rows(h2c, &ds.splits.train)?;
    let y_hat = encoder::classify(tape, h2_train, params)?;
    let l_c = tape.cross_entropy(y_hat, y2)?;

    let alpha = cfg.ablation.alpha(cfg.alpha);
    if alpha == 0.0 {
        return Ok(LossTerms { l_c, l_r: None, loss: l_c });
    }
    let lam_v = cfg.ablation.view_lambda(cfg.lambda);
    let h1 = tape.mix_rows(h, draw.pi1.as_slice(), lam_v)?;
    let h2 = if lam_v == lam_c { h2c } else { tape.mix_rows(h, draw.pi2.as_slice(), lam_v)? };
    let (h1, h2) = if draw.batch.len() == ds.num_nodes() {
        (h1, h2)
    } else {
        (tape.gather_rows(h1, &draw.batch)?, tape.gather_rows(h2, &draw.batch)?)
    };
    let l_r = corered::fused_correlation_loss(tape, h1, h2, cfg.eq7_form)?;
    let weighted = tape.scale(l_r, alpha);
    let loss = tape.add(l_c, weighted)?;
    Ok(LossTerms { l_c, l_r: Some(l_r), loss })
}

fn predictions(
    features: Input<'_>,
    adj: &NormAdj,
    params: &ParamStore,
    cfg: &EncoderConfig,
) -> Result<Vec<usize>, TensorError> {
    let h = encoder::embed_input(features, adj, params, cfg)?;
    Ok(encoder::predict_from_embeddings(&h, params)?.argmax_rows())
}

fn accuracy_of(pred: &[usize], labels: &[usize], mask: &[usize]) -> Result<f64, TrainError> {
    if mask.is_empty() {
        return Err(TrainError::EmptyMask);
    }
    let hits = mask.iter().filter(|&&i| pred[i] == labels[i]).count();
    Ok(hits as f64 / mask.len() as f64)
}

/// Eval-mode accuracy over `mask`.
pub fn evaluate(params: &ParamStore, ds: &Dataset, cfg: &EncoderConfig, mask: &[usize]) -> Result<f64, TrainError> {
    if mask.is_empty() {
        return Err(TrainError::EmptyMask);
    }
    let adj = graphdata::normalize_adjacency(&ds.graph);
    accuracy_of(&predictions(Input::Dense(&ds.features), &adj, params, cfg)?, &ds.labels, mask)
}

fn split_accuracy(pred: &[usize], ds: &Dataset, mask: &[usize]) -> f64 {
    accuracy_of(pred, &ds.labels, mask).unwrap_or(f64::NAN)
}

/// Generator for the per-epoch draws of a run; independent of the stream
/// used for parameter initialization.
fn run_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// One training run with seed `cfg.seed + run`.
pub fn train(ds: &Dataset, cfg: &TrainConfig, run: usize) -> Result<RunResult, TrainError> {
    cfg.validate_for(ds)?;
    let seed = cfg.seed.wrapping_add(run as u64);
    let adj = graphdata::normalize_adjacency(&ds.graph);
    let features = InputMatrix::auto(&ds.features);
    let mut params = encoder::init_for(&cfg.encoder, ds.feature_dim(), ds.num_classes, seed);
    let mut adam = AdamState::new(&params);
    let mut rng = run_rng(seed);
    let y_train = ds.one_hot(&ds.splits.train);
    let lam_c = cfg.ablation.classify_lambda(cfg.lambda);

    let mut history = Vec::with_capacity(cfg.epochs);
    let (mut best_epoch, mut best_val, mut best_test) = (0, f64::NEG_INFINITY, f64::NAN);
    for epoch in 1..=cfg.epochs {
        let draw = EpochDraw::sample(&ds.splits, cfg.correlation_batch, &mut rng)?;
        let y2 = mixview::mix_labels(&y_train, &draw.pi2, lam_c, &ds.splits)?;
        let mut tape = Tape::new();
        let terms = joint_loss(&mut tape, ds, features.as_input(), &adj, &params, cfg, &draw, &y2, &mut rng, true)?;
        let loss = tape.scalar(terms.loss);
        if !loss.is_finite() {
            return Err(TrainError::NonFinite { epoch });
        }
        let loss_c = tape.scalar(terms.l_c);
        let loss_r = terms.l_r.map_or(0.0, |v| tape.scalar(v));
        tape.backward(terms.loss)?;
        params.accumulate_grads(&tape);
        drop(tape);
        adam_step(&mut params, &mut adam, cfg.lr, cfg.weight_decay);

        let pred = predictions(features.as_input(), &adj, &params, &cfg.encoder)?;
        let m = EpochMetrics {
            run,
            epoch,
            loss_c,
            loss_r,
            loss,
            acc_train: split_accuracy(&pred, ds, &ds.splits.train),
            acc_val: split_accuracy(&pred, ds, &ds.splits.val),
            acc_test: split_accuracy(&pred, ds, &ds.splits.test),
        };
        if m.acc_val > best_val {
            (best_epoch, best_val, best_test) = (epoch, m.acc_val, m.acc_test);
        }
        history.push(m);
    }
    // NaN validation accuracy (no validation nodes) never wins, fall back to the last epoch
    if best_epoch == 0 {
        let last = history.last().expect("epochs >= 1");
        (best_epoch, best_val, best_test) = (last.epoch, last.acc_val, last.acc_test);
    }
    Ok(RunResult { run, seed, best_epoch, best_val_acc: best_val, test_acc: best_test, history, params })
}

/// `cfg.runs` independent runs on worker threads, aggregated in run order.
pub fn run_multi(ds: &Dataset, cfg: &TrainConfig) -> Result<MultiResult, TrainError> {
    cfg.validate_for(ds)?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cfg.runs);
    let mut results: Vec<Option<Result<RunResult, TrainError>>> = (0..cfg.runs).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || (w..cfg.runs).step_by(workers).map(|r| (r, train(ds, cfg, r))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (r, res) in h.join().expect("training thread panicked") {
                results[r] = Some(res);
            }
        }
    });
    let runs = results.into_iter().map(|r| r.expect("every run scheduled")).collect::<Result<Vec<_>, _>>()?;
    let accs: Vec<f64> = runs.iter().map(|r| r.test_acc).collect();
    let (mean, std) = mean_std(&accs);
    Ok(MultiResult { runs, mean, std })
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub variant: Ablation,
    pub result: MultiResult,
}

/// All four variants with the seeds of `cfg`.
pub fn run_ablation(ds: &Dataset, cfg: &TrainConfig) -> Result<Vec<AblationRow>, TrainError> {
    Ablation::ALL
        .iter()
        .map(|&variant| {
            let cfg = TrainConfig { ablation: variant, ..cfg.clone() };
            Ok(AblationRow { variant, result: run_multi(ds, &cfg)? })
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("variant,mean,std,runs\n");
    for row in rows {
        out += &format!("{},{},{},{}\n", row.variant.label(), row.result.mean, row.result.std, row.result.runs.len());
    }
    out
}

/// Newline-delimited JSON, one object per epoch per run.
pub fn metrics_jsonl<'r>(runs: impl IntoIterator<Item = &'r RunResult>) -> String {
    let mut out = String::new();
    for r in runs {
        for m in &r.history {
            out += &serde_json::to_string(m).expect("metrics serialize");
            out.push('\n');
        }
    }
    out
}

/// Pairwise cosine similarity of the rows of `h`.
pub fn similarity_matrix(h: &Matrix) -> Result<Matrix, TensorError> {
    let mut tape = Tape::new();
    let a = tape.constant(h.clone());
    let n = tape.row_l2_normalize(a);
    let z = tape.matmul_nt(n, n)?;
    Ok(tape.value(z).clone())
}

/// Node ids sorted by label, ties by id.
pub fn label_order(labels: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by_key(|&i| labels[i]);
    order
}

fn write_file(path: &Path, text: &str) -> Result<(), TrainError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

fn csv_row(values: impl IntoIterator<Item = String>) -> String {
    let mut line = values.into_iter().collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

/// Path of the node-order file written next to a similarity export.
pub fn similarity_order_path(path: &Path) -> PathBuf {
    path.with_extension("order.csv")
}

/// Writes the label-sorted similarity matrix of the eval-mode embeddings and
/// its `node,label` order file. Returns the order file path.
pub fn export_similarity(
    params: &ParamStore,
    ds: &Dataset,
    cfg: &EncoderConfig,
    path: impl AsRef<Path>,
) -> Result<PathBuf, TrainError> {
    let path = path.as_ref();
    let adj = graphdata::normalize_adjacency(&ds.graph);
    let h = encoder::embed(&ds.features, &adj, params, cfg)?;
    let z = similarity_matrix(&h)?;
    let order = label_order(&ds.labels);
    let mut text = String::new();
    for &i in &order {
        text += &csv_row(order.iter().map(|&j| z.get(i, j).to_string()));
    }
    write_file(path, &text)?;
    let side = similarity_order_path(path);
    let mut listing = String::from("node,label\n");
    for &i in &order {
        listing += &format!("{i},{}\n", ds.labels[i]);
    }
    write_file(&side, &listing)?;
    Ok(side)
}

/// Writes eval-mode embeddings, one node per row in id order, with the label
/// as the last column.
pub fn export_embeddings(
    params: &ParamStore,
    ds: &Dataset,
    cfg: &EncoderConfig,
    path: impl AsRef<Path>,
) -> Result<(), TrainError> {
    let adj = graphdata::normalize_adjacency(&ds.graph);
    let h = encoder::embed(&ds.features, &adj, params, cfg)?;
    let mut text = String::new();
    for i in 0..h.rows() {
        text += &csv_row(h.row(i).iter().map(|v| v.to_string()).chain([ds.labels[i].to_string()]));
    }
    write_file(path.as_ref(), &text)
}

/// Reads an embedding export back into `(H, labels)`.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<(Matrix, Vec<usize>), TrainError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad =
        |line: usize, msg: String| TrainError::Data(DataError::Parse { file: path.display().to_string(), line, msg });
    let (mut data, mut labels, mut cols) = (Vec::new(), Vec::new(), None);
    for (ln, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 || cols.is_some_and(|c| c != fields.len()) {
            return Err(bad(ln + 1, "inconsistent column count".into()));
        }
        cols = Some(fields.len());
        let (label, values) = fields.split_last().expect("non-empty");
        for v in values {
            data.push(v.parse::<f64>().map_err(|e| bad(ln + 1, e.to_string()))?);
        }
        labels.push(label.parse::<usize>().map_err(|e| bad(ln + 1, e.to_string()))?);
    }
    let d = cols.map_or(0, |c| c - 1);
    Ok((Matrix::from_vec(labels.len(), d, data)?, labels))
}

/// Gradient check of the full joint loss on a 12-node three-block graph
/// (5 features, 8 hidden units, 3 propagation steps, dropout off, fixed
/// permutations). `analytic_scale != 1` deliberately corrupts the analytic
/// gradient.
pub fn gradcheck_full_model(seed: u64, eps: f64, analytic_scale: f64) -> Result<GradCheckReport, TrainError> {
    let ds = graphdata::generate_sbm(&SbmParams {
        block_sizes: vec![4, 4, 4],
        p_in: 0.6,
        p_out: 0.15,
        feature_dim: 5,
        feature_shift: 1.0,
        seed,
    })?;
    let cfg = TrainConfig {
        encoder: EncoderConfig { hidden_dim: 8, k: 3, dropout: 0.0, ..EncoderConfig::default() },
        seed,
        ..TrainConfig::default()
    };
    let adj = graphdata::normalize_adjacency(&ds.graph);
    let mut params = encoder::init_for(&cfg.encoder, ds.feature_dim(), ds.num_classes, seed);
    let mut rng = run_rng(seed);
    let draw = EpochDraw::sample(&ds.splits, CorrelationBatch::All, &mut rng)?;
    let y2 = mixview::mix_labels(&ds.one_hot(&ds.splits.train), &draw.pi2, cfg.lambda, &ds.splits)?;
    let report = finite_diff_check_scaled(
        |tape, p| {
            joint_loss(tape, &ds, Input::Dense(&ds.features), &adj, p, &cfg, &draw, &y2, &mut rng, false)
                .map(|t| t.loss)
        },
        &mut params,
        eps,
        analytic_scale,
    )?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::{generate_sbm, Graph};

    fn two_cliques() -> Dataset {
        generate_sbm(&SbmParams {
            block_sizes: vec![5, 5],
            p_in: 1.0,
            p_out: 0.0,
            feature_dim: 4,
            feature_shift: 3.0,
            seed: 1,
        })
        .unwrap()
    }

    fn quick(ablation: Ablation, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            runs: 1,
            ablation,
            encoder: EncoderConfig { hidden_dim: 16, k: 3, ..EncoderConfig::default() },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learning_rate_table() {
        assert_eq!(default_learning_rate("Cora"), 2e-2);
        assert_eq!(default_learning_rate("citeseer"), 1e-3);
        assert_eq!(default_learning_rate("DBLP"), 5e-2);
        assert_eq!(default_learning_rate("amap"), 1e-2);
        assert_eq!(default_learning_rate("sbm"), 2e-2);
    }

    #[test]
    fn ablation_parsing_and_labels() {
        for a in Ablation::ALL {
            assert_eq!(a.label().parse::<Ablation>().unwrap(), a);
        }
        assert_eq!("full".parse::<Ablation>().unwrap(), Ablation::Full);
        assert!("B+X".parse::<Ablation>().is_err());
        assert_eq!(Ablation::ALL.map(Ablation::label), ["B", "B+I", "B+C", "Ours"]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { lambda: 1.2, ..TrainConfig::default() },
            TrainConfig { alpha: -0.1, ..TrainConfig::default() },
            TrainConfig { lr: 0.0, ..TrainConfig::default() },
            TrainConfig { epochs: 0, ..TrainConfig::default() },
            TrainConfig { runs: 0, ..TrainConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(TrainError::Config(_))), "{cfg:?}");
        }
        let ds = two_cliques();
        let cfg = TrainConfig { correlation_batch: CorrelationBatch::Size(11), ..quick(Ablation::Full, 1) };
        assert!(matches!(train(&ds, &cfg, 0), Err(TrainError::Config(_))));
    }

    #[test]
    fn mean_std_cases() {
        assert_eq!(mean_std(&[0.7]), (0.7, 0.0));
        let (m, s) = mean_std(&[0.8; 10]);
        assert!((m - 0.8).abs() < 1e-15 && s < 1e-15);
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    #[test]
    fn plain_backbone_fits_two_cliques() {
        let ds = two_cliques();
        let r = train(&ds, &quick(Ablation::B, 200), 0).unwrap();
        assert_eq!(r.history.last().unwrap().acc_train, 1.0);
        assert!(r.history.iter().all(|m| m.loss_r == 0.0 && m.loss == m.loss_c));
    }

    #[test]
    fn logged_loss_is_joint_sum() {
        let ds = two_cliques();
        let cfg = quick(Ablation::Full, 20);
        let r = train(&ds, &cfg, 0).unwrap();
        for m in &r.history {
            assert!((m.loss - (m.loss_c + cfg.alpha * m.loss_r)).abs() < 1e-10);
            assert!(m.loss_r > 0.0);
        }
    }

    #[test]
    fn first_epoch_loss_recomputes_from_snapshot() {
        let ds = two_cliques();
        let cfg = quick(Ablation::Full, 1);
        let r = train(&ds, &cfg, 0).unwrap();

        // replay the first epoch from the initial parameters
        let adj = graphdata::normalize_adjacency(&ds.graph);
        let params = encoder::init_for(&cfg.encoder, ds.feature_dim(), ds.num_classes, cfg.seed);
        let mut rng = run_rng(cfg.seed);
        let draw = EpochDraw::sample(&ds.splits, cfg.correlation_batch, &mut rng).unwrap();
        let y2 = mixview::mix_labels(&ds.one_hot(&ds.splits.train), &draw.pi2, cfg.lambda, &ds.splits).unwrap();
        let mut tape = Tape::new();
        let t = joint_loss(&mut tape, &ds, Input::Dense(&ds.features), &adj, &params, &cfg, &draw, &y2, &mut rng, true)
            .unwrap();
        let (l_c, l_r) = (tape.scalar(t.l_c), tape.scalar(t.l_r.unwrap()));
        let first = &r.history[0];
        assert_eq!(first.loss_c, l_c);
        assert_eq!(first.loss_r, l_r);
        assert!((first.loss - (l_c + cfg.alpha * l_r)).abs() < 1e-10);
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let ds = two_cliques();
        let cfg = quick(Ablation::Full, 15);
        let a = train(&ds, &cfg, 0).unwrap();
        let b = train(&ds, &cfg, 0).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.checkpoint().to_json(), b.checkpoint().to_json());
        let c = train(&ds, &cfg, 1).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn model_selection_takes_earliest_best_validation_epoch() {
        let ds = two_cliques();
        let r = train(&ds, &quick(Ablation::Full, 40), 0).unwrap();
        let best = r.history.iter().map(|m| m.acc_val).fold(f64::NEG_INFINITY, f64::max);
        let first = r.history.iter().find(|m| m.acc_val == best).unwrap();
        assert_eq!(r.best_epoch, first.epoch);
        assert_eq!(r.test_acc, first.acc_test);
    }

    #[test]
    fn run_multi_matches_sequential_runs() {
        let ds = two_cliques();
        let cfg = TrainConfig { runs: 3, ..quick(Ablation::Full, 10) };
        let multi = run_multi(&ds, &cfg).unwrap();
        for (i, r) in multi.runs.iter().enumerate() {
            let solo = train(&ds, &cfg, i).unwrap();
            assert_eq!(r.history, solo.history);
            assert_eq!(r.seed, cfg.seed + i as u64);
        }
        let (m, s) = mean_std(&multi.runs.iter().map(|r| r.test_acc).collect::<Vec<_>>());
        assert_eq!((multi.mean, multi.std), (m, s));
    }

    #[test]
    fn ablation_table_format() {
        let ds = two_cliques();
        let rows = run_ablation(&ds, &quick(Ablation::Full, 3)).unwrap();
        let csv = ablation_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "variant,mean,std,runs");
        let names: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(names, ["B", "B+I", "B+C", "Ours"]);
        for row in &rows {
            let zero_r = row.result.runs[0].history.iter().all(|m| m.loss_r == 0.0);
            assert_eq!(zero_r, matches!(row.variant, Ablation::B | Ablation::BI));
        }
    }

    #[test]
    fn zero_head_gives_chance_accuracy() {
        // four balanced classes, all predictions tie and pick class 0
        let ds = generate_sbm(&SbmParams { block_sizes: vec![5; 4], ..SbmParams::default() }).unwrap();
        let cfg = EncoderConfig::default();
        let mut params = encoder::init_for(&cfg, ds.feature_dim(), ds.num_classes, 0);
        params.value_mut(encoder::WC).unwrap().data_mut().fill(0.0);
        let all: Vec<usize> = (0..ds.num_nodes()).collect();
        assert_eq!(evaluate(&params, &ds, &cfg, &all).unwrap(), 0.25);
        assert!(matches!(evaluate(&params, &ds, &cfg, &[]), Err(TrainError::EmptyMask)));
    }

    #[test]
    fn similarity_of_identical_rows_is_all_ones() {
        let z = similarity_matrix(&Matrix::filled(4, 3, 0.7)).unwrap();
        assert!(z.data().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn label_order_is_stable() {
        assert_eq!(label_order(&[2, 0, 1, 0, 2]), vec![1, 3, 2, 0, 4]);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let features = Matrix::filled(4, 3, 1e308);
        let splits = SplitMasks { train: vec![0, 2], val: vec![1], test: vec![3] };
        let ds = Dataset::new("nan", g, features, vec![0, 0, 1, 1], 2, splits).unwrap();
        let r = train(&ds, &quick(Ablation::Full, 3), 0);
        assert!(matches!(r, Err(TrainError::NonFinite { epoch: 1 })), "{:?}", r.map(|r| r.history));
    }

    #[test]
    fn gradcheck_detects_corruption() {
        let ok = gradcheck_full_model(7, 1e-4, 1.0).unwrap();
        assert!(ok.max_rel_error < 1e-4, "{ok:?}");
        let bad = gradcheck_full_model(7, 1e-4, 1.5).unwrap();
        assert!(bad.max_rel_error > 0.1, "{bad:?}");
    }
}

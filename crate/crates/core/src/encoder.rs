//! Node encoder: a two-layer MLP followed by generalized-PageRank
//! propagation over the normalized adjacency, an alternative two-layer
//! graph-convolution backbone, and the linear classification head.

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graphdata::NormAdj;
use crate::ndiff::{Input, Matrix, ParamStore, Tape, TensorError, Var};

pub const W1: &str = "enc.W1";
pub const B1: &str = "enc.b1";
pub const W2: &str = "enc.W2";
pub const B2: &str = "enc.b2";
pub const GAMMA: &str = "enc.gamma";
pub const WC: &str = "head.Wc";
pub const BC: &str = "head.bc";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    /// MLP then `Σ_k γ_k Ã^k` propagation.
    #[default]
    Gpr,
    /// `Ã ReLU(Ã X W1 + b1) W2 + b2`.
    Gcn2,
}

impl std::str::FromStr for Backbone {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gpr" => Ok(Self::Gpr),
            "gcn2" => Ok(Self::Gcn2),
            other => Err(format!("unknown backbone {other:?} (expected gpr or gcn2)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub hidden_dim: usize,
    pub k: usize,
    pub ppr_alpha: f64,
    pub dropout: f64,
    pub backbone: Backbone,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { hidden_dim: 64, k: 10, ppr_alpha: 0.1, dropout: 0.5, backbone: Backbone::Gpr }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.hidden_dim == 0 {
            return Err("hidden_dim must be at least 1".into());
        }
        if !(self.ppr_alpha > 0.0 && self.ppr_alpha < 1.0) {
            return Err(format!("ppr_alpha must lie in (0, 1), got {}", self.ppr_alpha));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }
}

/// Personalized-PageRank weights `α(1-α)^k` for `k < K` and `(1-α)^K` last.
pub fn ppr_gamma(k: usize, ppr_alpha: f64) -> Vec<f64> {
    let mut gamma: Vec<f64> = (0..k).map(|i| ppr_alpha * (1.0 - ppr_alpha).powi(i as i32)).collect();
    gamma.push((1.0 - ppr_alpha).powi(k as i32));
    gamma
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot bound");
    let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("shape")
}

/// Glorot-uniform weights, zero biases and PPR-initialized propagation
/// weights, deterministic in `seed`.
pub fn init_params(
    in_dim: usize,
    hidden_dim: usize,
    num_classes: usize,
    k: usize,
    ppr_alpha: f64,
    seed: u64,
) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let gamma = Matrix::from_vec(1, k + 1, ppr_gamma(k, ppr_alpha)).expect("shape");
    let entries = [
        (W1, glorot(&mut rng, in_dim, hidden_dim)),
        (B1, Matrix::zeros(1, hidden_dim)),
        (W2, glorot(&mut rng, hidden_dim, hidden_dim)),
        (B2, Matrix::zeros(1, hidden_dim)),
        (GAMMA, gamma),
        (WC, glorot(&mut rng, hidden_dim, num_classes)),
        (BC, Matrix::zeros(1, num_classes)),
    ];
    for (name, value) in entries {
        store.insert(name, value, true).expect("unique names");
    }
    store
}

/// [`init_params`] for a configuration; the propagation weights are frozen
/// when the backbone does not use them.
pub fn init_for(cfg: &EncoderConfig, in_dim: usize, num_classes: usize, seed: u64) -> ParamStore {
    let mut store = init_params(in_dim, cfg.hidden_dim, num_classes, cfg.k, cfg.ppr_alpha, seed);
    if cfg.backbone == Backbone::Gcn2 {
        let idx = store.index_of(GAMMA).expect("gamma");
        store.get_mut(idx).trainable = false;
    }
    store
}

/// Embeddings `H` (N x d) from the configured backbone.
pub fn encode<'a, R: Rng + ?Sized>(
    tape: &mut Tape<'a>,
    features: Input<'a>,
    adj: &'a NormAdj,
    params: &ParamStore,
    cfg: &EncoderConfig,
    rng: &mut R,
    train: bool,
) -> Result<Var, TensorError> {
    match cfg.backbone {
        Backbone::Gpr => gpr_encode(tape, features, adj, params, cfg.dropout, rng, train),
        Backbone::Gcn2 => gcn2_encode(tape, features, adj, params, cfg.dropout, rng, train),
    }
}

/// `M = ReLU(X W1 + b1) W2 + b2` with dropout before each layer, then
/// `H = Σ_k γ_k Ã^k M` evaluated by repeated sparse products.
pub fn gpr_encode<'a, R: Rng + ?Sized>(
    tape: &mut Tape<'a>,
    features: Input<'a>,
    adj: &'a NormAdj,
    params: &ParamStore,
    dropout: f64,
    rng: &mut R,
    train: bool,
) -> Result<Var, TensorError> {
    let (w1, b1, w2, b2) =
        (tape.param(params, W1)?, tape.param(params, B1)?, tape.param(params, W2)?, tape.param(params, B2)?);
    let gamma = tape.param(params, GAMMA)?;

    let z1 = tape.input_linear(features, dropout, rng, train, w1)?;
    let z1 = tape.add_row(z1, b1)?;
    let a1 = tape.relu(z1);
    let a1 = tape.dropout(a1, dropout, rng, train)?;
    let z2 = tape.matmul(a1, w2)?;
    let m = tape.add_row(z2, b2)?;

    let steps = tape.shape(gamma).1;
    let mut powers = Vec::with_capacity(steps);
    powers.push(m);
    for _ in 1..steps {
        let next = tape.spmm(adj, *powers.last().expect("non-empty"))?;
        powers.push(next);
    }
    tape.weighted_sum(&powers, gamma)
}

/// Two-layer graph convolution with dropout before each weight matrix.
pub fn gcn2_encode<'a, R: Rng + ?Sized>(
    tape: &mut Tape<'a>,
    features: Input<'a>,
    adj: &'a NormAdj,
    params: &ParamStore,
    dropout: f64,
    rng: &mut R,
    train: bool,
) -> Result<Var, TensorError> {
    let (w1, b1, w2, b2) =
        (tape.param(params, W1)?, tape.param(params, B1)?, tape.param(params, W2)?, tape.param(params, B2)?);
    let xw = tape.input_linear(features, dropout, rng, train, w1)?;
    let axw = tape.spmm(adj, xw)?;
    let z1 = tape.add_row(axw, b1)?;
    let a1 = tape.relu(z1);
    let a1 = tape.dropout(a1, dropout, rng, train)?;
    let hw = tape.matmul(a1, w2)?;
    let ahw = tape.spmm(adj, hw)?;
    tape.add_row(ahw, b2)
}

/// Class logits `H Wc + bc`.
pub fn logits(tape: &mut Tape<'_>, h: Var, params: &ParamStore) -> Result<Var, TensorError> {
    let wc = tape.param(params, WC)?;
    let bc = tape.param(params, BC)?;
    let z = tape.matmul(h, wc)?;
    tape.add_row(z, bc)
}

/// Prediction distribution `softmax(H Wc + bc)`.
pub fn classify(tape: &mut Tape<'_>, h: Var, params: &ParamStore) -> Result<Var, TensorError> {
    let z = logits(tape, h, params)?;
    Ok(tape.softmax_rows(z))
}

/// Eval-mode embeddings as a plain matrix.
pub fn embed(
    features: &Matrix,
    adj: &NormAdj,
    params: &ParamStore,
    cfg: &EncoderConfig,
) -> Result<Matrix, TensorError> {
    embed_input(Input::Dense(features), adj, params, cfg)
}

/// [`embed`] for features in either layout.
pub fn embed_input(
    features: Input<'_>,
    adj: &NormAdj,
    params: &ParamStore,
    cfg: &EncoderConfig,
) -> Result<Matrix, TensorError> {
    let mut tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let h = encode(&mut tape, features, adj, params, cfg, &mut rng, false)?;
    Ok(tape.value(h).clone())
}

/// Prediction distribution for precomputed embeddings.
pub fn predict_from_embeddings(h: &Matrix, params: &ParamStore) -> Result<Matrix, TensorError> {
    let mut tape = Tape::new();
    let hv = tape.leaf(h.clone());
    let y = classify(&mut tape, hv, params)?;
    Ok(tape.value(y).clone())
}

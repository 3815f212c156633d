//! Cross-view correlation reduction: the cosine similarity matrix between two
//! embedding views and the loss that pulls it toward the identity.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ndiff::{Matrix, Tape, TensorError, Var};

/// Normalization of the correlation-reduction loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eq7Form {
    /// `(1/B) Σ_i (Z_ii - 1)² + (1/(B²-B)) Σ_{i≠j} Z_ij²`
    #[default]
    Decomposed,
    /// `(1/B²) Σ_ij (Z - I)_ij²`
    MeanSquare,
}

impl std::str::FromStr for Eq7Form {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "decomposed" => Ok(Self::Decomposed),
            "mean_square" => Ok(Self::MeanSquare),
            other => Err(format!("unknown eq7 form {other:?} (expected decomposed or mean_square)")),
        }
    }
}

/// How many nodes enter the correlation matrix each epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationBatch {
    #[default]
    All,
    Size(usize),
}

/// `Z = rownorm(h1) · rownorm(h2)ᵀ`.
pub fn correlation_matrix(tape: &mut Tape<'_>, h1: Var, h2: Var) -> Result<Var, TensorError> {
    if tape.shape(h1) != tape.shape(h2) || tape.shape(h1).0 == 0 {
        return Err(TensorError::Shape { op: "correlation_matrix", left: tape.shape(h1), right: tape.shape(h2) });
    }
    let n1 = tape.row_l2_normalize(h1);
    let n2 = tape.row_l2_normalize(h2);
    tape.matmul_nt(n1, n2)
}

/// `(diagonal, off-diagonal)` weights for a `b x b` correlation matrix.
fn weights(b: usize, form: Eq7Form) -> (f64, f64) {
    match form {
        Eq7Form::Decomposed => {
            let off = if b > 1 { 1.0 / (b * b - b) as f64 } else { 0.0 };
            (1.0 / b as f64, off)
        }
        Eq7Form::MeanSquare => {
            let w = 1.0 / (b * b) as f64;
            (w, w)
        }
    }
}

/// Loss value and its gradient with respect to `z`.
pub fn loss_and_grad(z: &Matrix, form: Eq7Form) -> (f64, Matrix) {
    let b = z.rows();
    let mut grad = Matrix::zeros(b, b);
    let (diag_w, off_w) = weights(b, form);
    let (mut diag, mut off) = (0.0, 0.0);
    for i in 0..b {
        let (zr, gr) = (z.row(i), grad.row_mut(i));
        for j in 0..b {
            if i == j {
                let d = zr[j] - 1.0;
                diag += d * d;
                gr[j] = 2.0 * diag_w * d;
            } else {
                off += zr[j] * zr[j];
                gr[j] = 2.0 * off_w * zr[j];
            }
        }
    }
    (diag_w * diag + off_w * off, grad)
}

/// Correlation-reduction loss of a square correlation matrix.
pub fn correlation_reduction_loss(tape: &mut Tape<'_>, z: Var, form: Eq7Form) -> Result<Var, TensorError> {
    let (r, c) = tape.shape(z);
    if r != c || r == 0 {
        return Err(TensorError::Shape { op: "correlation_reduction_loss", left: (r, c), right: (r, r) });
    }
    let (value, grad) = loss_and_grad(tape.value(z), form);
    tape.scalar_fn(z, value, grad)
}

/// Correlation-reduction loss of `rownorm(h1) · rownorm(h2)ᵀ` without
/// forming the `B x B` matrix. With `N1, N2` the normalized rows and
/// `G_v = N_vᵀ N_v`, the squared Frobenius norm of `Z` is `Σ G1 ∘ G2`, so the
/// cost is `O(B d²)`. Agrees with [`correlation_matrix`] followed by
/// [`correlation_reduction_loss`] up to rounding.
pub fn fused_correlation_loss(tape: &mut Tape<'_>, h1: Var, h2: Var, form: Eq7Form) -> Result<Var, TensorError> {
    if tape.shape(h1) != tape.shape(h2) || tape.shape(h1).0 == 0 {
        return Err(TensorError::Shape { op: "fused_correlation_loss", left: tape.shape(h1), right: tape.shape(h2) });
    }
    let n1 = tape.row_l2_normalize(h1);
    let n2 = tape.row_l2_normalize(h2);
    let (v1, v2) = (tape.value(n1), tape.value(n2));
    let b = v1.rows();
    let (diag_w, off_w) = weights(b, form);
    let (g1, g2) = (v1.t_matmul(v1)?, v2.t_matmul(v2)?);
    let frob: f64 = g1.data().iter().zip(g2.data()).map(|(a, c)| a * c).sum();
    let diag: Vec<f64> = (0..b).map(|i| v1.row(i).iter().zip(v2.row(i)).map(|(a, c)| a * c).sum()).collect();
    let diag_sq: f64 = diag.iter().map(|z| z * z).sum();
    let diag_err: f64 = diag.iter().map(|z| (z - 1.0) * (z - 1.0)).sum();
    let value = diag_w * diag_err + off_w * (frob - diag_sq);

    // dL/dN1 = 2 w_o N1 G2 + c ∘ N2 and dL/dN2 = 2 w_o N2 G1 + c ∘ N1,
    // with c_i = 2 w_d (z_ii - 1) - 2 w_o z_ii scaling row i
    let mut d1 = v1.matmul(&g2)?.map(|v| 2.0 * off_w * v);
    let mut d2 = v2.matmul(&g1)?.map(|v| 2.0 * off_w * v);
    for (i, &z) in diag.iter().enumerate() {
        let c = 2.0 * diag_w * (z - 1.0) - 2.0 * off_w * z;
        for (o, v) in d1.row_mut(i).iter_mut().zip(v2.row(i)) {
            *o += c * v;
        }
        for (o, v) in d2.row_mut(i).iter_mut().zip(v1.row(i)) {
            *o += c * v;
        }
    }
    tape.scalar_fn_many(vec![(n1, d1), (n2, d2)], value)
}

/// Node ids entering the correlation matrix: all nodes in order, or a fresh
/// uniform sample without replacement (sorted).
pub fn correlation_batch<R: Rng + ?Sized>(
    num_nodes: usize,
    batch: CorrelationBatch,
    rng: &mut R,
) -> Result<Vec<usize>, String> {
    match batch {
        CorrelationBatch::All => Ok((0..num_nodes).collect()),
        CorrelationBatch::Size(b) if b > num_nodes => {
            Err(format!("correlation batch {b} exceeds the node count {num_nodes}"))
        }
        CorrelationBatch::Size(b) if b == num_nodes => Ok((0..num_nodes).collect()),
        CorrelationBatch::Size(b) => {
            let mut ids = index::sample(rng, num_nodes, b).into_vec();
            ids.sort_unstable();
            Ok(ids)
        }
    }
}

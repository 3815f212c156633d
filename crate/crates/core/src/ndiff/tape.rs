use rand::Rng;

use super::matrix::gemm;
use super::{Input, Matrix, ParamStore, TensorError};
use crate::graphdata::NormAdj;

/// Guard added inside logarithms.
pub const EPS_LOG: f64 = 1e-12;
/// Lower bound on row norms in [`Tape::row_l2_normalize`].
pub const EPS_NORM: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<'a> {
    Leaf { param: Option<usize> },
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    SpMM(&'a NormAdj, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Dropout(Var, Vec<f64>),
    RowNormalize(Var, Vec<f64>),
    SoftmaxRows(Var),
    CrossEntropy(Var, Matrix),
    Sum(Var),
    WeightedSum(Vec<Var>, Var),
    MixRows(Var, Vec<usize>, f64),
    GatherRows(Var, Vec<usize>),
    ScalarFn(Vec<(Var, Matrix)>),
    InputLinear(Input<'a>, Masked, Var),
}

/// Dropped-out copy of a constant input, absent when dropout was inactive.
enum Masked {
    Identity,
    Dense(Matrix),
    Sparse(Vec<f64>),
}

impl Op<'_> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf { .. } => vec![],
            Op::MatMul(a, b) | Op::MatMulNT(a, b) | Op::Add(a, b) | Op::AddRow(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::SpMM(_, x)
            | Op::Scale(x, _)
            | Op::Relu(x)
            | Op::Dropout(x, _)
            | Op::RowNormalize(x, _)
            | Op::SoftmaxRows(x)
            | Op::CrossEntropy(x, _)
            | Op::Sum(x)
            | Op::MixRows(x, ..)
            | Op::GatherRows(x, _) => vec![*x],
            Op::WeightedSum(xs, w) => xs.iter().copied().chain([*w]).collect(),
            Op::ScalarFn(parts) => parts.iter().map(|(v, _)| *v).collect(),
            Op::InputLinear(_, _, w) => vec![*w],
        }
    }
}

struct Node<'a> {
    value: Matrix,
    op: Op<'a>,
}

/// Reverse-mode computation graph. Nodes are appended in evaluation order,
/// so the node list is already a topological order.
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    grads: Vec<Option<Matrix>>,
    needs_grad: Vec<bool>,
    backward_done: bool,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

/// Inverted-dropout multipliers: `0` with probability `rate`, else
/// `1/(1-rate)`. One 32-bit draw per entry.
fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    let threshold = (rate * 4_294_967_296.0) as u64;
    (0..len).map(|_| if u64::from(rng.random::<u32>()) < threshold { 0.0 } else { keep }).collect()
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), grads: Vec::new(), needs_grad: Vec::new(), backward_done: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op<'a>) -> Var {
        let needs = match &op {
            Op::Leaf { .. } => true,
            _ => op.inputs().iter().any(|v| self.needs_grad[v.0]),
        };
        self.push_with(value, op, needs)
    }

    fn push_with(&mut self, value: Matrix, op: Op<'a>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op });
        self.grads.push(None);
        self.needs_grad.push(needs_grad);
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Scalar held by a `1x1` value.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    /// Gradient of the last backward pass, `None` if `v` does not feed the loss.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    /// A constant or an input that is not tied to a parameter.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf { param: None })
    }

    /// A leaf that never receives a gradient; backward skips work that only
    /// feeds constants.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push_with(value, Op::Leaf { param: None }, false)
    }

    /// Records the current value of parameter `name`.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var, TensorError> {
        let idx = store.index_of(name).ok_or_else(|| TensorError::UnknownParam(name.to_string()))?;
        Ok(self.push(store.get(idx).value.clone(), Op::Leaf { param: Some(idx) }))
    }

    /// `(parameter index, gradient)` for every parameter leaf reached by backward.
    pub fn param_grads(&self) -> impl Iterator<Item = (usize, &Matrix)> + '_ {
        self.nodes.iter().zip(&self.grads).filter_map(|(n, g)| match (&n.op, g) {
            (Op::Leaf { param: Some(p) }, Some(g)) => Some((*p, g)),
            _ => None,
        })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.rows() {
            return Err(TensorError::shape("matmul", va.shape(), vb.shape()));
        }
        let mut out = Matrix::zeros(va.rows(), vb.cols());
        gemm(1.0, va, false, vb, false, 0.0, &mut out);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.cols() {
            return Err(TensorError::shape("matmul_nt", va.shape(), vb.shape()));
        }
        let mut out = Matrix::zeros(va.rows(), vb.rows());
        gemm(1.0, va, false, vb, true, 0.0, &mut out);
        Ok(self.push(out, Op::MatMulNT(a, b)))
    }

    /// Sparse-dense product `adj · x`. The adjacency is symmetric, so the
    /// backward pass multiplies by `adj` again.
    pub fn spmm(&mut self, adj: &'a NormAdj, x: Var) -> Result<Var, TensorError> {
        let vx = self.value(x);
        if adj.num_nodes() != vx.rows() {
            return Err(TensorError::shape("spmm", (adj.num_nodes(), adj.num_nodes()), vx.shape()));
        }
        let out = spmm_dense(adj, vx);
        Ok(self.push(out, Op::SpMM(adj, x)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(TensorError::shape("add", va.shape(), vb.shape()));
        }
        let mut out = va.clone();
        out.add_assign(vb);
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Adds a `1 x d` row to every row of an `n x d` value.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        let (vx, vb) = (self.value(x), self.value(bias));
        if vb.rows() != 1 || vb.cols() != vx.cols() {
            return Err(TensorError::shape("add_row", vx.shape(), vb.shape()));
        }
        let mut out = vx.clone();
        let b = vb.row(0);
        for i in 0..out.rows() {
            for (o, bj) in out.row_mut(i).iter_mut().zip(b) {
                *o += bj;
            }
        }
        Ok(self.push(out, Op::AddRow(x, bias)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(TensorError::shape("mul", va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let out = Matrix::from_vec(va.rows(), va.cols(), data)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let out = self.value(x).map(|v| c * v);
        self.push(out, Op::Scale(x, c))
    }

    /// ReLU; the subgradient at zero is zero.
    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(relu);
        self.push(out, Op::Relu(x))
    }

    /// Inverted dropout. Returns `x` itself in eval mode or when `rate == 0`,
    /// without touching the rng.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        rng: &mut R,
        train: bool,
    ) -> Result<Var, TensorError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::InvalidRate(rate));
        }
        if !train || rate == 0.0 {
            return Ok(x);
        }
        let vx = self.value(x);
        let mask = dropout_mask(vx.len(), rate, rng);
        let data = vx.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Matrix::from_vec(vx.rows(), vx.cols(), data)?;
        Ok(self.push(out, Op::Dropout(x, mask)))
    }

    /// `dropout(x) · w` for a constant input `x`, which receives no
    /// gradient. In sparse layout only the stored entries draw a mask value,
    /// since dropping a zero is a no-op.
    pub fn input_linear<R: Rng + ?Sized>(
        &mut self,
        x: Input<'a>,
        rate: f64,
        rng: &mut R,
        train: bool,
        w: Var,
    ) -> Result<Var, TensorError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::InvalidRate(rate));
        }
        let vw = self.value(w);
        if x.shape().1 != vw.rows() {
            return Err(TensorError::shape("input_linear", x.shape(), vw.shape()));
        }
        let active = train && rate > 0.0;
        let (out, masked) = match x {
            Input::Dense(m) => {
                let mut out = Matrix::zeros(m.rows(), vw.cols());
                if active {
                    let mask = dropout_mask(m.len(), rate, rng);
                    let data = m.data().iter().zip(&mask).map(|(v, k)| v * k).collect();
                    let dropped = Matrix::from_vec(m.rows(), m.cols(), data)?;
                    gemm(1.0, &dropped, false, vw, false, 0.0, &mut out);
                    (out, Masked::Dense(dropped))
                } else {
                    gemm(1.0, m, false, vw, false, 0.0, &mut out);
                    (out, Masked::Identity)
                }
            }
            Input::Sparse(s) => {
                if active {
                    let mask = dropout_mask(s.nnz(), rate, rng);
                    let dropped: Vec<f64> = s.values().iter().zip(&mask).map(|(v, k)| v * k).collect();
                    (s.matmul_with(&dropped, vw), Masked::Sparse(dropped))
                } else {
                    (s.matmul_with(s.values(), vw), Masked::Identity)
                }
            }
        };
        Ok(self.push(out, Op::InputLinear(x, masked, w)))
    }

    /// Divides each row by `max(‖row‖₂, EPS_NORM)`.
    pub fn row_l2_normalize(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let mut out = vx.clone();
        let mut norms = Vec::with_capacity(vx.rows());
        for i in 0..vx.rows() {
            let n = vx.row(i).iter().map(|v| v * v).sum::<f64>().sqrt().max(EPS_NORM);
            for o in out.row_mut(i) {
                *o /= n;
            }
            norms.push(n);
        }
        self.push(out, Op::RowNormalize(x, norms))
    }

    /// Row-wise softmax with the row maximum subtracted first.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        self.push(out, Op::SoftmaxRows(x))
    }

    /// Mean over rows of `-Σ_c target · ln(pred + EPS_LOG)`; targets may be soft.
    pub fn cross_entropy(&mut self, pred: Var, target: &Matrix) -> Result<Var, TensorError> {
        let vp = self.value(pred);
        if vp.shape() != target.shape() {
            return Err(TensorError::shape("cross_entropy", vp.shape(), target.shape()));
        }
        let t = vp.rows().max(1) as f64;
        let total: f64 = vp.data().iter().zip(target.data()).map(|(p, y)| y * (p + EPS_LOG).ln()).sum();
        Ok(self.push(Matrix::scalar(-total / t), Op::CrossEntropy(pred, target.clone())))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Matrix::scalar(s), Op::Sum(x))
    }

    /// `Σ_k weights[k] · xs[k]` with `weights` a `1 x len(xs)` value.
    pub fn weighted_sum(&mut self, xs: &[Var], weights: Var) -> Result<Var, TensorError> {
        let vw = self.value(weights);
        if vw.shape() != (1, xs.len()) || xs.is_empty() {
            return Err(TensorError::shape("weighted_sum", vw.shape(), (1, xs.len())));
        }
        let shape = self.shape(xs[0]);
        let mut out = Matrix::zeros(shape.0, shape.1);
        for (k, &x) in xs.iter().enumerate() {
            let vx = self.value(x);
            if vx.shape() != shape {
                return Err(TensorError::shape("weighted_sum", shape, vx.shape()));
            }
            out.add_scaled(self.value(weights).data()[k], vx);
        }
        Ok(self.push(out, Op::WeightedSum(xs.to_vec(), weights)))
    }

    /// Row `i` of the output is `lambda·x[i] + (1-lambda)·x[perm[i]]`.
    /// At `lambda == 1` the input is copied unchanged.
    pub fn mix_rows(&mut self, x: Var, perm: &[usize], lambda: f64) -> Result<Var, TensorError> {
        let vx = self.value(x);
        if perm.len() != vx.rows() {
            return Err(TensorError::shape("mix_rows", vx.shape(), (perm.len(), vx.cols())));
        }
        if perm.iter().any(|&p| p >= vx.rows()) {
            return Err(TensorError::BadIndex("mix_rows"));
        }
        let out = if lambda == 1.0 {
            vx.clone()
        } else {
            let mut out = Matrix::zeros(vx.rows(), vx.cols());
            for (i, &p) in perm.iter().enumerate() {
                let (own, partner) = (vx.row(i), vx.row(p));
                for (j, o) in out.row_mut(i).iter_mut().enumerate() {
                    *o = lambda * own[j] + (1.0 - lambda) * partner[j];
                }
            }
            out
        };
        Ok(self.push(out, Op::MixRows(x, perm.to_vec(), lambda)))
    }

    pub fn gather_rows(&mut self, x: Var, ids: &[usize]) -> Result<Var, TensorError> {
        let vx = self.value(x);
        if ids.iter().any(|&i| i >= vx.rows()) {
            return Err(TensorError::BadIndex("gather_rows"));
        }
        let out = vx.select_rows(ids);
        Ok(self.push(out, Op::GatherRows(x, ids.to_vec())))
    }

    /// Scalar function of one input whose value and local gradient are
    /// computed by the caller. `local_grad` must have the shape of `x`.
    pub fn scalar_fn(&mut self, x: Var, value: f64, local_grad: Matrix) -> Result<Var, TensorError> {
        self.scalar_fn_many(vec![(x, local_grad)], value)
    }

    /// [`Tape::scalar_fn`] of several inputs, each paired with its local
    /// gradient.
    pub fn scalar_fn_many(&mut self, parts: Vec<(Var, Matrix)>, value: f64) -> Result<Var, TensorError> {
        for (x, local) in &parts {
            if local.shape() != self.shape(*x) {
                return Err(TensorError::shape("scalar_fn", self.shape(*x), local.shape()));
            }
        }
        Ok(self.push(Matrix::scalar(value), Op::ScalarFn(parts)))
    }

    /// Clears all gradients so that backward may run again.
    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
        self.backward_done = false;
    }

    /// Populates gradients of every ancestor of the scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if self.shape(loss) != (1, 1) {
            return Err(TensorError::NotScalar(self.shape(loss)));
        }
        if self.backward_done {
            return Err(TensorError::BackwardTwice);
        }
        self.backward_done = true;
        self.grads[loss.0] = Some(Matrix::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            if !self.needs_grad[idx] {
                continue;
            }
            let Some(g) = self.grads[idx].take() else { continue };
            self.propagate(idx, &g);
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Matrix) {
        match &mut self.grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&mut self, idx: usize, g: &Matrix) {
        // Split borrow: nodes are read, grads are written.
        let node = &self.nodes[idx];
        let mut pending: Vec<(Var, Matrix)> = Vec::with_capacity(2);
        match &node.op {
            Op::Leaf { .. } => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                if self.needs_grad[a.0] {
                    let mut ga = Matrix::zeros(va.rows(), va.cols());
                    gemm(1.0, g, false, vb, true, 0.0, &mut ga);
                    pending.push((*a, ga));
                }
                if self.needs_grad[b.0] {
                    let mut gb = Matrix::zeros(vb.rows(), vb.cols());
                    gemm(1.0, va, true, g, false, 0.0, &mut gb);
                    pending.push((*b, gb));
                }
            }
            Op::MatMulNT(a, b) => {
                // out = a bᵀ: da = g b, db = gᵀ a
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let mut ga = Matrix::zeros(va.rows(), va.cols());
                gemm(1.0, g, false, vb, false, 0.0, &mut ga);
                let mut gb = Matrix::zeros(vb.rows(), vb.cols());
                gemm(1.0, g, true, va, false, 0.0, &mut gb);
                pending.push((*a, ga));
                pending.push((*b, gb));
            }
            Op::SpMM(adj, x) => pending.push((*x, spmm_dense(adj, g))),
            Op::Add(a, b) => {
                pending.push((*a, g.clone()));
                pending.push((*b, g.clone()));
            }
            Op::AddRow(x, bias) => {
                let mut gb = Matrix::zeros(1, g.cols());
                for i in 0..g.rows() {
                    for (acc, v) in gb.row_mut(0).iter_mut().zip(g.row(i)) {
                        *acc += v;
                    }
                }
                pending.push((*x, g.clone()));
                pending.push((*bias, gb));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let ga =
                    Matrix::from_vec(g.rows(), g.cols(), g.data().iter().zip(vb.data()).map(|(g, y)| g * y).collect());
                let gb =
                    Matrix::from_vec(g.rows(), g.cols(), g.data().iter().zip(va.data()).map(|(g, x)| g * x).collect());
                pending.push((*a, ga.expect("shape")));
                pending.push((*b, gb.expect("shape")));
            }
            Op::Scale(x, c) => pending.push((*x, g.map(|v| c * v))),
            Op::Relu(x) => {
                let vx = &self.nodes[x.0].value;
                let data = g.data().iter().zip(vx.data()).map(|(g, x)| if *x > 0.0 { *g } else { 0.0 }).collect();
                pending.push((*x, Matrix::from_vec(g.rows(), g.cols(), data).expect("shape")));
            }
            Op::Dropout(x, mask) => {
                let data = g.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                pending.push((*x, Matrix::from_vec(g.rows(), g.cols(), data).expect("shape")));
            }
            Op::RowNormalize(x, norms) => {
                let (vx, y) = (&self.nodes[x.0].value, &node.value);
                let mut gx = Matrix::zeros(vx.rows(), vx.cols());
                for (i, &n) in norms.iter().enumerate() {
                    let (gi, yi) = (g.row(i), y.row(i));
                    let raw = vx.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                    let out = gx.row_mut(i);
                    if raw > EPS_NORM {
                        let dot: f64 = gi.iter().zip(yi).map(|(a, b)| a * b).sum();
                        for j in 0..out.len() {
                            out[j] = (gi[j] - yi[j] * dot) / n;
                        }
                    } else {
                        for j in 0..out.len() {
                            out[j] = gi[j] / n;
                        }
                    }
                }
                pending.push((*x, gx));
            }
            Op::SoftmaxRows(x) => {
                let y = &node.value;
                let mut gx = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (gi, yi) = (g.row(i), y.row(i));
                    let dot: f64 = gi.iter().zip(yi).map(|(a, b)| a * b).sum();
                    for (j, o) in gx.row_mut(i).iter_mut().enumerate() {
                        *o = yi[j] * (gi[j] - dot);
                    }
                }
                pending.push((*x, gx));
            }
            Op::CrossEntropy(pred, target) => {
                let vp = &self.nodes[pred.0].value;
                let scale = -g.data()[0] / vp.rows().max(1) as f64;
                let data = vp.data().iter().zip(target.data()).map(|(p, y)| scale * y / (p + EPS_LOG)).collect();
                pending.push((*pred, Matrix::from_vec(vp.rows(), vp.cols(), data).expect("shape")));
            }
            Op::Sum(x) => {
                let (r, c) = self.nodes[x.0].value.shape();
                pending.push((*x, Matrix::filled(r, c, g.data()[0])));
            }
            Op::WeightedSum(xs, w) => {
                let weights = self.nodes[w.0].value.data();
                let mut gw = Matrix::zeros(1, xs.len());
                for (k, x) in xs.iter().enumerate() {
                    let vx = &self.nodes[x.0].value;
                    gw.data_mut()[k] = vx.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
                    pending.push((*x, g.map(|v| weights[k] * v)));
                }
                pending.push((*w, gw));
            }
            Op::MixRows(x, perm, lambda) => {
                let mut gx = Matrix::zeros(g.rows(), g.cols());
                for (i, &p) in perm.iter().enumerate() {
                    for (o, v) in gx.row_mut(i).iter_mut().zip(g.row(i)) {
                        *o += lambda * v;
                    }
                    for (o, v) in gx.row_mut(p).iter_mut().zip(g.row(i)) {
                        *o += (1.0 - lambda) * v;
                    }
                }
                pending.push((*x, gx));
            }
            Op::GatherRows(x, ids) => {
                let (r, c) = self.nodes[x.0].value.shape();
                let mut gx = Matrix::zeros(r, c);
                for (k, &i) in ids.iter().enumerate() {
                    for (o, v) in gx.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                pending.push((*x, gx));
            }
            Op::ScalarFn(parts) => {
                for (x, local) in parts {
                    pending.push((*x, local.map(|v| g.data()[0] * v)));
                }
            }
            Op::InputLinear(x, masked, w) => {
                let gw = match (x, masked) {
                    (Input::Dense(m), Masked::Identity) => {
                        let mut gw = Matrix::zeros(m.cols(), g.cols());
                        gemm(1.0, m, true, g, false, 0.0, &mut gw);
                        gw
                    }
                    (Input::Dense(_), Masked::Dense(dropped)) => {
                        let mut gw = Matrix::zeros(dropped.cols(), g.cols());
                        gemm(1.0, dropped, true, g, false, 0.0, &mut gw);
                        gw
                    }
                    (Input::Sparse(s), Masked::Identity) => s.t_matmul_with(s.values(), g),
                    (Input::Sparse(s), Masked::Sparse(dropped)) => s.t_matmul_with(dropped, g),
                    _ => unreachable!("mask layout follows the input layout"),
                };
                pending.push((*w, gw));
            }
        }
        for (v, gv) in pending {
            if self.needs_grad[v.0] {
                self.accumulate(v, gv);
            }
        }
    }
}

/// Dense result of `adj · x`.
pub fn spmm_dense(adj: &NormAdj, x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(adj.num_nodes(), x.cols());
    for i in 0..adj.num_nodes() {
        let (cols, vals) = adj.row(i);
        let out_row = out.row_mut(i);
        for (&j, &a) in cols.iter().zip(vals) {
            for (o, v) in out_row.iter_mut().zip(x.row(j)) {
                *o += a * v;
            }
        }
    }
    out
}

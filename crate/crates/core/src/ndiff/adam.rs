use super::{Matrix, ParamStore};

/// Adam moments and step counter, one moment pair per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        Self::with_betas(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(params: &ParamStore, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect();
        Self { m: zeros.clone(), v: zeros, t: 0, beta1, beta2, eps }
    }
}

/// One bias-corrected Adam update of every trainable parameter. The L2
/// penalty `weight_decay · θ` is added to the gradient before the moment
/// updates. Gradients are zeroed afterwards.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState, lr: f64, weight_decay: f64) {
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (k, p) in params.iter_mut().enumerate() {
        if p.trainable {
            let (m, v) = (state.m[k].data_mut(), state.v[k].data_mut());
            let grad = p.grad.data();
            for (j, w) in p.value.data_mut().iter_mut().enumerate() {
                let g = grad[j] + weight_decay * *w;
                m[j] = b1 * m[j] + (1.0 - b1) * g;
                v[j] = b2 * v[j] + (1.0 - b2) * g * g;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + state.eps);
            }
        }
        p.grad.data_mut().fill(0.0);
    }
}

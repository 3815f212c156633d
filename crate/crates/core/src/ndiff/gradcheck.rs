use super::{ParamStore, Tape, TensorError, Var};

/// Worst coordinate found by the gradient checker.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Compares analytic gradients of `loss_fn` against central differences over
/// every trainable parameter coordinate and returns the largest relative
/// error `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn finite_diff_check<'a, F>(loss_fn: F, params: &mut ParamStore, eps: f64) -> Result<f64, TensorError>
where
    F: FnMut(&mut Tape<'a>, &ParamStore) -> Result<Var, TensorError>,
{
    finite_diff_check_scaled(loss_fn, params, eps, 1.0).map(|r| r.max_rel_error)
}

/// Like [`finite_diff_check`], with the analytic gradient multiplied by
/// `analytic_scale` before comparison (a scale other than one simulates a
/// broken backward pass).
pub fn finite_diff_check_scaled<'a, F>(
    mut loss_fn: F,
    params: &mut ParamStore,
    eps: f64,
    analytic_scale: f64,
) -> Result<GradCheckReport, TensorError>
where
    F: FnMut(&mut Tape<'a>, &ParamStore) -> Result<Var, TensorError>,
{
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, params)?;
    tape.backward(loss)?;
    params.zero_grads();
    params.accumulate_grads(&tape);
    drop(tape);

    let mut eval = |params: &ParamStore| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let loss = loss_fn(&mut tape, params)?;
        Ok(tape.scalar(loss))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        param: String::new(),
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    for k in 0..params.len() {
        if !params.get(k).trainable {
            continue;
        }
        let analytic_all = params.get(k).grad.clone();
        for j in 0..analytic_all.len() {
            let original = params.get(k).value.data()[j];
            params.get_mut(k).value.data_mut()[j] = original + eps;
            let plus = eval(params)?;
            params.get_mut(k).value.data_mut()[j] = original - eps;
            let minus = eval(params)?;
            params.get_mut(k).value.data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = analytic_scale * analytic_all.data()[j];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic - numeric).abs() / denom;
            report.coordinates += 1;
            if rel > report.max_rel_error || !rel.is_finite() {
                report.max_rel_error = rel;
                report.param = params.get(k).name.clone();
                report.index = j;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    params.zero_grads();
    Ok(report)
}

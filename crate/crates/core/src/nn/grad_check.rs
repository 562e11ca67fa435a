use super::Parameters;
use crate::par;

/// `|a - n| / max(|a|, |n|, 1e-12)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Worst errors within one named parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub max_rel_error: f64,
    /// `max |analytic - numeric|`. Central differences carry an absolute
    /// rounding floor, so components far below it can show a large relative
    /// error with a tiny absolute one.
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// In visit order.
    pub groups: Vec<GroupError>,
}

/// Compare analytic gradients against central differences for every scalar
/// parameter.
///
/// `loss_and_grad` must return the loss and add its gradient into the
/// model's gradient buffers; it is called once on a zero-gradient copy for
/// the analytic pass, then twice per parameter (gradients ignored) for the
/// numeric estimate.
pub fn grad_check<M, F>(model: &M, loss_and_grad: F, eps: f64) -> GradCheckReport
where
    M: Parameters + Clone + Send + Sync,
    F: Fn(&mut M) -> f64 + Send + Sync,
{
    let mut m = model.clone();
    m.zero_grads();
    loss_and_grad(&mut m);
    let analytic = m.flat_grads();
    let base = m.flat_values();

    let numeric = par::map_range(base.len(), |k| {
        let mut probe = m.clone();
        let mut v = base.clone();
        v[k] = base[k] + eps;
        probe.set_flat_values(&v);
        let up = loss_and_grad(&mut probe);
        v[k] = base[k] - eps;
        probe.set_flat_values(&v);
        let down = loss_and_grad(&mut probe);
        (up - down) / (2.0 * eps)
    });

    let mut groups = Vec::new();
    let mut offset = 0;
    for (name, len) in m.param_layout() {
        let range = offset..offset + len;
        let max_rel_error = range
            .clone()
            .map(|k| relative_error(analytic[k], numeric[k]))
            .fold(0.0, f64::max);
        let max_abs_error = range
            .map(|k| (analytic[k] - numeric[k]).abs())
            .fold(0.0, f64::max);
        groups.push(GroupError {
            name,
            max_rel_error,
            max_abs_error,
        });
        offset += len;
    }
    let max_rel_error = groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max);
    let max_abs_error = groups.iter().map(|g| g.max_abs_error).fold(0.0, f64::max);
    GradCheckReport {
        max_rel_error,
        max_abs_error,
        groups,
    }
}

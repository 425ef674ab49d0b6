use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ParamCollection;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlotCheck {
    pub slot: String,
    pub entries: usize,
    /// `‖g_analytic − g_fd‖∞ / max(1, ‖g_fd‖∞)`
    pub rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub slots: Vec<SlotCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.slots.iter().fold(0.0, |m, s| m.max(s.rel_error))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.slots.iter().all(|s| s.rel_error < tol)
    }
}

/// Compares the gradients already stored in `params` against central
/// differences of `f` with step `h`, slot by slot.
///
/// `f` must be a deterministic function of the parameter values. Values are
/// restored bit-exactly after each probe.
pub fn finite_diff_gradcheck<P, F>(params: &mut P, h: f64, mut f: F) -> Result<GradCheckReport>
where
    P: ParamCollection + ?Sized,
    F: FnMut(&P) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::InvalidParam(format!("step h must be positive, got {h}")));
    }
    let shapes: Vec<(String, usize)> = params
        .slots()
        .iter()
        .map(|s| (s.name().to_string(), s.value().len()))
        .collect();
    let mut report = GradCheckReport::default();
    for (si, (name, len)) in shapes.into_iter().enumerate() {
        let analytic = params.slots()[si].grad().data().to_vec();
        let mut fd = Vec::with_capacity(len);
        for k in 0..len {
            let original = params.slots()[si].value().data()[k];
            params.slots_mut()[si].value_mut()[k] = original + h;
            let plus = f(params);
            params.slots_mut()[si].value_mut()[k] = original - h;
            let minus = f(params);
            params.slots_mut()[si].value_mut()[k] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite {
                    stage: format!("gradcheck objective while probing slot `{name}` entry {k}"),
                });
            }
            fd.push((plus - minus) / (2.0 * h));
        }
        let fd_norm = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_abs_error = analytic
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        report.slots.push(SlotCheck {
            slot: name,
            entries: len,
            rel_error: max_abs_error / fd_norm.max(1.0),
            max_abs_error,
        });
    }
    Ok(report)
}

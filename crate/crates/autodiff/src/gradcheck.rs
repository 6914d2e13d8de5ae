//! Central finite-difference checks against reverse-mode gradients.

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::{Gradients, ParamSet};

/// Denominator floor of the relative error, so entries whose analytic and
/// numeric values are both tiny are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// Default perturbation for central differences.
pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub entries_checked: usize,
    pub max_relative_error: f64,
    pub worst: Option<Mismatch>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.entries_checked > 0 && self.max_relative_error < tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `backward` against `(f(θ+h) - f(θ-h)) / 2h` for parameter
/// entries of the scalar built by `loss`.
///
/// `loss` must be deterministic. At most `max_per_param` entries of each
/// parameter are probed, spread evenly across it.
pub fn check_gradients<F>(params: &mut ParamSet, step: f64, max_per_param: usize, mut loss: F) -> Result<GradCheckReport>
where
    F: for<'a> FnMut(&mut Graph<'a>) -> Var,
{
    let mut analytic = Gradients::zeros_like(params);
    {
        let mut g = Graph::new(params);
        let l = loss(&mut g);
        g.backward(l, &mut analytic)?;
    }
    let mut report = GradCheckReport {
        entries_checked: 0,
        max_relative_error: 0.0,
        worst: None,
    };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let n = params.get(id).len();
        let stride = (n / max_per_param.max(1)).max(1);
        for index in (0..n).step_by(stride).take(max_per_param) {
            let original = params.get(id).data()[index];
            params.get_mut(id).data_mut()[index] = original + step;
            let plus = evaluate(params, &mut loss);
            params.get_mut(id).data_mut()[index] = original - step;
            let minus = evaluate(params, &mut loss);
            params.get_mut(id).data_mut()[index] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.get(id)[index];
            let err = relative_error(a, numeric);
            report.entries_checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(err);
                report.worst = Some(Mismatch {
                    param: params.name(id).to_string(),
                    index,
                    analytic: a,
                    numeric,
                });
            }
        }
    }
    Ok(report)
}

fn evaluate<F>(params: &ParamSet, loss: &mut F) -> f64
where
    F: for<'a> FnMut(&mut Graph<'a>) -> Var,
{
    let mut g = Graph::new(params);
    let l = loss(&mut g);
    g.scalar(l)
}

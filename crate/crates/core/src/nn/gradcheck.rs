//! Central finite-difference gradient checking.

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::Result;

/// Step used for central differences.
pub const DEFAULT_STEP: f64 = 1e-6;
/// Relative errors are computed as `|a − n| / max(|a|, |n|, floor)` so that
/// gradients that are zero up to rounding do not blow up the ratio.
pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(parameter name, flat index, analytic, numeric)` of the worst entry.
    pub worst: Option<(String, usize, f64, f64)>,
}

pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares tape gradients of `loss_fn` against central differences for
/// every scalar of every parameter in `store`. `loss_fn` must build a fresh
/// forward pass on the given tape and return a `1 × 1` node; it must not
/// depend on anything mutated between calls.
pub fn check_gradients<F>(store: &ParamStore, loss_fn: F, step: f64, floor: f64) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore, &mut Tape) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = loss_fn(store, &mut tape)?;
    let grads = tape.backward(loss)?;
    let analytic = grads.for_store(store)?;

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let l = loss_fn(s, &mut t)?;
        Ok(t.scalar(l))
    };

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    let mut probe = store.clone();
    for id in store.ids() {
        let n = store.get(id).as_slice().len();
        for j in 0..n {
            let orig = store.get(id).as_slice()[j];
            probe.get_mut(id).as_mut_slice()[j] = orig + step;
            let up = eval(&probe)?;
            probe.get_mut(id).as_mut_slice()[j] = orig - step;
            let down = eval(&probe)?;
            probe.get_mut(id).as_mut_slice()[j] = orig;

            let numeric = (up - down) / (2.0 * step);
            let a = analytic[id.0].as_slice()[j];
            let err = rel_error(a, numeric, floor);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst = Some((store.name(ParamId(id.0)).to_string(), j, a, numeric));
                }
            }
        }
    }
    Ok(report)
}

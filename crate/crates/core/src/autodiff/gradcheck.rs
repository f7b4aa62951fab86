//! Finite-difference gradient checking, replayed in `f64`.
//!
//! The numeric derivative uses the five-point stencil
//! `(8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h`, whose error is
//! `O(h^4)`; that allows a step large enough to keep cancellation noise in
//! long summed losses well below the tolerance.
//!
//! The numeric side only ever evaluates forward passes, so it stays
//! independent of every backward rule it verifies.

use super::{Graph, ParamStore, Real, Var};
use crate::error::Result;

/// Relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Denominator floor for [`relative_error`]; keeps near-zero gradients from dominating.
    pub floor: f64,
    /// Check at most this many coordinates per parameter (evenly strided); `None` checks all.
    pub max_coords_per_param: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { eps: 1e-3, floor: 1e-6, max_coords_per_param: None }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// `(param, index, analytic, numeric)` at the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.checked > 0 && self.max_rel_err < tol
    }
}

/// Compare backward-pass gradients of `loss` against central differences for
/// every trainable parameter of `params` (cast to `f64`).
pub fn check_gradients<F>(params: &ParamStore<f32>, opts: &GradCheckOptions, loss: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>) -> Result<Var>,
{
    let mut store: ParamStore<f64> = params.cast();
    let analytic = {
        let mut g = Graph::new(&store);
        let l = loss(&mut g)?;
        g.backward(l)?
    };
    let eval = |s: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new(s);
        let l = loss(&mut g)?;
        Ok(g.scalar(l).as_f64())
    };

    let mut report = GradCheckReport::default();
    for id in 0..store.len() {
        if !store.by_id(id).trainable {
            continue;
        }
        let n = store.by_id(id).tensor.len();
        let stride = match opts.max_coords_per_param {
            Some(m) if m > 0 && n > m => n.div_ceil(m),
            _ => 1,
        };
        for k in (0..n).step_by(stride) {
            let orig = store.by_id(id).tensor.data[k];
            let mut at = |offset: f64| -> Result<f64> {
                store.by_id_mut(id).tensor.data[k] = orig + offset;
                eval(&store)
            };
            let h = opts.eps;
            let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
            store.by_id_mut(id).tensor.data[k] = orig;
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            let a = analytic.get(id).map_or(0.0, |g| g[k]);
            let rel = relative_error(a, numeric, opts.floor);
            report.checked += 1;
            if rel > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = rel.max(report.max_rel_err);
                if rel >= report.max_rel_err {
                    report.worst = Some((store.by_id(id).name.clone(), k, a, numeric));
                }
            }
        }
    }
    Ok(report)
}

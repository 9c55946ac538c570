//! Central finite-difference verification of tape gradients.

use crate::error::Result;
use crate::nn::params::{ParamId, ParamStore};
use crate::nn::tape::{Tape, Var};

/// Differences below this are accepted regardless of relative error.
pub const ABS_FLOOR: f64 = 1e-8;
pub const STEP: f64 = 1e-5;

#[derive(Clone, Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    pub max_rel: f64,
    /// (parameter, flat index, analytic, numeric)
    pub failures: Vec<(String, usize, f64, f64)>,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }
}

fn eval<F>(store: &ParamStore, f: &F) -> Result<f64>
where
    F: Fn(&mut Tape) -> Result<Var>,
{
    let mut t = Tape::new(store);
    let l = f(&mut t)?;
    Ok(t.scalar(l))
}

/// Compare the analytic gradient of the scalar `f` with central differences for
/// every scalar of every parameter in `store`.
pub fn check_gradients<F>(store: &mut ParamStore, rel_tol: f64, f: F) -> Result<GradReport>
where
    F: Fn(&mut Tape) -> Result<Var>,
{
    let analytic = {
        let mut t = Tape::new(store);
        let l = f(&mut t)?;
        let g = t.backward(l)?;
        let mut probe = store.clone();
        probe.zero_grad();
        probe.accumulate(&g, 1.0);
        probe.iter().map(|(_, p)| p.grad.clone()).collect::<Vec<_>>()
    };
    let mut report = GradReport::default();
    for (pi, grads) in analytic.iter().enumerate() {
        let id = ParamId(pi);
        for i in 0..grads.len() {
            let x = store.param(id).value[i];
            store.param_mut(id).value[i] = x + STEP;
            let fp = eval(store, &f)?;
            store.param_mut(id).value[i] = x - STEP;
            let fm = eval(store, &f)?;
            store.param_mut(id).value[i] = x;
            let num = (fp - fm) / (2.0 * STEP);
            let a = grads[i];
            let diff = (a - num).abs();
            let rel = diff / a.abs().max(num.abs()).max(f64::MIN_POSITIVE);
            report.checked += 1;
            if a.abs().max(num.abs()) > ABS_FLOOR {
                report.max_rel = report.max_rel.max(rel);
            }
            if diff > ABS_FLOOR && rel > rel_tol {
                report.failures.push((store.param(id).name.clone(), i, a, num));
            }
        }
    }
    Ok(report)
}

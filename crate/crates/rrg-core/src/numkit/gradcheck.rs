use super::{Parameter, Var};
use crate::error::Result;

/// One element whose analytic gradient disagrees with central differences.
#[derive(Debug, Clone)]
pub struct GradCheckFailure {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub failures: Vec<GradCheckFailure>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Fraction of elements within tolerance.
    pub fn pass_fraction(&self) -> f64 {
        if self.checked == 0 {
            return 1.0;
        }
        1.0 - self.failures.len() as f64 / self.checked as f64
    }
}

/// Compares reverse-mode gradients of `f` against central finite differences
/// at the current parameter point. `f` rebuilds the loss graph on each call.
pub fn grad_check<F>(
    params: &[Parameter],
    mut f: F,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut() -> Result<Var>,
{
    assert!(step > 0.0, "grad_check: step must be positive");

    for p in params {
        p.var.zero_grad();
    }
    let loss = f()?;
    loss.value().check_finite("grad_check loss")?;
    loss.backward()?;

    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| match p.var.grad() {
            Some(g) => g.data().to_vec(),
            None => vec![0.0; p.value().len()],
        })
        .collect();

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        failures: Vec::new(),
    };

    for (pi, p) in params.iter().enumerate() {
        let base = p.value();
        for i in 0..base.len() {
            let orig = base.data()[i];

            let mut plus = base.clone();
            plus.data_mut()[i] = orig + step;
            p.set_value(plus);
            let f_plus = f()?.value().item();

            let mut minus = base.clone();
            minus.data_mut()[i] = orig - step;
            p.set_value(minus);
            let f_minus = f()?.value().item();

            p.set_value(base.clone());

            let numeric = (f_plus - f_minus) / (2.0 * step);
            let a = analytic[pi][i];
            let rel = (a - numeric).abs() / numeric.abs().max(1.0);
            report.checked += 1;
            report.max_rel_err = report.max_rel_err.max(rel);
            if rel > tolerance {
                report.failures.push(GradCheckFailure {
                    name: p.name.clone(),
                    index: i,
                    analytic: a,
                    numeric,
                    rel_err: rel,
                });
            }
        }
    }
    Ok(report)
}

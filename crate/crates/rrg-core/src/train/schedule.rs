//! Cosine learning-rate schedule with linear warm-up and hard restarts.

use crate::error::{CoreError, Result};

/// Linear 0 -> peak over `warmup` steps; the remaining span is split into
/// `cycles` equal cosine decays from peak to 0, restarting at each boundary.
pub fn lr_schedule(
    step: usize,
    total_steps: usize,
    warmup: usize,
    peak: f64,
    cycles: usize,
) -> Result<f64> {
    if warmup >= total_steps {
        return Err(CoreError::InvalidArgument(format!(
            "warmup {warmup} must be below total steps {total_steps}"
        )));
    }
    if cycles == 0 {
        return Err(CoreError::InvalidArgument("cycles must be at least 1".into()));
    }
    if step > total_steps {
        return Err(CoreError::InvalidArgument(format!(
            "step {step} beyond total steps {total_steps}"
        )));
    }
    if step <= warmup {
        if warmup == 0 {
            return Ok(peak);
        }
        return Ok(peak * step as f64 / warmup as f64);
    }
    let span = (total_steps - warmup) as f64;
    let seg = span / cycles as f64;
    let pos = (step - warmup) as f64;
    let idx = ((pos / seg).floor() as usize).min(cycles - 1);
    let frac = (pos - idx as f64 * seg) / seg;
    Ok(peak * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos()))
}

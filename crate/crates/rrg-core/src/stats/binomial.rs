//! Exact binomial tests and power analysis.

use statrs::distribution::{Binomial, Discrete, DiscreteCDF};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    TwoSided,
    Greater,
    Less,
}

impl std::str::FromStr for Alternative {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" => Ok(Alternative::TwoSided),
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            other => Err(CoreError::InvalidArgument(format!(
                "unknown alternative '{other}'"
            ))),
        }
    }
}

fn check_args(k: u64, n: u64, p0: f64) -> Result<Binomial> {
    if k > n {
        return Err(CoreError::InvalidArgument(format!(
            "successes {k} exceed trials {n}"
        )));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "null proportion {p0} outside (0,1)"
        )));
    }
    Binomial::new(p0, n).map_err(|e| CoreError::Stats(e.to_string()))
}

fn upper_tail(dist: &Binomial, k: u64) -> f64 {
    if k == 0 {
        1.0
    } else {
        (1.0 - dist.cdf(k - 1)).clamp(0.0, 1.0)
    }
}

/// Exact binomial test. The two-sided p-value follows the small-p-sum
/// convention: the total probability of all outcomes no more likely than
/// the observed one.
pub fn exact_binomial_test(k: u64, n: u64, p0: f64, alternative: Alternative) -> Result<f64> {
    let dist = check_args(k, n, p0)?;
    let p = match alternative {
        Alternative::Greater => upper_tail(&dist, k),
        Alternative::Less => dist.cdf(k),
        Alternative::TwoSided => {
            let observed = dist.pmf(k);
            let cutoff = observed * (1.0 + 1e-7);
            (0..=n).map(|i| dist.pmf(i)).filter(|&p| p <= cutoff).sum()
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Exact power of the one-sided (greater) test: the critical region is the
/// smallest k whose null upper tail fits under alpha, and power is the
/// alternative's mass on that region.
pub fn binomial_power(n: u64, p0: f64, p1: f64, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(CoreError::InvalidArgument("need at least one trial".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "alpha {alpha} outside (0,1)"
        )));
    }
    let null = check_args(0, n, p0)?;
    let alt = check_args(0, n, p1)?;
    let critical = (0..=n)
        .find(|&k| upper_tail(&null, k) <= alpha)
        .ok_or_else(|| {
            CoreError::Stats(format!(
                "no attainable critical region at n={n}, p0={p0}, alpha={alpha}"
            ))
        })?;
    Ok(upper_tail(&alt, critical))
}

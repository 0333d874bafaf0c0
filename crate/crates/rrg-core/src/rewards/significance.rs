//! One-way ANOVA across models with Tukey HSD post-hoc comparisons. The
//! studentized-range CDF is evaluated by direct numerical quadrature of its
//! double-integral form.

use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::gamma::ln_gamma;

use crate::error::{CoreError, Result};
use crate::numkit::ops::normal_cdf;

#[derive(Debug, Clone)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct PairwiseComparison {
    pub a: usize,
    pub b: usize,
    pub mean_diff: f64,
    pub q: f64,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct SignificanceTable {
    pub anova: AnovaResult,
    /// Tukey HSD rows; empty when the ANOVA is not significant at 0.05.
    pub pairwise: Vec<PairwiseComparison>,
}

fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, intervals: usize) -> f64 {
    debug_assert!(intervals % 2 == 0);
    let h = (hi - lo) / intervals as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// P(range of k standard normals < r).
fn range_cdf(r: f64, k: usize) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let integrand = |z: f64| {
        let span = normal_cdf(z) - normal_cdf(z - r);
        k as f64 * normal_pdf(z) * span.powi(k as i32 - 1)
    };
    simpson(integrand, -9.0, 9.0, 900).clamp(0.0, 1.0)
}

/// CDF of the studentized range with `k` groups and `df` error degrees of
/// freedom, by integrating the range CDF over the chi scale factor.
/// Quadrature resolution targets 1e-6 absolute error.
pub fn studentized_range_cdf(q: f64, k: usize, df: usize) -> Result<f64> {
    if k < 2 {
        return Err(CoreError::Stats("need at least 2 groups".into()));
    }
    if df == 0 {
        return Err(CoreError::Stats("zero error degrees of freedom".into()));
    }
    if q <= 0.0 {
        return Ok(0.0);
    }
    let nu = df as f64;
    // density of s = sqrt(chi^2_nu / nu)
    let log_norm = (nu / 2.0) * (nu / 2.0).ln() - ln_gamma(nu / 2.0) + std::f64::consts::LN_2;
    let s_pdf = |s: f64| (log_norm + (nu - 1.0) * s.ln() - nu * s * s / 2.0).exp();
    let integrand = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        s_pdf(s) * range_cdf(q * s, k)
    };
    Ok(simpson(integrand, 1e-9, 8.0, 1200).clamp(0.0, 1.0))
}

fn anova(scores: &[Vec<f64>]) -> Result<(AnovaResult, f64, usize)> {
    let k = scores.len();
    if k < 2 {
        return Err(CoreError::Stats("need at least 2 models".into()));
    }
    let n = scores[0].len();
    if n < 2 {
        return Err(CoreError::Stats("need at least 2 studies".into()));
    }
    if scores.iter().any(|g| g.len() != n) {
        return Err(CoreError::Stats(
            "all models must score the same studies".into(),
        ));
    }
    let means: Vec<f64> = scores
        .iter()
        .map(|g| g.iter().sum::<f64>() / n as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / k as f64;
    let ssb: f64 = means.iter().map(|m| n as f64 * (m - grand).powi(2)).sum();
    let ssw: f64 = scores
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|x| (x - m).powi(2)).sum::<f64>())
        .sum();
    let df_between = k - 1;
    let df_within = k * n - k;
    let msw = ssw / df_within as f64;
    let (f, p) = if ssb <= 0.0 {
        (0.0, 1.0)
    } else if msw == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (ssb / df_between as f64) / msw;
        let dist = FisherSnedecor::new(df_between as f64, df_within as f64)
            .map_err(|e| CoreError::Stats(e.to_string()))?;
        (f, 1.0 - dist.cdf(f))
    };
    Ok((
        AnovaResult {
            f,
            df_between,
            df_within,
            p,
        },
        msw,
        n,
    ))
}

/// One-way ANOVA over per-study scores (rows = models, all scoring the same
/// studies); Tukey HSD pairwise comparisons when p <= 0.05.
pub fn paired_significance(scores: &[Vec<f64>]) -> Result<SignificanceTable> {
    let (anova_result, msw, n) = anova(scores)?;
    let mut pairwise = Vec::new();
    if anova_result.p <= 0.05 && anova_result.f.is_finite() && msw > 0.0 {
        let k = scores.len();
        let se = (msw / n as f64).sqrt();
        let means: Vec<f64> = scores
            .iter()
            .map(|g| g.iter().sum::<f64>() / n as f64)
            .collect();
        for a in 0..k {
            for b in a + 1..k {
                let diff = means[a] - means[b];
                let q = diff.abs() / se;
                let p = 1.0 - studentized_range_cdf(q, k, anova_result.df_within)?;
                pairwise.push(PairwiseComparison {
                    a,
                    b,
                    mean_diff: diff,
                    q,
                    p,
                });
            }
        }
    }
    Ok(SignificanceTable {
        anova: anova_result,
        pairwise,
    })
}

/// The Tukey q statistic for two specific groups, exposed for property
/// checks and report tables.
pub fn tukey_q(group_a: &[f64], group_b: &[f64], msw: f64, n: usize) -> f64 {
    let ma = group_a.iter().sum::<f64>() / group_a.len() as f64;
    let mb = group_b.iter().sum::<f64>() / group_b.len() as f64;
    (ma - mb).abs() / (msw / n as f64).sqrt()
}

/// Mean square within, shared by ANOVA and the q statistic.
pub fn mean_square_within(scores: &[Vec<f64>]) -> Result<f64> {
    let (_, msw, _) = anova(scores)?;
    Ok(msw)
}

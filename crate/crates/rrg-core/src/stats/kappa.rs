//! Fleiss' kappa for multi-rater categorical agreement.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone)]
pub struct KappaResult {
    pub agreement: f64,
    pub kappa: f64,
    pub z: f64,
    pub p: f64,
}

fn project(items: &[Vec<usize>], raters: Option<&[usize]>) -> Result<Vec<Vec<usize>>> {
    let Some(subset) = raters else {
        return Ok(items.to_vec());
    };
    if subset.len() < 2 {
        return Err(CoreError::InvalidArgument(
            "rater subset needs at least two raters".into(),
        ));
    }
    items
        .iter()
        .map(|row| {
            subset
                .iter()
                .map(|&r| {
                    row.get(r).copied().ok_or_else(|| {
                        CoreError::InvalidArgument(format!("rater index {r} out of range"))
                    })
                })
                .collect()
        })
        .collect()
}

/// Fleiss' kappa over `items`, one row of category labels per item.
/// `raters` restricts the computation to a column subset, which yields the
/// pairwise table when given pairs.
pub fn fleiss_kappa(items: &[Vec<usize>], raters: Option<&[usize]>) -> Result<KappaResult> {
    let items = project(items, raters)?;
    let n_items = items.len();
    if n_items == 0 {
        return Err(CoreError::InvalidArgument("no rated items".into()));
    }
    let n_raters = items[0].len();
    if n_raters < 2 {
        return Err(CoreError::InvalidArgument(
            "each item needs at least two ratings".into(),
        ));
    }
    if items.iter().any(|row| row.len() != n_raters) {
        return Err(CoreError::InvalidArgument(
            "every item must be rated by the same number of raters".into(),
        ));
    }

    let n_categories = items.iter().flatten().max().copied().unwrap_or(0) + 1;
    let mut category_mass = vec![0.0f64; n_categories];
    let mut mean_agreement = 0.0;
    let n = n_raters as f64;
    for row in &items {
        let mut counts = vec![0usize; n_categories];
        for &c in row {
            counts[c] += 1;
        }
        let same_pairs: f64 = counts.iter().map(|&c| (c * c) as f64).sum::<f64>() - n;
        mean_agreement += same_pairs / (n * (n - 1.0));
        for (j, &c) in counts.iter().enumerate() {
            category_mass[j] += c as f64;
        }
    }
    mean_agreement /= n_items as f64;
    let total = (n_items * n_raters) as f64;
    let p: Vec<f64> = category_mass.iter().map(|&m| m / total).collect();
    let pe: f64 = p.iter().map(|&pj| pj * pj).sum();
    if 1.0 - pe <= 1e-12 {
        return Err(CoreError::Stats(
            "kappa undefined: a single category is used everywhere".into(),
        ));
    }
    let kappa = (mean_agreement - pe) / (1.0 - pe);

    // large-sample variance under the null of chance agreement
    let p3: f64 = p.iter().map(|&pj| pj * pj * pj).sum();
    let var = 2.0 / (n_items as f64 * n * (n - 1.0)) * (pe - (2.0 * n - 3.0) * pe * pe
        + 2.0 * (n - 2.0) * p3)
        / (1.0 - pe).powi(2);
    let z = kappa / var.sqrt();
    let normal = Normal::standard();
    let pval = 2.0 * (1.0 - normal.cdf(z.abs()));
    Ok(KappaResult {
        agreement: mean_agreement,
        kappa,
        z,
        p: pval.clamp(0.0, 1.0),
    })
}

/// Kappa for every rater pair.
pub fn pairwise_kappa(items: &[Vec<usize>]) -> Result<Vec<(usize, usize, KappaResult)>> {
    let n_raters = items.first().map(|r| r.len()).unwrap_or(0);
    let mut out = Vec::new();
    for a in 0..n_raters {
        for b in a + 1..n_raters {
            out.push((a, b, fleiss_kappa(items, Some(&[a, b]))?));
        }
    }
    Ok(out)
}

//! Rater-study statistics: binomial tests, power, kappa, and the GLM.

use rrg_core::stats::{
    anova_deviance, binomial_power, exact_binomial_test, fleiss_kappa, glm_fit_logistic,
    pairwise_kappa, ratings_design, ratings_to_items, read_ratings,
};

use crate::error::{CliError, Result};
use crate::StatsCommand;

pub fn run(command: &StatsCommand) -> Result<()> {
    match command {
        StatsCommand::Binom(args) => {
            let alternative = args.alternative.parse()?;
            let p = exact_binomial_test(args.k, args.n, args.p0, alternative)?;
            println!("p = {p:.3}");
        }
        StatsCommand::Power(args) => {
            let power = binomial_power(args.n, args.p0, args.p1, args.alpha)?;
            println!("power = {power:.3}");
        }
        StatsCommand::Kappa(args) => {
            let records = read_ratings(&args.ratings)?;
            let (items, raters) = ratings_to_items(&records)?;
            let overall = fleiss_kappa(&items, None)?;
            println!(
                "fleiss kappa = {:.4} (agreement {:.4}, z {:.3}, p {:.4})",
                overall.kappa, overall.agreement, overall.z, overall.p
            );
            if args.pairwise {
                for (a, b, result) in pairwise_kappa(&items)? {
                    println!(
                        "{} vs {}: kappa {:.4}, z {:.3}, p {:.4}",
                        raters[a], raters[b], result.kappa, result.z, result.p
                    );
                }
            }
        }
        StatsCommand::Glm(args) => {
            let records = read_ratings(&args.ratings)?;
            let (x, y, names) = ratings_design(&records)?;
            let fit = glm_fit_logistic(&x, &y)?;
            println!("term\tcoef\tOR\tCI low\tCI high\tp");
            for (i, name) in names.iter().enumerate() {
                let (or, lo, hi) = fit.odds_ratios[i];
                println!(
                    "{name}\t{:.4}\t{or:.4}\t{lo:.4}\t{hi:.4}\t{:.4}",
                    fit.coefficients[i], fit.p_values[i]
                );
            }
            println!("deviance = {:.4} ({} iterations)", fit.deviance, fit.iterations);
            if args.anova {
                let table = anova_deviance(&grouped_terms(&x, &names)?, &y)?;
                println!("term\tdf\tdelta deviance\tresid df\tresid deviance\tp");
                for row in table {
                    println!(
                        "{}\t{}\t{:.4}\t{}\t{:.4}\t{:.4}",
                        row.term,
                        row.df,
                        row.delta_deviance,
                        row.residual_df,
                        row.residual_deviance,
                        row.p
                    );
                }
            }
        }
    }
    Ok(())
}

/// Groups the dummy columns back into their factors (reason, rater,
/// finding) for the Type I table.
fn grouped_terms(
    x: &[Vec<f64>],
    names: &[String],
) -> Result<Vec<(String, Vec<Vec<f64>>)>> {
    let mut terms: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for (j, name) in names.iter().enumerate() {
        if name == "intercept" {
            continue;
        }
        let factor = name
            .split_once('[')
            .map(|(f, _)| f.to_string())
            .ok_or_else(|| CliError::Invalid(format!("unexpected design column '{name}'")))?;
        let column: Vec<f64> = x.iter().map(|row| row[j]).collect();
        match terms.last_mut() {
            Some((f, cols)) if *f == factor => cols.push(column),
            _ => terms.push((factor, vec![column])),
        }
    }
    if terms.is_empty() {
        return Err(CliError::Invalid(
            "ratings provide no non-reference factor levels".into(),
        ));
    }
    Ok(terms)
}

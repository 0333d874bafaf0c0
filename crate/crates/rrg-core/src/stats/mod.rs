//! Evaluation statistics: exact binomial tests and power, Fleiss' kappa,
//! and logistic-regression analysis of deviance.

pub mod binomial;
pub mod glm;
pub mod kappa;
pub mod ratings;

pub use binomial::{binomial_power, exact_binomial_test, Alternative};
pub use glm::{anova_deviance, glm_fit_logistic, DevianceRow, GLMFit};
pub use kappa::{fleiss_kappa, pairwise_kappa, KappaResult};
pub use ratings::{
    ratings_design, ratings_to_items, read_ratings, Preference, RatingRecord,
};

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn binomial_reproduces_published_table() {
        let rows: &[(u64, u64, f64, f64)] = &[
            (161, 360, 0.051, 0.003),
            (47, 102, 0.488, 0.02),
            (47, 108, 0.211, 0.02),
            (48, 96, 1.000, 1e-12),
            (45, 99, 0.422, 0.02),
            (33, 99, 0.001, 0.0005),
            (43, 96, 0.358, 0.02),
            (56, 117, 0.712, 0.02),
            (44, 99, 0.315, 0.02),
        ];
        for &(k, n, expected, tol) in rows {
            let p = exact_binomial_test(k, n, 0.5, Alternative::TwoSided).unwrap();
            assert!(
                (p - expected).abs() <= tol,
                "({k},{n}): got {p}, want {expected} +- {tol}"
            );
        }
    }

    #[test]
    fn two_sided_is_symmetric_at_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.gen_range(5..200u64);
            let k = rng.gen_range(0..=n);
            let a = exact_binomial_test(k, n, 0.5, Alternative::TwoSided).unwrap();
            let b = exact_binomial_test(n - k, n, 0.5, Alternative::TwoSided).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn one_sided_tails() {
        assert_relative_eq!(
            exact_binomial_test(0, 20, 0.3, Alternative::Greater).unwrap(),
            1.0
        );
        assert_relative_eq!(
            exact_binomial_test(20, 20, 0.3, Alternative::Less).unwrap(),
            1.0
        );
        assert_relative_eq!(
            exact_binomial_test(10, 10, 0.4, Alternative::Greater).unwrap(),
            0.4f64.powi(10),
            epsilon = 1e-12
        );
    }

    #[test]
    fn binomial_argument_checks() {
        assert!(exact_binomial_test(5, 4, 0.5, Alternative::TwoSided).is_err());
        assert!(exact_binomial_test(1, 4, 0.0, Alternative::TwoSided).is_err());
        assert!(exact_binomial_test(1, 4, 1.0, Alternative::TwoSided).is_err());
    }

    #[test]
    fn power_reproduces_published_curve() {
        let p1 = 199.0 / 360.0;
        for (n, want) in [(360u64, 0.608), (600, 0.823), (720, 0.879)] {
            let power = binomial_power(n, 0.5, p1, 0.05).unwrap();
            assert!(
                (power - want).abs() <= 0.015,
                "n={n}: got {power}, want {want}"
            );
        }
    }

    #[test]
    fn power_is_monotone() {
        let p1 = 199.0 / 360.0;
        let mut last = 0.0;
        for n in [100u64, 200, 400, 800] {
            let p = binomial_power(n, 0.5, p1, 0.05).unwrap();
            assert!(p >= last - 1e-12, "power fell at n={n}");
            last = p;
        }
        let mut last = 0.0;
        for p1 in [0.52, 0.56, 0.60, 0.66] {
            let p = binomial_power(300, 0.5, p1, 0.05).unwrap();
            assert!(p >= last - 1e-12, "power fell at p1={p1}");
            last = p;
        }
    }

    #[test]
    fn power_without_critical_region_errors() {
        assert!(binomial_power(3, 0.5, 0.8, 0.001).is_err());
    }

    #[test]
    fn kappa_hand_case() {
        // 3 raters, 2 items; item counts [3,0] and [1,2]
        let items = vec![vec![0, 0, 0], vec![0, 1, 1]];
        let result = fleiss_kappa(&items, None).unwrap();
        assert_relative_eq!(result.agreement, 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(result.kappa, 0.25, epsilon = 1e-10);
        assert!(result.p > 0.0 && result.p <= 1.0);
    }

    #[test]
    fn perfect_agreement_gives_one() {
        let items = vec![vec![0, 0, 0], vec![1, 1, 1], vec![2, 2, 2]];
        let result = fleiss_kappa(&items, None).unwrap();
        assert_relative_eq!(result.kappa, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_category_is_undefined() {
        let items = vec![vec![0, 0], vec![0, 0]];
        assert!(fleiss_kappa(&items, None).is_err());
    }

    #[test]
    fn two_raters_match_cohen_on_balanced_marginals() {
        // with equal rater marginals (symmetric table) two-rater Fleiss
        // coincides with Cohen's kappa
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let k = 3usize;
            let mut counts = vec![vec![0usize; k]; k];
            for i in 0..k {
                for j in i..k {
                    let c = rng.gen_range(1..8usize);
                    counts[i][j] = c;
                    counts[j][i] = c;
                }
            }
            let mut items = Vec::new();
            for (i, row) in counts.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    for _ in 0..c {
                        items.push(vec![i, j]);
                    }
                }
            }
            let total: f64 = items.len() as f64;
            let po: f64 = (0..k).map(|i| counts[i][i] as f64).sum::<f64>() / total;
            let pe: f64 = (0..k)
                .map(|i| {
                    let a: f64 = counts[i].iter().sum::<usize>() as f64 / total;
                    let b: f64 = counts.iter().map(|r| r[i]).sum::<usize>() as f64 / total;
                    a * b
                })
                .sum();
            let cohen = (po - pe) / (1.0 - pe);
            let fleiss = fleiss_kappa(&items, None).unwrap().kappa;
            assert_relative_eq!(fleiss, cohen, epsilon = 1e-10);
        }
    }

    #[test]
    fn random_ratings_hover_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sum = 0.0;
        let draws = 60;
        for _ in 0..draws {
            let items: Vec<Vec<usize>> = (0..40)
                .map(|_| (0..3).map(|_| rng.gen_range(0..3usize)).collect())
                .collect();
            sum += fleiss_kappa(&items, None).unwrap().kappa;
        }
        assert!(
            (sum / draws as f64).abs() < 0.04,
            "mean kappa {}",
            sum / draws as f64
        );
    }

    #[test]
    fn pairwise_covers_every_pair() {
        let items = vec![vec![0, 1, 0], vec![1, 1, 0], vec![0, 0, 1], vec![1, 0, 1]];
        let table = pairwise_kappa(&items).unwrap();
        let pairs: Vec<(usize, usize)> = table.iter().map(|(a, b, _)| (*a, *b)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
    }

    fn two_by_two(a: usize, b: usize, c: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        // group x=0: a successes, b failures; group x=1: c successes, d failures
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (ind, succ, fail) in [(0.0, a, b), (1.0, c, d)] {
            for _ in 0..succ {
                x.push(vec![1.0, ind]);
                y.push(1.0);
            }
            for _ in 0..fail {
                x.push(vec![1.0, ind]);
                y.push(0.0);
            }
        }
        (x, y)
    }

    #[test]
    fn slope_matches_log_odds_ratio_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (a, b, c, d) = (
                rng.gen_range(2..30usize),
                rng.gen_range(2..30usize),
                rng.gen_range(2..30usize),
                rng.gen_range(2..30usize),
            );
            let (x, y) = two_by_two(a, b, c, d);
            let fit = glm_fit_logistic(&x, &y).unwrap();
            let want = ((c as f64 * b as f64) / (d as f64 * a as f64)).ln();
            assert_relative_eq!(fit.coefficients[1], want, epsilon = 1e-6);
            assert_relative_eq!(fit.odds_ratios[1].0, want.exp(), epsilon = 1e-5);
            assert!(fit.odds_ratios[1].1 <= fit.odds_ratios[1].2);
            assert!(fit.converged);
        }
    }

    #[test]
    fn intercept_only_recovers_logit_of_mean() {
        let y = vec![1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let x = vec![vec![1.0]; y.len()];
        let fit = glm_fit_logistic(&x, &y).unwrap();
        let mean: f64 = y.iter().sum::<f64>() / y.len() as f64;
        assert_relative_eq!(
            fit.coefficients[0],
            (mean / (1.0 - mean)).ln(),
            epsilon = 1e-8
        );
    }

    fn direct_deviance(x: &[Vec<f64>], y: &[f64], beta: &[f64]) -> f64 {
        let mut ll = 0.0;
        for (row, &t) in x.iter().zip(y) {
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            let mu = (1.0 / (1.0 + (-eta).exp())).clamp(1e-12, 1.0 - 1e-12);
            ll += t * mu.ln() + (1.0 - t) * (1.0 - mu).ln();
        }
        -2.0 * ll
    }

    #[test]
    fn deviance_matches_grid_search_mle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![1.0, rng.gen_range(-1.5..1.5)])
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|row| {
                let p = 1.0 / (1.0 + (-(0.4 + 1.1 * row[1])).exp());
                f64::from(rng.gen_range(0.0..1.0) < p)
            })
            .collect();
        let fit = glm_fit_logistic(&x, &y).unwrap();

        let mut centre = [0.0f64, 0.0];
        let mut half = 5.0;
        let mut best = f64::INFINITY;
        for _ in 0..9 {
            let step = half / 10.0;
            let mut arg = centre;
            for i in 0..21 {
                for j in 0..21 {
                    let b = [
                        centre[0] - half + i as f64 * step,
                        centre[1] - half + j as f64 * step,
                    ];
                    let d = direct_deviance(&x, &y, &b);
                    if d < best {
                        best = d;
                        arg = b;
                    }
                }
            }
            centre = arg;
            half = 2.0 * step;
        }
        assert!(
            (best - fit.deviance).abs() < 1e-6,
            "grid {best} vs irls {}",
            fit.deviance
        );
    }

    #[test]
    fn complete_separation_is_an_error() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![1.0, f64::from(i >= 6)])
            .collect();
        let y: Vec<f64> = (0..12).map(|i| f64::from(i >= 6)).collect();
        assert!(glm_fit_logistic(&x, &y).is_err());
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let x: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let v = (i % 3) as f64;
                vec![1.0, v, v]
            })
            .collect();
        let y: Vec<f64> = (0..10).map(|i| f64::from(i % 2 == 0)).collect();
        assert!(glm_fit_logistic(&x, &y).is_err());
    }

    #[test]
    fn anova_matches_direct_log_likelihood_on_hand_data() {
        // grouped closed form: p0 = 1/2 over four rows, p1 = 3/4 over four
        let x_col = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let y = vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        let table =
            anova_deviance(&[("group".to_string(), vec![x_col])], &y).unwrap();
        let ll_full = 2.0 * 0.5f64.ln() + 2.0 * 0.5f64.ln()
            + 3.0 * 0.75f64.ln()
            + 0.25f64.ln();
        let p_null: f64 = 5.0 / 8.0;
        let ll_null = 5.0 * p_null.ln() + 3.0 * (1.0 - p_null).ln();
        let want = 2.0 * (ll_full - ll_null);
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].df, 1);
        assert_eq!(table[0].residual_df, 6);
        assert_relative_eq!(table[0].delta_deviance, want, epsilon = 1e-6);
        assert!(table[0].p > 0.0 && table[0].p < 1.0);
    }

    #[test]
    fn null_term_deviance_drop_behaves_like_chi_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut sum = 0.0;
        let sims = 120;
        for _ in 0..sims {
            let noise: Vec<f64> = (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..60).map(|_| f64::from(rng.gen_bool(0.5))).collect();
            let table =
                anova_deviance(&[("noise".to_string(), vec![noise])], &y).unwrap();
            sum += table[0].delta_deviance;
        }
        let mean = sum / sims as f64;
        assert!((mean - 1.0).abs() < 0.35, "mean delta deviance {mean}");
    }

    #[test]
    fn anova_rejects_duplicate_term() {
        let col = vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let y = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let terms = vec![
            ("a".to_string(), vec![col.clone()]),
            ("a again".to_string(), vec![col]),
        ];
        assert!(anova_deviance(&terms, &y).is_err());
    }

    #[test]
    fn ratings_round_trip_and_design_coding() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.tsv");
        std::fs::write(
            &path,
            "r_a\ts1\tgenerated\treadability\tNo Finding\n\
             r_b\ts1\tradiologist\trecall,precision\tAtelectasis\n\
             r_a\ts2\tnone\t-\tPneumonia\n\
             r_b\ts2\tgenerated\treadability\tPneumonia,Atelectasis\n",
        )
        .unwrap();
        let records = read_ratings(&path).unwrap();
        assert_eq!(records.len(), 4);
        assert_eq!(records[0].outcome(), 1.0);
        assert_eq!(records[1].outcome(), 0.0);
        assert_eq!(records[2].outcome(), 1.0);

        let (items, raters) = ratings_to_items(&records).unwrap();
        assert_eq!(raters, vec!["r_a".to_string(), "r_b".to_string()]);
        assert_eq!(items, vec![vec![1, 0], vec![2, 1]]);

        let (x, y, names) = ratings_design(&records).unwrap();
        assert_eq!(names[0], "intercept");
        assert!(names.iter().all(|n| n != "reason[readability]"));
        assert!(names.iter().all(|n| n != "finding[No Finding]"));
        assert!(names.iter().any(|n| n == "rater[r_b]"));
        assert_eq!(x.len(), y.len());
        // row expansion: 1 + 2 + 1 + 2 rows
        assert_eq!(x.len(), 6);

        // malformed: reasons present with no preference
        std::fs::write(&path, "r_a\ts1\tnone\treadability\tNo Finding\n").unwrap();
        assert!(read_ratings(&path).is_err());
    }
}

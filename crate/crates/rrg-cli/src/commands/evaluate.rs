//! Report decoding, metric evaluation, and the complexity accountant.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rrg_core::corpus::{read_split, IMAGE_SIZE};
use rrg_core::model::{
    assemble_prompt, generate, relative_complexity, split_sections, DecodeMode,
};
use rrg_core::rewards::{
    composite_reward, paired_significance, weighted_score, MetricReport, ReportSections,
    RewardSpec,
};

use crate::artifacts::{load_bundle, read_reports, reportable, write_reports, GeneratedReport};
use crate::error::{CliError, Result};
use crate::{ComplexityArgs, EvalMetricsArgs, GenerateArgs};

#[allow(clippy::too_many_arguments)]
pub fn decode_split(
    data: &Path,
    split: &str,
    snapshot: &Path,
    vocab: &Path,
    model_config: &Path,
    out: &Path,
    seed: u64,
    limit: Option<usize>,
    mode: DecodeMode,
) -> Result<usize> {
    let studies = read_split(data, split)?;
    let (config, tokenizer, model) = load_bundle(model_config, vocab, snapshot, IMAGE_SIZE)?;
    let mut reports = Vec::new();
    for study in reportable(&studies)
        .into_iter()
        .take(limit.unwrap_or(usize::MAX))
    {
        let bundle = assemble_prompt(study, &model, &tokenizer, seed)?;
        let emitted = generate(&model, &bundle, mode, config.max_generated, seed)?;
        let mut completion = vec![config.bos_id];
        completion.extend(emitted.iter().copied());
        let (findings, impression) = match split_sections(&completion, &config) {
            Ok((f, i)) => (tokenizer.decode(&f), tokenizer.decode(&i)),
            // malformed completions are kept verbatim rather than dropped
            Err(_) => (tokenizer.decode(&emitted), String::new()),
        };
        reports.push(GeneratedReport {
            study_id: study.study_id.clone(),
            findings,
            impression,
        });
    }
    write_reports(&reports, out)?;
    Ok(reports.len())
}

pub fn generate_reports(args: &GenerateArgs) -> Result<()> {
    let mode = if args.sample {
        DecodeMode::Sample {
            temperature: args.temperature,
        }
    } else {
        DecodeMode::Greedy
    };
    let count = decode_split(
        &args.data,
        &args.split,
        &args.snapshot,
        &args.vocab,
        &args.model_config,
        &args.out,
        args.seed,
        args.limit,
        mode,
    )?;
    println!("decoded {count} reports to {}", args.out.display());
    Ok(())
}

fn parse_model_spec(spec: &str) -> Result<(String, PathBuf)> {
    let (name, path) = spec.split_once('=').ok_or_else(|| {
        CliError::Invalid(format!("model spec '{spec}' must be name=reports.jsonl"))
    })?;
    Ok((name.to_string(), PathBuf::from(path)))
}

/// Scores each model's reports against the split references and runs the
/// ANOVA / Tukey harness on the weighted composite when several models are
/// compared. Writes metrics.tsv and metrics.json under `out`.
pub fn eval_metrics_core(
    data: &Path,
    split: &str,
    models: &[(String, PathBuf)],
    out: &Path,
    limit: Option<usize>,
) -> Result<MetricReport> {
    let studies = read_split(data, split)?;
    let spec = RewardSpec::default();
    let references: Vec<(&str, ReportSections)> = reportable(&studies)
        .into_iter()
        .take(limit.unwrap_or(usize::MAX))
        .map(|s| {
            (
                s.study_id.as_str(),
                ReportSections::new(
                    s.section("findings").unwrap_or_default(),
                    s.section("impression").unwrap_or_default(),
                ),
            )
        })
        .collect();
    if references.is_empty() {
        return Err(CliError::Invalid(format!(
            "split '{split}' has no studies with reference sections"
        )));
    }

    let loaded: Vec<_> = models
        .iter()
        .map(|(name, path)| read_reports(path).map(|r| (name.clone(), r)))
        .collect::<Result<_>>()?;
    let shared: Vec<&(&str, ReportSections)> = references
        .iter()
        .filter(|(id, _)| loaded.iter().all(|(_, r)| r.contains_key(*id)))
        .collect();
    if shared.is_empty() {
        return Err(CliError::Invalid(
            "no study is covered by every model's reports".into(),
        ));
    }

    let mut means = Vec::new();
    let mut weighted = Vec::new();
    for (_, reports) in &loaded {
        let mut sums = vec![0.0; spec.components.len()];
        let mut per_study = Vec::with_capacity(shared.len());
        for (id, reference) in shared.iter() {
            let report = &reports[*id];
            let generated =
                ReportSections::new(report.findings.clone(), report.impression.clone());
            let scores = composite_reward(&generated, reference, &spec)?;
            for (s, v) in sums.iter_mut().zip(&scores) {
                *s += v;
            }
            per_study.push(weighted_score(&scores, &spec));
        }
        means.push(
            sums.iter()
                .map(|s| s / shared.len() as f64)
                .collect::<Vec<f64>>(),
        );
        weighted.push(per_study);
    }

    let significance = if models.len() >= 2 && shared.len() >= 2 {
        Some(paired_significance(&weighted)?)
    } else {
        None
    };
    let report = MetricReport {
        models: models.iter().map(|(n, _)| n.clone()).collect(),
        metrics: spec.names().iter().map(|s| s.to_string()).collect(),
        means,
        significance,
    };

    std::fs::create_dir_all(out)?;
    let mut tsv = std::fs::File::create(out.join("metrics.tsv"))?;
    writeln!(tsv, "model\t{}\tweighted", report.metrics.join("\t"))?;
    for (i, model) in report.models.iter().enumerate() {
        let cells: Vec<String> = report.means[i].iter().map(|v| format!("{v:.6}")).collect();
        let w = weighted[i].iter().sum::<f64>() / weighted[i].len() as f64;
        writeln!(tsv, "{model}\t{}\t{w:.6}", cells.join("\t"))?;
    }

    let json = serde_json::json!({
        "models": report.models,
        "metrics": report.metrics,
        "means": report.means,
        "studies": shared.len(),
        "significance": report.significance.as_ref().map(|s| serde_json::json!({
            "anova": {
                "f": s.anova.f,
                "df_between": s.anova.df_between,
                "df_within": s.anova.df_within,
                "p": s.anova.p,
            },
            "pairwise": s.pairwise.iter().map(|p| serde_json::json!({
                "a": report.models[p.a],
                "b": report.models[p.b],
                "mean_diff": p.mean_diff,
                "q": p.q,
                "p": p.p,
            })).collect::<Vec<_>>(),
        })),
    });
    std::fs::write(
        out.join("metrics.json"),
        serde_json::to_string_pretty(&json).map_err(|e| CliError::Invalid(e.to_string()))?,
    )?;
    Ok(report)
}

pub fn eval_metrics(args: &EvalMetricsArgs) -> Result<MetricReport> {
    let models: Vec<(String, PathBuf)> = args
        .models
        .iter()
        .map(|s| parse_model_spec(s))
        .collect::<Result<_>>()?;
    let report = eval_metrics_core(&args.data, &args.split, &models, &args.out, args.limit)?;
    println!("model\t{}", report.metrics.join("\t"));
    for (i, model) in report.models.iter().enumerate() {
        let cells: Vec<String> = report.means[i].iter().map(|v| format!("{v:.4}")).collect();
        println!("{model}\t{}", cells.join("\t"));
    }
    if let Some(sig) = &report.significance {
        println!(
            "anova F({},{}) = {:.4}, p = {:.4}",
            sig.anova.df_between, sig.anova.df_within, sig.anova.f, sig.anova.p
        );
        for p in &sig.pairwise {
            println!(
                "tukey {} vs {}: diff {:.4}, q {:.3}, p {:.4}",
                report.models[p.a], report.models[p.b], p.mean_diff, p.q, p.p
            );
        }
    }
    Ok(report)
}

pub fn complexity(args: &ComplexityArgs) -> Result<()> {
    for part in args.lens.split(',') {
        let len: usize = part
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("bad length '{part}'")))?;
        let (ratio, reduction) = relative_complexity(len, args.baseline)?;
        println!(
            "{len} vs {}: ratio {ratio:.3} ({:.1}% reduction)",
            args.baseline,
            reduction * 100.0
        );
    }
    Ok(())
}

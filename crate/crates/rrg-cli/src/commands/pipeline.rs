//! The resumable experiment pipeline: gen-data, train-sft (with checkpoint
//! selection), train-grpo, eval-metrics. Each completed stage is recorded in
//! the run manifest with content hashes and skipped on re-entry.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rrg_core::model::DecodeMode;

use crate::artifacts::{MODEL_CONFIG_FILE, VOCAB_FILE};
use crate::commands::{data, evaluate, training};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::{sha256_file, RunManifest};
use crate::PipelineArgs;

fn info_map(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn stage_path(manifest: &RunManifest, stage: &str, key: &str, run: &Path) -> Result<PathBuf> {
    let record = manifest
        .stages
        .get(stage)
        .ok_or_else(|| CliError::Invalid(format!("stage '{stage}' has not run")))?;
    let value = record
        .info
        .get(key)
        .ok_or_else(|| CliError::Invalid(format!("stage '{stage}' recorded no '{key}'")))?;
    Ok(run.join(value))
}

/// Runs (or resumes) the full pipeline and returns the manifest content
/// hash. Every stage failure leaves earlier artifacts and the manifest
/// intact.
pub fn execute(config: &RunConfig, run: &Path) -> Result<String> {
    std::fs::create_dir_all(run)?;
    let config_path = run.join("config.toml");
    if config_path.exists() {
        let existing = RunConfig::load(&config_path)?;
        let same = toml::to_string(&existing).ok() == toml::to_string(config).ok();
        if !same {
            return Err(CliError::Invalid(
                "run directory holds a different config; use a fresh directory".into(),
            ));
        }
    } else {
        config.save(&config_path)?;
    }
    let mut manifest = RunManifest::load_or_new(run, config.seed)?;
    manifest.config_sha256 = sha256_file(&config_path)?;

    let data_dir = run.join("data");
    if !manifest.stage_done("gen-data") {
        println!("stage gen-data");
        let splits = data::write_dataset(
            &data_dir,
            config.corpus.studies,
            config.corpus.prior_probability,
            config.corpus.fractions,
            config.seed,
        )
        .map_err(|e| CliError::Invalid(format!("stage gen-data failed: {e}")))?;
        let outputs: Vec<PathBuf> = ["train", "validation", "test"]
            .iter()
            .flat_map(|s| {
                [
                    data_dir.join(format!("{s}.jsonl")),
                    data_dir.join(format!("{s}.manifest.json")),
                ]
            })
            .collect();
        let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
        manifest.record_stage(
            run,
            "gen-data",
            &refs,
            info_map(&[
                ("train", splits.train.len().to_string()),
                ("validation", splits.validation.len().to_string()),
                ("test", splits.test.len().to_string()),
            ]),
        )?;
    }

    let sft_dir = run.join("sft");
    if !manifest.stage_done("train-sft") {
        println!("stage train-sft");
        let summary = training::sft_into_dir(&data_dir, &sft_dir, config)
            .map_err(|e| CliError::Invalid(format!("stage train-sft failed: {e}")))?;
        let outputs = [
            summary.best_snapshot.clone(),
            summary.vocab.clone(),
            summary.model_config.clone(),
            sft_dir.join("checkpoint.json"),
            sft_dir.join("sft_val.tsv"),
        ];
        let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
        manifest.record_stage(
            run,
            "train-sft",
            &refs,
            info_map(&[
                (
                    "best_checkpoint",
                    format!(
                        "sft/{}",
                        summary.best_snapshot.file_name().unwrap_or_default()
                            .to_string_lossy()
                    ),
                ),
                ("best_score", summary.best_score.to_string()),
            ]),
        )?;
    }

    let best_sft = stage_path(&manifest, "train-sft", "best_checkpoint", run)?;
    let vocab = sft_dir.join(VOCAB_FILE);
    let model_config = sft_dir.join(MODEL_CONFIG_FILE);

    let grpo_dir = run.join("grpo");
    if !manifest.stage_done("train-grpo") {
        println!("stage train-grpo");
        let summary = training::grpo_into_dir(
            &data_dir,
            &grpo_dir,
            &best_sft,
            &vocab,
            &model_config,
            config,
        )
        .map_err(|e| CliError::Invalid(format!("stage train-grpo failed: {e}")))?;
        let outputs = [
            summary.final_snapshot.clone(),
            grpo_dir.join("grpo_summary.json"),
        ];
        let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
        manifest.record_stage(
            run,
            "train-grpo",
            &refs,
            info_map(&[(
                "final_snapshot",
                format!(
                    "grpo/{}",
                    summary.final_snapshot.file_name().unwrap_or_default()
                        .to_string_lossy()
                ),
            )]),
        )?;
    }

    let grpo_final = stage_path(&manifest, "train-grpo", "final_snapshot", run)?;
    let eval_dir = run.join("eval");
    if !manifest.stage_done("eval-metrics") {
        println!("stage eval-metrics");
        std::fs::create_dir_all(&eval_dir)?;
        let mut reports = Vec::new();
        for (name, snapshot) in [("sft", &best_sft), ("grpo", &grpo_final)] {
            let out = eval_dir.join(format!("{name}_reports.jsonl"));
            evaluate::decode_split(
                &data_dir,
                "test",
                snapshot,
                &vocab,
                &model_config,
                &out,
                config.seed,
                config.limits.eval_studies,
                DecodeMode::Greedy,
            )
            .map_err(|e| CliError::Invalid(format!("stage eval-metrics failed: {e}")))?;
            reports.push((name.to_string(), out));
        }
        evaluate::eval_metrics_core(
            &data_dir,
            "test",
            &reports,
            &eval_dir,
            config.limits.eval_studies,
        )
        .map_err(|e| CliError::Invalid(format!("stage eval-metrics failed: {e}")))?;
        let outputs = [
            eval_dir.join("metrics.tsv"),
            eval_dir.join("metrics.json"),
            eval_dir.join("sft_reports.jsonl"),
            eval_dir.join("grpo_reports.jsonl"),
        ];
        let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
        manifest.record_stage(run, "eval-metrics", &refs, BTreeMap::new())?;
    }

    manifest.save(run)?;
    manifest.content_hash()
}

pub fn run_pipeline(args: &PipelineArgs) -> Result<String> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let hash = execute(&config, &args.run)?;
    println!("manifest hash {hash}");
    Ok(hash)
}

//! Corpus generation and split persistence.

use std::path::Path;

use rrg_core::corpus::{generate_corpus, split_dataset, write_split, SplitSet};

use crate::error::{CliError, Result};
use crate::GenDataArgs;

pub fn parse_fractions(text: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Invalid(format!("bad fraction '{p}'")))
        })
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        return Err(CliError::Invalid(
            "fractions must be three comma-separated numbers".into(),
        ));
    }
    Ok([parts[0], parts[1], parts[2]])
}

pub fn write_dataset(
    out: &Path,
    studies: usize,
    prior_prob: f64,
    fractions: [f64; 3],
    seed: u64,
) -> Result<SplitSet> {
    let corpus = generate_corpus(studies, prior_prob, seed);
    let splits = split_dataset(&corpus, fractions, seed)?;
    std::fs::create_dir_all(out)?;
    write_split(&splits.train, out, "train", seed)?;
    write_split(&splits.validation, out, "validation", seed)?;
    write_split(&splits.test, out, "test", seed)?;
    Ok(splits)
}

pub fn gen_data(args: &GenDataArgs) -> Result<()> {
    let fractions = parse_fractions(&args.fractions)?;
    let splits = write_dataset(&args.out, args.studies, args.prior_prob, fractions, args.seed)?;
    println!(
        "wrote {} train / {} validation / {} test studies to {}",
        splits.train.len(),
        splits.validation.len(),
        splits.test.len(),
        args.out.display()
    );
    Ok(())
}

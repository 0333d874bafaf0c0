//! The report-generation network: frozen patch encoder, latent-query
//! adapter, structured prompt assembly, hybrid-mask decoder, generation,
//! and the attention-complexity accountant.

mod blocks;
pub mod config;
pub mod embed;
pub mod encoder;
mod infer;
mod init;
pub mod net;
pub mod prompt;
pub mod qadapter;
pub mod tokenizer;

pub use config::{ModelConfig, BOS_ID, EOS_ID, PAD_ID, SEP_ID};
pub use embed::{time_delta_embedding, time_delta_feature, SourceId, ALL_SOURCES, N_SOURCES};
pub use encoder::{encode_patches, make_patch_projection};
pub use infer::{generate, DecodeMode, InferSession};
pub use net::{hybrid_attention_mask, relative_complexity, split_sections, Model};
pub use prompt::{assemble_prompt, image_subsample, PromptBundle, PromptContent, PromptPosition};
pub use qadapter::QAdapter;
pub use tokenizer::{word_split, Tokenizer};

/// Teacher-forcing target: BOS findings SEP impression EOS.
pub fn target_tokens(
    study: &crate::corpus::StudyRecord,
    tokenizer: &Tokenizer,
    config: &ModelConfig,
) -> crate::error::Result<Vec<usize>> {
    let findings = study.section("findings").ok_or_else(|| {
        crate::error::CoreError::InvalidArgument("study has no findings section".into())
    })?;
    let impression = study.section("impression").ok_or_else(|| {
        crate::error::CoreError::InvalidArgument("study has no impression section".into())
    })?;
    let mut out = vec![config.bos_id];
    out.extend(tokenizer.encode(findings)?);
    out.push(config.sep_id);
    out.extend(tokenizer.encode(impression)?);
    out.push(config.eos_id);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::corpus::{generate_corpus, StudyRecord, View};
    use crate::numkit::{gradcheck::grad_check, ops, Array, Var};

    fn tiny_config(vocab: usize) -> ModelConfig {
        let mut c = ModelConfig::toy(vocab);
        c.d_model = 8;
        c.heads = 2;
        c.d_ff = 16;
        c.d_v = 8;
        c.n_p = 4;
        c.n_q = 2;
        c.adapter_ff = 16;
        c.td_inner = 4;
        c
    }

    fn tiny_setup() -> (Vec<StudyRecord>, Tokenizer, Model) {
        let corpus = generate_corpus(4, 1.0, 17);
        let tok = Tokenizer::build(&corpus);
        let config = tiny_config(tok.vocab_size());
        let model = Model::new(&config, 64).unwrap();
        (corpus, tok, model)
    }

    #[test]
    fn qadapter_paper_shapes() {
        let mut config = ModelConfig::paper_shapes(16);
        // head count is irrelevant to the shape contract; fewer heads keeps
        // the attention graph small
        config.heads = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let adapter = QAdapter::new(&config, &mut rng);
        let mut vrng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f64> = (0..config.n_p * config.d_v)
            .map(|_| vrng.gen_range(-0.5..0.5))
            .collect();
        let v = Var::constant(Array::new(vec![config.n_p, config.d_v], data).unwrap());
        let out = adapter.forward(&v).unwrap();
        assert_eq!(out.value().shape(), &[128, 3072]);
    }

    #[test]
    fn qadapter_row_count_independent_of_patch_count() {
        let mut config = tiny_config(16);
        config.n_q = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let adapter = QAdapter::new(&config, &mut rng);
        for n_p in [1usize, 4, 7, 64] {
            let data: Vec<f64> = (0..n_p * config.d_v).map(|i| (i as f64).sin()).collect();
            let v = Var::constant(Array::new(vec![n_p, config.d_v], data).unwrap());
            let out = adapter.forward(&v).unwrap();
            assert_eq!(out.value().shape(), &[8, config.d_model]);
        }
    }

    #[test]
    fn qadapter_gradient_matches_finite_differences() {
        let config = tiny_config(16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let adapter = QAdapter::new(&config, &mut rng);
        let data: Vec<f64> = (0..config.n_p * config.d_v)
            .map(|i| ((i * 13 % 17) as f64 - 8.0) / 10.0)
            .collect();
        let v = Array::new(vec![config.n_p, config.d_v], data).unwrap();
        let params = adapter.parameters();
        let report = grad_check(
            &params,
            || ops::sum_all(&adapter.forward(&Var::constant(v.clone()))?),
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed(), "failures: {:?}", report.failures);
    }

    #[test]
    fn hybrid_mask_enumeration() {
        let m = hybrid_attention_mask(3, 0);
        assert!(m.iter().all(|r| r.iter().all(|&b| b)));
        let m = hybrid_attention_mask(2, 2);
        let want = [
            [true, true, false, false],
            [true, true, false, false],
            [true, true, true, false],
            [true, true, true, true],
        ];
        for (row, wrow) in m.iter().zip(&want) {
            assert_eq!(row.as_slice(), wrow.as_slice());
        }
    }

    #[test]
    fn prompt_ordering_rules() {
        let (corpus, tok, model) = tiny_setup();
        let study = corpus
            .iter()
            .find(|s| s.prior.is_some() && s.images.iter().any(|i| i.view == View::Lateral))
            .expect("corpus contains a prior-bearing multi-view study");
        let bundle = assemble_prompt(study, &model, &tok, 0).unwrap();

        for (i, p) in bundle.positions.iter().enumerate() {
            assert_eq!(p.position_id, i);
        }
        let sources: Vec<SourceId> = bundle.positions.iter().map(|p| p.source).collect();
        // prior text, then prior images, then study text, then study images
        let first_study_text = sources
            .iter()
            .position(|s| *s == SourceId::Indication)
            .unwrap();
        let last_prior = sources
            .iter()
            .rposition(|s| {
                matches!(
                    s,
                    SourceId::PriorFindings | SourceId::PriorImpression | SourceId::PriorImages
                )
            })
            .unwrap();
        assert!(last_prior < first_study_text);
        let first_study_image = sources
            .iter()
            .position(|s| *s == SourceId::StudyImages)
            .unwrap();
        let last_study_text = sources
            .iter()
            .rposition(|s| {
                matches!(
                    s,
                    SourceId::Indication
                        | SourceId::History
                        | SourceId::Comparison
                        | SourceId::Technique
                )
            })
            .unwrap();
        assert!(last_study_text < first_study_image);
        // study images close the prompt, frontal rows last
        assert_eq!(*sources.last().unwrap(), SourceId::StudyImages);
        // prior positions carry the prior delta, study positions zero
        let delta = (study.timestamp - study.prior.as_ref().unwrap().timestamp) as f64;
        for p in &bundle.positions {
            let expected = match p.source {
                SourceId::PriorFindings | SourceId::PriorImpression | SourceId::PriorImages => {
                    delta
                }
                _ => 0.0,
            };
            assert_eq!(p.delta_seconds, expected);
        }
    }

    #[test]
    fn prompt_rejects_reversed_timestamps() {
        let (corpus, tok, model) = tiny_setup();
        let mut study = corpus
            .iter()
            .find(|s| s.prior.is_some())
            .cloned()
            .unwrap();
        study.prior.as_mut().unwrap().timestamp = study.timestamp + 1;
        assert!(assemble_prompt(&study, &model, &tok, 0).is_err());
    }

    #[test]
    fn image_subsample_contracts() {
        let items: Vec<usize> = (0..8).collect();
        assert_eq!(image_subsample(&items[..3], 5, 0), vec![0, 1, 2]);
        let picked = image_subsample(&items, 5, 9);
        assert_eq!(picked.len(), 5);
        let mut distinct = picked.clone();
        distinct.dedup();
        assert_eq!(distinct.len(), 5);
        assert_eq!(picked, image_subsample(&items, 5, 9));
    }

    #[test]
    fn empty_generated_stream_gives_one_logit_row() {
        let (corpus, tok, model) = tiny_setup();
        let bundle = assemble_prompt(&corpus[0], &model, &tok, 0).unwrap();
        let logits = model.decoder_forward(&bundle, &[]).unwrap();
        assert_eq!(
            logits.value().shape(),
            &[1, model.config.vocab_size]
        );
    }

    #[test]
    fn prompt_permutation_invariance() {
        let (corpus, tok, model) = tiny_setup();
        let mut bundle = assemble_prompt(&corpus[0], &model, &tok, 0).unwrap();
        let generated = [model.config.bos_id, 5, 6];
        let base = model.decoder_forward(&bundle, &generated).unwrap().value_clone();
        // swap two prompt positions in storage, keeping their ids/sources
        let l = bundle.len();
        bundle.positions.swap(1, l - 2);
        bundle.positions.swap(0, l / 2);
        let permuted = model.decoder_forward(&bundle, &generated).unwrap().value_clone();
        for (a, b) in base.data().iter().zip(permuted.data()) {
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn later_tokens_do_not_affect_earlier_logits() {
        let (corpus, tok, model) = tiny_setup();
        let bundle = assemble_prompt(&corpus[0], &model, &tok, 0).unwrap();
        let a = model
            .decoder_forward(&bundle, &[model.config.bos_id, 5, 6])
            .unwrap()
            .value_clone();
        let b = model
            .decoder_forward(&bundle, &[model.config.bos_id, 5, 9])
            .unwrap()
            .value_clone();
        // rows 0..3 predict tokens up to index 2 and precede the change
        let v = model.config.vocab_size;
        for r in 0..3 {
            for c in 0..v {
                assert_eq!(a.at(r, c), b.at(r, c));
            }
        }
    }

    #[test]
    fn decoder_gradient_matches_finite_differences() {
        let (corpus, tok, model) = tiny_setup();
        let study = &corpus[1];
        let targets = target_tokens(study, &tok, &model.config).unwrap();
        let mask = vec![1u8; targets.len()];
        // a representative parameter subset; the full sweep runs in the
        // acceptance suite
        let all = model.parameters();
        let subset: Vec<_> = all
            .iter()
            .filter(|p| {
                matches!(
                    p.name.as_str(),
                    "td_w1" | "src_embed" | "adapter.queries" | "decoder.layer0.wq" | "final_norm"
                )
            })
            .cloned()
            .collect();
        assert_eq!(subset.len(), 5);
        let report = grad_check(
            &subset,
            || {
                let bundle = assemble_prompt(study, &model, &tok, 0)?;
                let logits = model.decoder_forward(&bundle, &targets)?;
                let rows = targets.len();
                let pred = ops::slice_rows(&logits, 0, rows)?;
                ops::cross_entropy(&pred, &targets, &mask)
            },
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed(), "failures: {:?}", report.failures);
    }

    #[test]
    fn fast_path_matches_graph_forward() {
        let (corpus, tok, model) = tiny_setup();
        for study in corpus.iter().take(2) {
            let bundle = assemble_prompt(study, &model, &tok, 0).unwrap();
            let generated = [model.config.bos_id, 7, model.config.sep_id, 9];
            let graph = model.decoder_forward(&bundle, &generated).unwrap().value_clone();

            let mut session = InferSession::start(&model, &bundle).unwrap();
            let mut fast_rows = vec![session.logits().to_vec()];
            for &t in &generated {
                fast_rows.push(session.push(t).unwrap().to_vec());
            }
            // graph rows r predict generated[r]; fast row r is produced
            // before generated[r] is pushed
            for (r, fast) in fast_rows.iter().take(generated.len() + 1).enumerate() {
                for (c, f) in fast.iter().enumerate() {
                    assert_relative_eq!(graph.at(r, c), *f, max_relative = 1e-9, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let (corpus, tok, model) = tiny_setup();
        let bundle = assemble_prompt(&corpus[0], &model, &tok, 0).unwrap();
        let g1 = generate(&model, &bundle, DecodeMode::Greedy, 20, 0).unwrap();
        let g2 = generate(&model, &bundle, DecodeMode::Greedy, 20, 99).unwrap();
        assert_eq!(g1, g2);
        let s1 = generate(&model, &bundle, DecodeMode::Sample { temperature: 1.0 }, 20, 7).unwrap();
        let s2 = generate(&model, &bundle, DecodeMode::Sample { temperature: 1.0 }, 20, 7).unwrap();
        assert_eq!(s1, s2);
        assert!(!g1.is_empty() && g1.len() <= 20);
    }

    #[test]
    fn rigged_eos_stops_immediately() {
        // all-equal logits tie-break to the lowest id; making that id EOS
        // ends generation after one emitted token
        let corpus = generate_corpus(1, 0.0, 8);
        let tok = Tokenizer::build(&corpus);
        let mut config = tiny_config(tok.vocab_size());
        config.eos_id = 0;
        config.pad_id = 1;
        config.bos_id = 2;
        config.sep_id = 3;
        let model = Model::new(&config, 64).unwrap();
        model.lm_head.set_value(Array::zeros(vec![config.d_model, config.vocab_size]));
        let bundle = assemble_prompt(&corpus[0], &model, &tok, 0).unwrap();
        let out = generate(&model, &bundle, DecodeMode::Greedy, 20, 0).unwrap();
        assert_eq!(out, vec![config.eos_id]);
    }

    #[test]
    fn split_sections_contract() {
        let config = tiny_config(16);
        let (bos, sep, eos) = (config.bos_id, config.sep_id, config.eos_id);
        let (f, i) = split_sections(&[bos, 5, 6, sep, 7, eos], &config).unwrap();
        assert_eq!(f, vec![5, 6]);
        assert_eq!(i, vec![7]);
        assert!(split_sections(&[bos, 5, eos], &config).is_err());
        assert!(split_sections(&[bos, sep, sep, eos], &config).is_err());
        assert!(split_sections(&[bos, 5, sep, 6], &config).is_err());
    }

    #[test]
    fn relative_complexity_published_values() {
        let (r1, red1) = relative_complexity(3586, 6407).unwrap();
        assert_relative_eq!((r1 * 1000.0).round() / 1000.0, 0.313);
        assert_relative_eq!((red1 * 1000.0).round() / 1000.0, 0.687);
        let (r2, red2) = relative_complexity(607, 6407).unwrap();
        assert_relative_eq!((r2 * 1000.0).round() / 1000.0, 0.009);
        assert_relative_eq!((red2 * 1000.0).round() / 1000.0, 0.991);
        let (r3, red3) = relative_complexity(6407, 6407).unwrap();
        assert_eq!(r3, 1.0);
        assert_eq!(red3, 0.0);
        assert!(relative_complexity(10, 0).is_err());
    }

    #[test]
    fn frontal_occupies_largest_image_position() {
        let (corpus, tok, model) = tiny_setup();
        for study in &corpus {
            let bundle = assemble_prompt(study, &model, &tok, 0).unwrap();
            // the last n_q positions belong to the frontal study image
            let tail = &bundle.positions[bundle.len() - model.config.n_q..];
            assert!(tail
                .iter()
                .all(|p| p.source == SourceId::StudyImages));
        }
    }
}

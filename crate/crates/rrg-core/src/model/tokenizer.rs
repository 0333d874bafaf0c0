//! Word-level tokeniser with a corpus-built vocabulary.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::corpus::StudyRecord;
use crate::error::{CoreError, Result};

use super::config::{BOS_ID, EOS_ID, PAD_ID, SEP_ID};

pub const SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<sep>", "<eos>"];

#[derive(Debug, Clone)]
pub struct Tokenizer {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

/// Whitespace split, with punctuation characters peeled off as their own
/// tokens.
pub fn word_split(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        for ch in word.chars() {
            if ch.is_ascii_punctuation() && ch != '-' {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
                out.push(ch.to_string());
            } else {
                current.push(ch);
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    out
}

impl Tokenizer {
    fn from_words(words: BTreeSet<String>) -> Self {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(words);
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Tokenizer { tokens, ids }
    }

    /// Builds a vocabulary from every section of every study (priors
    /// included). Ids are dense, specials at 0-3, words in sorted order.
    pub fn build(corpus: &[StudyRecord]) -> Self {
        let mut words = BTreeSet::new();
        fn collect(study: &StudyRecord, words: &mut BTreeSet<String>) {
            for text in study.sections.values() {
                for w in word_split(text) {
                    words.insert(w);
                }
            }
            if let Some(p) = &study.prior {
                collect(p, words);
            }
        }
        for s in corpus {
            collect(s, &mut words);
        }
        Tokenizer::from_words(words)
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn token_id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        word_split(text)
            .into_iter()
            .map(|w| {
                self.ids
                    .get(&w)
                    .copied()
                    .ok_or_else(|| CoreError::Tokenizer(format!("unknown token '{w}'")))
            })
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .filter(|&&id| id != PAD_ID && id != BOS_ID && id != SEP_ID && id != EOS_ID)
            .map(|&id| self.tokens.get(id).map(String::as_str).unwrap_or("<unk>"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        for (i, t) in self.tokens.iter().enumerate() {
            writeln!(f, "{t}\t{i}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Tokenizer> {
        let text = std::fs::read_to_string(path)?;
        let mut tokens = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (tok, id) = line.split_once('\t').ok_or_else(|| {
                CoreError::Tokenizer(format!("malformed vocabulary line {}", lineno + 1))
            })?;
            let id: usize = id
                .parse()
                .map_err(|_| CoreError::Tokenizer(format!("bad id on line {}", lineno + 1)))?;
            if id != tokens.len() {
                return Err(CoreError::Tokenizer(format!(
                    "non-dense id {id} on line {}",
                    lineno + 1
                )));
            }
            tokens.push(tok.to_string());
        }
        if tokens.len() < 4 || tokens[..4] != SPECIALS.map(String::from) {
            return Err(CoreError::Tokenizer(
                "vocabulary must start with the four special tokens".into(),
            ));
        }
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Tokenizer { tokens, ids })
    }
}

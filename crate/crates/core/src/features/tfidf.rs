//! TF-IDF over assembly mnemonics: raw per-function counts of the most frequent
//! mnemonics, scaled by a smoothed inverse document frequency.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cfg::{build_vocabulary, ControlFlowGraph, FunctionSample};
use crate::error::Result;

pub const TFIDF_DIM: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub tokens: Vec<String>,
    pub idf: Vec<f64>,
    pub corpus_size: usize,
}

/// Smoothed idf: ln((1 + n) / (1 + df)) + 1.
pub fn smoothed_idf(corpus_size: usize, doc_freq: u64) -> f64 {
    ((1.0 + corpus_size as f64) / (1.0 + doc_freq as f64)).ln() + 1.0
}

pub fn tfidf_fit(corpus: &[&FunctionSample]) -> Result<TfidfModel> {
    let vocab = build_vocabulary(corpus, Some(TFIDF_DIM))?.assembly;
    let idf = vocab
        .doc_freq
        .iter()
        .map(|&df| smoothed_idf(corpus.len(), df))
        .collect();
    Ok(TfidfModel {
        tokens: vocab.tokens,
        idf,
        corpus_size: corpus.len(),
    })
}

impl TfidfModel {
    pub fn transform(&self, cfg: &ControlFlowGraph) -> Vec<f64> {
        let position: HashMap<&str, usize> = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let mut values = vec![0.0; TFIDF_DIM];
        for insn in cfg.blocks.iter().flat_map(|b| &b.instructions) {
            if let Some(&i) = position.get(insn.mnemonic.as_str()) {
                values[i] += 1.0;
            }
        }
        for (v, w) in values.iter_mut().zip(&self.idf) {
            *v *= w;
        }
        values
    }
}

//! Built-in corpora for tests, examples and evaluation.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;

use crate::corpus::{parse_jsonl, Document};
use crate::rng;

const PROGRAMMES: &str = include_str!("../fixtures/programmes.jsonl");

/// Twelve research-programme abstracts in six groups, labeled `materials`
/// or `maths`. Intended for [`crate::corpus::Grouping::ByGroup`].
pub fn programmes() -> Vec<Document> {
    parse_jsonl(PROGRAMMES, "programmes.jsonl").expect("bundled fixture parses")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    pub classes: usize,
    pub docs_per_class: usize,
    pub vocab_per_class: usize,
    /// Fraction of each class vocabulary common to all classes.
    pub shared_fraction: f64,
    pub tokens_per_doc: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            classes: 3,
            docs_per_class: 40,
            vocab_per_class: 50,
            shared_fraction: 0.3,
            tokens_per_doc: 150,
            seed: 0,
        }
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Distinct three-syllable pseudo-word for every `i` below 70³.
pub fn pseudo_word(i: usize) -> String {
    let n = CONSONANTS.len() * VOWELS.len();
    assert!(i < n * n * n, "pseudo-word index out of range");
    let mut out = String::with_capacity(6);
    let mut rest = i;
    for _ in 0..3 {
        let s = rest % n;
        rest /= n;
        out.push(CONSONANTS[s / VOWELS.len()] as char);
        out.push(VOWELS[s % VOWELS.len()] as char);
    }
    out
}

/// Labeled corpus in which each class samples tokens from its own
/// Zipf-weighted vocabulary.
///
/// The first `shared_fraction · vocab_per_class` pseudo-words belong to every
/// class; the rest are class-specific. Each class ranks its vocabulary in its
/// own shuffled order, so shared words carry different weights per class.
pub fn synthetic_corpus(params: &SyntheticParams) -> Vec<Document> {
    let shared = (params.shared_fraction * params.vocab_per_class as f64).round() as usize;
    let own = params.vocab_per_class - shared;
    let zipf: Vec<f64> = (1..=params.vocab_per_class).map(|r| 1.0 / r as f64).collect();
    let sampler = WeightedIndex::new(&zipf).expect("positive weights");
    let mut docs = Vec::with_capacity(params.classes * params.docs_per_class);
    for c in 0..params.classes {
        let class = c.to_string();
        let mut vocab: Vec<String> = (0..shared)
            .chain((0..own).map(|k| shared + c * own + k))
            .map(pseudo_word)
            .collect();
        vocab.shuffle(&mut rng::stream(params.seed, &["synthetic-vocab", &class]));
        for d in 0..params.docs_per_class {
            let id = format!("c{c}-d{d:02}");
            let mut r = rng::stream(params.seed, &["synthetic-doc", &id]);
            let text = (0..params.tokens_per_doc)
                .map(|_| vocab[sampler.sample(&mut r)].as_str())
                .collect::<Vec<_>>()
                .join(" ");
            docs.push(Document::new(id, text).with_label(format!("class-{c}")));
        }
    }
    docs
}

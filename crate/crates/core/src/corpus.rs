//! Document ingestion, tokenization and term statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("../resources/stopwords.txt");

/// Default number of words shown per cloud.
pub const DEFAULT_WORDS_PER_CLOUD: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            label: None,
            group: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }
}

/// Term counts of one document. Words with a zero count are absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentVector {
    pub doc_id: String,
    pub counts: BTreeMap<String, u64>,
}

impl DocumentVector {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocabularyStats {
    pub doc_count: usize,
    pub doc_freq: BTreeMap<String, usize>,
    pub idf: BTreeMap<String, f64>,
}

impl VocabularyStats {
    /// Inverse document frequency, 0 for words never seen.
    pub fn idf(&self, word: &str) -> f64 {
        self.idf.get(word).copied().unwrap_or(0.0)
    }
}

/// Lowercase stop-word set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopList(BTreeSet<String>);

impl StopList {
    pub fn empty() -> Self {
        StopList(BTreeSet::new())
    }

    /// Parses a list with one word per line. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        StopList(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for StopList {
    /// The bundled English list.
    fn default() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }
}

impl<S: Into<String>> FromIterator<S> for StopList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        StopList(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Splits text into lowercase tokens.
///
/// Tokens are runs of alphanumeric characters; apostrophes inside a run are
/// dropped (`don't` becomes `dont`), every other character separates tokens.
/// Tokens shorter than two characters or present in `stoplist` are removed.
pub fn tokenize(text: &str, stoplist: &StopList) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut flush = |current: &mut String| {
        if current.chars().count() >= 2 && !stoplist.contains(current) {
            tokens.push(std::mem::take(current));
        } else {
            current.clear();
        }
    };
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if ch == '\'' || ch == '\u{2019}' {
            continue;
        } else if !current.is_empty() {
            flush(&mut current);
        }
    }
    if !current.is_empty() {
        flush(&mut current);
    }
    tokens
}

pub fn build_vector(doc: &Document, stoplist: &StopList) -> Result<DocumentVector> {
    let mut counts = BTreeMap::new();
    for token in tokenize(&doc.text, stoplist) {
        *counts.entry(token).or_insert(0u64) += 1;
    }
    if counts.is_empty() {
        return Err(Error::EmptyDocument(doc.id.clone()));
    }
    Ok(DocumentVector {
        doc_id: doc.id.clone(),
        counts,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    #[default]
    PerDocument,
    ByGroup,
}

/// Produces one document per cloud.
///
/// In [`Grouping::ByGroup`] mode the members of each group are concatenated
/// in input order; groups appear in order of first occurrence and carry the
/// most frequent member label (ties go to the lexicographically smallest).
pub fn group_corpus(docs: &[Document], mode: Grouping) -> Result<Vec<Document>> {
    match mode {
        Grouping::PerDocument => Ok(docs.to_vec()),
        Grouping::ByGroup => {
            let mut order: Vec<&str> = Vec::new();
            let mut members: HashMap<&str, Vec<&Document>> = HashMap::new();
            for doc in docs {
                let key = doc
                    .group
                    .as_deref()
                    .ok_or_else(|| Error::MissingGroupKey(doc.id.clone()))?;
                members
                    .entry(key)
                    .or_insert_with(|| {
                        order.push(key);
                        Vec::new()
                    })
                    .push(doc);
            }
            Ok(order
                .into_iter()
                .map(|key| {
                    let group = &members[key];
                    let text = group
                        .iter()
                        .map(|d| d.text.as_str())
                        .collect::<Vec<_>>()
                        .join("\n");
                    Document {
                        id: key.to_string(),
                        text,
                        label: majority_label(group),
                        group: Some(key.to_string()),
                    }
                })
                .collect())
        }
    }
}

fn majority_label(group: &[&Document]) -> Option<String> {
    let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in group {
        if let Some(label) = doc.label.as_deref() {
            *votes.entry(label).or_default() += 1;
        }
    }
    // BTreeMap iteration is ascending, so `>` keeps the smallest label on ties.
    let mut best: Option<(&str, usize)> = None;
    for (label, n) in votes {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((label, n));
        }
    }
    best.map(|(l, _)| l.to_string())
}

pub fn compute_stats(vectors: &[DocumentVector]) -> VocabularyStats {
    let n = vectors.len();
    let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
    for v in vectors {
        for word in v.counts.keys() {
            *doc_freq.entry(word.clone()).or_default() += 1;
        }
    }
    let idf = doc_freq
        .iter()
        .map(|(w, &df)| (w.clone(), (n as f64 / df as f64).ln()))
        .collect();
    VocabularyStats {
        doc_count: n,
        doc_freq,
        idf,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Raw term frequency.
    #[default]
    Tf,
    /// Term frequency times inverse document frequency.
    TfIdf,
}

/// Top-`m` words by term frequency.
pub fn select_words(v: &DocumentVector, m: usize) -> Vec<(String, f64)> {
    top_m(
        v.counts.iter().map(|(w, &c)| (w.clone(), c as f64)).collect(),
        m,
    )
}

/// Top-`m` words under the given weight measure.
pub fn select_weighted(
    v: &DocumentVector,
    stats: &VocabularyStats,
    mode: WeightMode,
    m: usize,
) -> Vec<(String, f64)> {
    match mode {
        WeightMode::Tf => select_words(v, m),
        WeightMode::TfIdf => top_m(
            v.counts
                .iter()
                .map(|(w, &c)| (w.clone(), c as f64 * stats.idf(w)))
                .collect(),
            m,
        ),
    }
}

fn top_m(mut weighted: Vec<(String, f64)>, m: usize) -> Vec<(String, f64)> {
    weighted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    weighted.truncate(m);
    weighted
}

/// Loads a corpus from a directory of `.txt` files or a JSON-lines file.
///
/// Directory entries are read in file-name order and take their id from the
/// file stem. JSON-lines records carry `id`, `text` and optionally `label`
/// and `group`.
pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    let docs = if path.is_dir() {
        let mut entries: Vec<_> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        entries.sort();
        entries
            .into_iter()
            .map(|p| {
                let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                let id = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok(Document::new(id, text))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_jsonl(&text, &path.display().to_string())?
    };
    validate_documents(&docs)?;
    Ok(docs)
}

pub fn parse_jsonl(text: &str, source: &str) -> Result<Vec<Document>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| Error::json(format!("{source}: line {}", i + 1), e))
        })
        .collect()
}

/// Checks id uniqueness and non-empty text.
pub fn validate_documents(docs: &[Document]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for doc in docs {
        if !seen.insert(doc.id.as_str()) {
            return Err(Error::DuplicateId(doc.id.clone()));
        }
        if doc.text.trim().is_empty() {
            return Err(Error::InvalidInput(format!("document `{}` is empty", doc.id)));
        }
    }
    if docs.is_empty() {
        return Err(Error::InvalidInput("corpus has no documents".into()));
    }
    Ok(())
}

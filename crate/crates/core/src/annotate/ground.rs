//! Mapping free-text relation phrases onto a fixed predicate library.

use std::collections::BTreeSet;
use std::path::Path;

use crate::lexicon::normalize_text;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroundError {
    #[error("relation library is empty")]
    EmptyLibrary,
    #[error("relation phrase is empty")]
    EmptyInput,
    #[error("relation library: {0}")]
    Invalid(String),
}

/// Canonical predicates, lowercased and unique, in preference order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationLibrary {
    entries: Vec<String>,
}

impl RelationLibrary {
    pub fn new<S: AsRef<str>>(entries: impl IntoIterator<Item = S>) -> Result<Self, GroundError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for e in entries {
            let e = normalize_text(e.as_ref());
            if e.is_empty() {
                return Err(GroundError::Invalid("blank entry".into()));
            }
            if !seen.insert(e.clone()) {
                return Err(GroundError::Invalid(format!("duplicate entry {e:?}")));
            }
            out.push(e);
        }
        if out.is_empty() {
            return Err(GroundError::EmptyLibrary);
        }
        Ok(RelationLibrary { entries: out })
    }

    /// The bundled library of common scene-graph predicates.
    pub fn builtin() -> Self {
        let v: Vec<String> =
            serde_json::from_str(include_str!("../../data/predicate_pool.json")).expect("predicate pool parses");
        RelationLibrary::new(v).expect("bundled library is valid")
    }

    /// A JSON array of strings.
    pub fn load(path: &Path) -> Result<Self, GroundError> {
        let text = std::fs::read_to_string(path).map_err(|e| GroundError::Invalid(e.to_string()))?;
        let v: Vec<String> = serde_json::from_str(&text).map_err(|e| GroundError::Invalid(e.to_string()))?;
        RelationLibrary::new(v)
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }
}

/// Similarity between a normalized phrase and a library entry.
pub trait Scorer {
    fn score(&self, raw: &str, candidate: &str) -> f64;
}

const STOPWORDS: &[&str] = &["a", "an", "the", "is", "are", "was", "were", "be", "being", "of", "to"];

/// F1 overlap of token sets after dropping articles, copulas, "of" and
/// "to". A phrase made only of such words keeps all its tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenF1;

fn content_tokens(s: &str) -> BTreeSet<&str> {
    let all: BTreeSet<&str> = s.split_whitespace().collect();
    let kept: BTreeSet<&str> = all.iter().copied().filter(|t| !STOPWORDS.contains(t)).collect();
    if kept.is_empty() {
        all
    } else {
        kept
    }
}

impl Scorer for TokenF1 {
    fn score(&self, raw: &str, candidate: &str) -> f64 {
        let a = content_tokens(raw);
        let b = content_tokens(candidate);
        let common = a.intersection(&b).count() as f64;
        if common == 0.0 {
            return 0.0;
        }
        let p = common / b.len() as f64;
        let r = common / a.len() as f64;
        2.0 * p * r / (p + r)
    }
}

/// The top-scoring library entry for a raw phrase. An exact match wins
/// outright; otherwise ties go to the earlier entry.
pub fn ground_relation(raw: &str, library: &RelationLibrary, scorer: &dyn Scorer) -> Result<String, GroundError> {
    let raw = normalize_text(raw);
    if raw.is_empty() {
        return Err(GroundError::EmptyInput);
    }
    if let Some(e) = library.entries.iter().find(|e| **e == raw) {
        return Ok(e.clone());
    }
    let mut best = &library.entries[0];
    let mut best_score = f64::NEG_INFINITY;
    for e in &library.entries {
        let s = scorer.score(&raw, e);
        if s > best_score {
            best = e;
            best_score = s;
        }
    }
    Ok(best.clone())
}

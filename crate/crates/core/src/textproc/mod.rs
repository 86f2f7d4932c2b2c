//! Tokenization, stopword filtering, stemming and TF-IDF vectors.

mod porter;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::normalize_text;
use crate::error::{Error, Result};

pub use porter::stem;

/// The shipped English function-word list.
pub const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Lowercase word tokens with markers and surrounding punctuation removed.
///
/// Internal apostrophes and hyphens survive (`we've`, `wrap-up`); tokens made
/// only of punctuation are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    normalize_text(text)
        .split_whitespace()
        .filter_map(|raw| {
            let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
            (!trimmed.is_empty()).then(|| trimmed.to_lowercase())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// Parses one word per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
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

impl Default for Stopwords {
    fn default() -> Self {
        Self::english()
    }
}

/// Drops stopwords, keeping order.
pub fn content_words(tokens: &[String], stopwords: &Stopwords) -> Vec<String> {
    tokens.iter().filter(|t| !stopwords.contains(t)).cloned().collect()
}

/// Text analysis shared by every stage: tokens, content words and their stems.
#[derive(Debug, Clone, Default)]
pub struct Analyzer {
    pub stopwords: Stopwords,
}

impl Analyzer {
    pub fn new(stopwords: Stopwords) -> Self {
        Analyzer { stopwords }
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn content_words(&self, text: &str) -> Vec<String> {
        content_words(&tokenize(text), &self.stopwords)
    }

    pub fn content_stems(&self, text: &str) -> Vec<String> {
        self.content_words(text).iter().map(|w| stem(w)).collect()
    }
}

/// Word-to-dimension map plus inverse document frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vectorizer {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
    n_docs: usize,
    smooth: bool,
}

impl Vectorizer {
    /// Fits on token lists; dimensions follow first occurrence.
    ///
    /// Unsmoothed: `idf = ln(N / df)`. Smoothed: `ln((1 + N) / (1 + df)) + 1`.
    pub fn fit<S: AsRef<str>>(documents: &[Vec<S>], smooth: bool) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::invalid("cannot fit a vectorizer on zero documents"));
        }
        let mut vocabulary = BTreeMap::new();
        let mut df: Vec<usize> = Vec::new();
        for doc in documents {
            let mut seen = HashSet::new();
            for tok in doc {
                let tok = tok.as_ref();
                let next = vocabulary.len();
                let dim = *vocabulary.entry(tok.to_string()).or_insert(next);
                if dim == df.len() {
                    df.push(0);
                }
                if seen.insert(dim) {
                    df[dim] += 1;
                }
            }
        }
        let n = documents.len() as f64;
        let idf = df
            .iter()
            .map(|&d| {
                let d = d as f64;
                if smooth {
                    ((1.0 + n) / (1.0 + d)).ln() + 1.0
                } else {
                    (n / d).ln()
                }
            })
            .collect();
        Ok(Vectorizer { vocabulary, idf, n_docs: documents.len(), smooth })
    }

    /// Vocabulary size L.
    pub fn dims(&self) -> usize {
        self.idf.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn dimension(&self, word: &str) -> Option<usize> {
        self.vocabulary.get(word).copied()
    }

    pub fn idf(&self, word: &str) -> Option<f64> {
        self.dimension(word).map(|d| self.idf[d])
    }

    /// Raw term counts times idf. Out-of-vocabulary tokens are dropped.
    pub fn vectorize<S: AsRef<str>>(&self, tokens: &[S]) -> TfIdfVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for tok in tokens {
            if let Some(dim) = self.dimension(tok.as_ref()) {
                *counts.entry(dim).or_default() += 1.0;
            }
        }
        TfIdfVector(counts.into_iter().map(|(dim, tf)| (dim, tf * self.idf[dim])).filter(|(_, v)| *v != 0.0).collect())
    }
}

/// Sparse TF-IDF vector keyed by vocabulary dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TfIdfVector(BTreeMap<usize, f64>);

impl TfIdfVector {
    pub fn from_entries(entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        TfIdfVector(entries.into_iter().collect())
    }

    pub fn get(&self, dim: usize) -> f64 {
        self.0.get(&dim).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().map(|(&d, &v)| (d, v))
    }

    pub fn nnz(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &TfIdfVector) -> f64 {
        let (small, large) = if self.0.len() <= other.0.len() { (self, other) } else { (other, self) };
        small.0.iter().map(|(d, v)| v * large.get(*d)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> TfIdfVector {
        TfIdfVector(self.0.iter().map(|(&d, &v)| (d, v * alpha)).collect())
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &TfIdfVector, b: &TfIdfVector) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (a.dot(b) / denom).clamp(-1.0, 1.0)
}

/// Dimension-wise arithmetic mean.
pub fn centroid(vectors: &[TfIdfVector]) -> TfIdfVector {
    if vectors.is_empty() {
        return TfIdfVector::default();
    }
    let mut sum: HashMap<usize, f64> = HashMap::new();
    for v in vectors {
        for (d, x) in v.entries() {
            *sum.entry(d).or_default() += x;
        }
    }
    let n = vectors.len() as f64;
    TfIdfVector(sum.into_iter().map(|(d, s)| (d, s / n)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Flat on the top ."), toks("flat on the top"));
        let t = tokenize("the case would be rubber and the the buttons ,");
        assert_eq!(t.len(), 9);
        assert_eq!(t.iter().filter(|w| *w == "the").count(), 3);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("we've got [disfmarker] LCDs"), toks("we've got lcds"));
    }

    #[test]
    fn content_word_filtering() {
        let sw = Stopwords::english();
        assert_eq!(content_words(&toks("flat on the top"), &sw), toks("flat top"));
        assert!(content_words(&toks("the of and we"), &sw).is_empty());
        assert!(content_words(&[], &sw).is_empty());
    }

    #[test]
    fn shipped_list_shape() {
        let sw = Stopwords::english();
        assert!(sw.len() >= 180 && sw.len() <= 240, "{}", sw.len());
        for w in ["about", "in", "meeting", "rubber", "like"] {
            assert!(!sw.contains(w), "{w}");
        }
    }

    #[test]
    fn stem_examples() {
        assert_eq!(stem("spinning"), "spin");
        assert_eq!(stem("rubber"), "rubber");
        assert_eq!(stem("a"), "a");
    }

    #[test]
    fn idf_values() {
        let v = Vectorizer::fit(&[toks("spinning wheel"), toks("spinning scroll")], false).unwrap();
        assert_eq!(v.idf("spinning"), Some(0.0));
        assert_eq!(v.dims(), 3);

        let docs = [toks("x a"), toks("b"), toks("c"), toks("d")];
        let v = Vectorizer::fit(&docs, false).unwrap();
        assert_relative_eq!(v.idf("x").unwrap(), 4f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(v.idf("x").unwrap(), 1.3862943611198906, epsilon = 1e-12);

        assert!(Vectorizer::fit::<String>(&[], false).is_err());
    }

    #[test]
    fn smoothed_idf_is_positive() {
        let v = Vectorizer::fit(&[toks("a b"), toks("a")], true).unwrap();
        assert!(v.idf("a").unwrap() > 0.0);
    }

    #[test]
    fn shared_zero_idf_term_gives_zero_cosine() {
        let docs = [toks("spinning wheel"), toks("spinning scroll")];
        let v = Vectorizer::fit(&docs, false).unwrap();
        assert_eq!(cosine(&v.vectorize(&docs[0]), &v.vectorize(&docs[1])), 0.0);
    }

    #[test]
    fn cosine_basics() {
        let docs = [toks("a b b c"), toks("d e"), toks("f")];
        let v = Vectorizer::fit(&docs, false).unwrap();
        let a = v.vectorize(&docs[0]);
        let b = v.vectorize(&docs[1]);
        assert_relative_eq!(cosine(&a, &a), 1.0, epsilon = 1e-12);
        assert_eq!(cosine(&a, &b), 0.0);
        assert_eq!(cosine(&a, &TfIdfVector::default()), 0.0);
    }

    #[test]
    fn oov_tokens_are_dropped() {
        let v = Vectorizer::fit(&[toks("a b"), toks("c")], false).unwrap();
        let with_unseen = v.vectorize(&toks("a zzzunseen"));
        assert_eq!(with_unseen, v.vectorize(&toks("a")));
        assert_eq!(with_unseen.nnz(), 1);
    }

    #[test]
    fn centroid_is_mean() {
        let a = TfIdfVector::from_entries([(0, 2.0), (1, 4.0)]);
        let b = TfIdfVector::from_entries([(1, 2.0), (2, 6.0)]);
        let c = centroid(&[a, b]);
        assert_eq!(c.get(0), 1.0);
        assert_eq!(c.get(1), 3.0);
        assert_eq!(c.get(2), 3.0);
        assert_eq!(centroid(&[]).nnz(), 0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sparse() -> impl Strategy<Value = TfIdfVector> {
            proptest::collection::btree_map(0usize..12, 0.0f64..10.0, 0..8).prop_map(TfIdfVector::from_entries)
        }

        proptest! {
            #[test]
            fn cosine_properties(a in sparse(), b in sparse(), alpha in 0.01f64..100.0) {
                let c = cosine(&a, &b);
                prop_assert!((0.0..=1.0).contains(&c));
                prop_assert_eq!(c, cosine(&b, &a));
                prop_assert!((cosine(&a.scaled(alpha), &b) - c).abs() < 1e-12);
            }
        }
    }
}

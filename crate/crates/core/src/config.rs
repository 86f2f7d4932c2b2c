//! Every tunable in one JSON-loadable struct. Missing keys take defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::SimilarityKind;
use crate::error::{Error, Result};
use crate::eval::LogBase;
use crate::topicmodel::LdaConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub folds: usize,
    pub thresholds: Thresholds,
    pub lda: LdaConfig,
    pub pairwise: LearnerConfig,
    pub summarizer: LearnerConfig,
    pub features: FeatureConfig,
    /// Context DAs added per cluster for the `+context` summarizers.
    pub context_n: usize,
    pub tfidf_smooth: bool,
    pub voi_base: LogBase,
    pub rouge: RougeConfig,
    /// Segment count for the contiguous baseline; `None` means `ceil(sqrt(n))`.
    pub contiguous_segments: Option<usize>,
    /// Skip training clusters whose DAs share no stem with the abstract.
    pub drop_zero_overlap_clusters: bool,
    /// Replaces the bundled stopword list.
    pub stopwords_path: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            folds: 3,
            thresholds: Thresholds::default(),
            lda: LdaConfig::default(),
            pairwise: LearnerConfig::default(),
            summarizer: LearnerConfig::default(),
            features: FeatureConfig::default(),
            context_n: 20,
            tfidf_smooth: false,
            voi_base: LogBase::Natural,
            rouge: RougeConfig::default(),
            contiguous_segments: None,
            drop_zero_overlap_clusters: false,
            stopwords_path: None,
        }
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let config: Config = serde_json::from_str(&text)?;
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid("folds must be at least 2"));
        }
        for kind in SimilarityKind::ALL {
            if self.thresholds.get(kind).is_nan() {
                return Err(Error::invalid(format!("{kind} threshold is NaN")));
            }
        }
        for (name, l) in [("pairwise", &self.pairwise), ("summarizer", &self.summarizer)] {
            if !(l.regularization.is_finite() && l.regularization > 0.0) {
                return Err(Error::invalid(format!("{name}.regularization must be positive")));
            }
            if l.epochs == 0 {
                return Err(Error::invalid(format!("{name}.epochs must be positive")));
            }
        }
        let f = &self.features;
        if !(0.0..=1.0).contains(&f.begin_fraction) || !(0.0..=1.0).contains(&f.end_fraction) {
            return Err(Error::invalid("position bucket fractions must lie in [0, 1]"));
        }
        if self.contiguous_segments == Some(0) {
            return Err(Error::invalid("contiguous_segments must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub tfidf: f64,
    pub lda: f64,
    pub svm: f64,
    pub maxent: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            tfidf: SimilarityKind::Tfidf.default_threshold(),
            lda: SimilarityKind::Lda.default_threshold(),
            svm: SimilarityKind::Svm.default_threshold(),
            maxent: SimilarityKind::Maxent.default_threshold(),
        }
    }
}

impl Thresholds {
    pub fn get(&self, kind: SimilarityKind) -> f64 {
        match kind {
            SimilarityKind::Tfidf => self.tfidf,
            SimilarityKind::Lda => self.lda,
            SimilarityKind::Svm => self.svm,
            SimilarityKind::Maxent => self.maxent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub regularization: f64,
    pub epochs: usize,
    pub balance_classes: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig { regularization: 0.01, epochs: 200, balance_classes: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub feedback_lexicon: Vec<String>,
    /// Share of the meeting's DAs counted as its beginning.
    pub begin_fraction: f64,
    pub end_fraction: f64,
    /// DA type prefixes that mark a question.
    pub question_da_types: Vec<String>,
    /// Context size used by the pairwise context-overlap feature.
    pub pairwise_context_n: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            feedback_lexicon: ["yeah", "yes", "okay", "ok", "right", "exactly"].map(String::from).to_vec(),
            begin_fraction: 0.1,
            end_fraction: 0.1,
            question_da_types: ["el.", "elicit"].map(String::from).to_vec(),
            pairwise_context_n: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RougeConfig {
    pub stem: bool,
    /// Drop stopwords from the reference abstracts too.
    pub strip_reference_stopwords: bool,
}

impl Default for RougeConfig {
    fn default() -> Self {
        RougeConfig { stem: true, strip_reference_stopwords: false }
    }
}

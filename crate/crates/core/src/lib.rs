//! Decision summarization for meeting transcripts.
//!
//! The pipeline clusters decision-related dialogue acts (DRDAs) by the decision
//! they support, extracts DA-level or token-level summaries for each cluster,
//! and scores both steps: clusterings with B-cubed, pairwise and variation of
//! information, summaries with ROUGE-1.
//!
//! Module map:
//! - [`corpus`]: meeting data model, JSONL loading, gold clusterings, folds
//! - [`textproc`]: tokenizer, stopwords, Porter stemmer, TF-IDF
//! - [`topicmodel`]: LDA by collapsed Gibbs sampling
//! - [`learn`]: MaxEnt and linear SVM trainers
//! - [`features`]: pairwise, DA-level and token-level feature extraction
//! - [`clustering`]: average-link HAC and baselines
//! - [`summarize`]: unsupervised and supervised summarizers
//! - [`eval`]: clustering scorers and ROUGE-1
//! - [`pipeline`]: end-to-end training, cross-validation and reports

pub mod clustering;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod learn;
pub mod pipeline;
pub mod summarize;
pub mod synthetic;
pub mod textproc;
pub mod topicmodel;

pub use error::{Error, Result};

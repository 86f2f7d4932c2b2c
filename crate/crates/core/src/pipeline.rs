//! End-to-end training, clustering, summarization and cross-validation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    baseline_all_in_one, baseline_contiguous, default_segments, hac_average_link, SimilarityKind, SimilarityMatrix,
};
use crate::config::Config;
use crate::corpus::{decision_members, gold_clustering, kfold_split, Clustering, Fold, Meeting};
use crate::error::{Error, Result};
use crate::eval::{aggregate, bcubed, pairwise_score, rouge1, voi, Aggregate, Prf};
use crate::features::{
    content_tokens, da_features_at, pairwise_features_at, token_features_at, MeetingAnalysis, DA_SPACE, PAIRWISE_SPACE,
    TOKEN_SPACE,
};
use crate::learn::{train, FeatureVector, LinearModel, ModelKind, TrainConfig};
use crate::summarize::{
    add_context, align_clusters_to_decisions, extract_das, extract_tokens, label_das_for_training,
    label_tokens_for_training, longest_da, prototype_da, upper_bound_summary, DecisionCluster, DecisionSummary,
};
use crate::textproc::{cosine, tokenize, Analyzer, Stopwords, Vectorizer};
use crate::topicmodel::{lda_similarity, train_lda, TopicDistribution};

/// Analyzer and corpus-level TF-IDF weights shared by every step.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub config: Config,
    pub analyzer: Analyzer,
    pub vectorizer: Vectorizer,
}

impl Workspace {
    /// Fits TF-IDF weights on the content stems of every decision-related DA.
    /// This uses no decision labels, so it is shared across folds.
    pub fn new(meetings: &[Meeting], config: Config) -> Result<Self> {
        config.check()?;
        let stopwords = match &config.stopwords_path {
            Some(path) => Stopwords::load(path)?,
            None => Stopwords::english(),
        };
        let analyzer = Analyzer::new(stopwords);
        let docs: Vec<Vec<String>> =
            meetings.iter().flat_map(|m| m.drdas().map(|d| stems(d, &analyzer)).collect::<Vec<_>>()).collect();
        if docs.is_empty() {
            return Err(Error::invalid("corpus has no decision-related DAs"));
        }
        let vectorizer = Vectorizer::fit(&docs, config.tfidf_smooth)?;
        Ok(Workspace { config, analyzer, vectorizer })
    }

    pub fn analyze<'a>(&'a self, meeting: &'a Meeting) -> MeetingAnalysis<'a> {
        MeetingAnalysis::new(meeting, &self.analyzer, &self.vectorizer, &self.config.features)
    }

    fn train_config(&self, space: &str, seed: u64, summarizer: bool) -> TrainConfig {
        let l = if summarizer { &self.config.summarizer } else { &self.config.pairwise };
        TrainConfig {
            regularization: l.regularization,
            epochs: l.epochs,
            seed,
            balance_classes: l.balance_classes,
            feature_space: space.to_string(),
        }
    }

    /// Reference words for ROUGE.
    pub fn reference_words(&self, text: &str) -> Vec<String> {
        let words = tokenize(text);
        if self.config.rouge.strip_reference_stopwords {
            words.into_iter().filter(|w| !self.analyzer.is_stopword(w)).collect()
        } else {
            words
        }
    }
}

fn stems(da: &crate::corpus::DialogueAct, analyzer: &Analyzer) -> Vec<String> {
    content_tokens(da, analyzer).into_iter().map(|t| t.stem).collect()
}

fn drda_positions(m: &Meeting) -> Vec<usize> {
    m.das.iter().enumerate().filter(|(_, d)| d.is_drda()).map(|(i, _)| i).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClusterMethod {
    #[serde(rename = "all-in-one")]
    AllInOne,
    #[serde(rename = "contiguous")]
    Contiguous,
    #[serde(rename = "tfidf")]
    Tfidf,
    #[serde(rename = "lda")]
    Lda,
    #[serde(rename = "pairwise-svm")]
    PairwiseSvm,
    #[serde(rename = "pairwise-maxent")]
    PairwiseMaxent,
}

impl ClusterMethod {
    pub const ALL: [ClusterMethod; 6] = [
        ClusterMethod::AllInOne,
        ClusterMethod::Contiguous,
        ClusterMethod::Tfidf,
        ClusterMethod::Lda,
        ClusterMethod::PairwiseSvm,
        ClusterMethod::PairwiseMaxent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClusterMethod::AllInOne => "all-in-one",
            ClusterMethod::Contiguous => "contiguous",
            ClusterMethod::Tfidf => "tfidf",
            ClusterMethod::Lda => "lda",
            ClusterMethod::PairwiseSvm => "pairwise-svm",
            ClusterMethod::PairwiseMaxent => "pairwise-maxent",
        }
    }

    pub fn similarity(self) -> Option<SimilarityKind> {
        match self {
            ClusterMethod::Tfidf => Some(SimilarityKind::Tfidf),
            ClusterMethod::Lda => Some(SimilarityKind::Lda),
            ClusterMethod::PairwiseSvm => Some(SimilarityKind::Svm),
            ClusterMethod::PairwiseMaxent => Some(SimilarityKind::Maxent),
            _ => None,
        }
    }

    pub fn learner(self) -> Option<ModelKind> {
        match self {
            ClusterMethod::PairwiseSvm => Some(ModelKind::Svm),
            ClusterMethod::PairwiseMaxent => Some(ModelKind::MaxEnt),
            _ => None,
        }
    }
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClusterMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown clustering method '{s}'")))
    }
}

pub fn parse_learner(s: &str) -> Result<ModelKind> {
    match s {
        "svm" => Ok(ModelKind::Svm),
        "maxent" => Ok(ModelKind::MaxEnt),
        _ => Err(Error::invalid(format!("unknown learner '{s}' (expected svm or maxent)"))),
    }
}

/// Topic distributions for decision-related DAs, keyed by (meeting id, DA id).
#[derive(Debug, Clone, Default)]
pub struct TopicAssignments {
    thetas: BTreeMap<(String, String), TopicDistribution>,
}

impl TopicAssignments {
    pub fn get(&self, meeting: &str, da: &str) -> Result<&TopicDistribution> {
        self.thetas
            .get(&(meeting.to_string(), da.to_string()))
            .ok_or_else(|| Error::Invariant(format!("no topic distribution for {meeting}/{da}")))
    }
}

/// Trains LDA on the decision-related DAs of `train_on`, then assigns a topic
/// distribution to every decision-related DA of `apply_to`: the sampled one
/// for training documents, a fold-in estimate for unseen ones.
pub fn fit_topics(ws: &Workspace, train_on: &[&Meeting], apply_to: &[&Meeting], seed: u64) -> Result<TopicAssignments> {
    let mut keys = Vec::new();
    let mut docs = Vec::new();
    for m in train_on {
        for da in m.drdas() {
            let s = stems(da, &ws.analyzer);
            if !s.is_empty() {
                keys.push((m.id.clone(), da.id.clone()));
                docs.push(s);
            }
        }
    }
    if docs.is_empty() {
        return Err(Error::invalid("no decision-related DA with content words to train LDA on"));
    }
    let model = train_lda(&docs, &ws.config.lda, seed)?;
    let mut thetas = BTreeMap::new();
    for (i, key) in keys.into_iter().enumerate() {
        thetas.insert(key, model.theta(i)?);
    }
    for m in apply_to {
        for da in m.drdas() {
            let key = (m.id.clone(), da.id.clone());
            if thetas.contains_key(&key) {
                continue;
            }
            let s = stems(da, &ws.analyzer);
            let theta = if s.is_empty() {
                TopicDistribution::uniform(model.k)
            } else {
                model.infer(&s, &format!("{}/{}", m.id, da.id))
            };
            thetas.insert(key, theta);
        }
    }
    Ok(TopicAssignments { thetas })
}

/// Where pairwise similarities come from.
#[derive(Debug, Clone, Copy)]
pub enum SimilaritySource<'a> {
    Tfidf,
    Lda(&'a TopicAssignments),
    Model(&'a LinearModel),
}

/// Similarities between the meeting's decision-related DAs, in meeting order.
pub fn similarity_matrix(ma: &MeetingAnalysis, source: SimilaritySource) -> Result<SimilarityMatrix> {
    let m = ma.meeting;
    let pos = drda_positions(m);
    if let SimilaritySource::Model(model) = source {
        model.expect_feature_space(PAIRWISE_SPACE)?;
    }
    let ids = pos.iter().map(|&p| m.das[p].id.clone()).collect();
    SimilarityMatrix::from_fn(ids, |i, j| {
        let (a, b) = (pos[i], pos[j]);
        match source {
            SimilaritySource::Tfidf => Ok(cosine(ma.vector(a), ma.vector(b))),
            SimilaritySource::Lda(t) => lda_similarity(t.get(&m.id, &m.das[a].id)?, t.get(&m.id, &m.das[b].id)?),
            SimilaritySource::Model(model) => Ok(model.score(&pairwise_features_at(a, b, ma))),
        }
    })
}

#[derive(Debug, Clone, Copy)]
pub enum Clusterer<'a> {
    AllInOne,
    /// Segment count; `None` means `ceil(sqrt(n))`.
    Contiguous(Option<usize>),
    Hac {
        source: SimilaritySource<'a>,
        threshold: f64,
    },
}

/// Clusters the decision-related DAs of one meeting. Meetings without any
/// get an empty clustering.
pub fn cluster_meeting(ma: &MeetingAnalysis, clusterer: Clusterer) -> Result<Clustering> {
    let items = ma.meeting.drda_ids();
    if items.is_empty() {
        return Ok(Clustering::empty());
    }
    match clusterer {
        Clusterer::AllInOne => baseline_all_in_one(&items),
        Clusterer::Contiguous(k) => {
            let k = k.unwrap_or_else(|| default_segments(items.len())).min(items.len());
            baseline_contiguous(&items, k)
        }
        Clusterer::Hac { source, threshold } => hac_average_link(&similarity_matrix(ma, source)?, threshold),
    }
}

/// Scores of one meeting's clustering against gold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore {
    pub bcubed: Prf,
    /// Absent when the meeting has fewer than two decision-related DAs.
    pub pairwise: Option<Prf>,
    pub voi: f64,
}

pub fn score_clustering(ws: &Workspace, system: &Clustering, meeting: &Meeting) -> Result<Option<ClusterScore>> {
    let gold = gold_clustering(meeting);
    if gold.item_count() == 0 {
        return Ok(None);
    }
    let pairwise = if gold.item_count() >= 2 { Some(pairwise_score(system, &gold)?) } else { None };
    Ok(Some(ClusterScore { bcubed: bcubed(system, &gold)?, pairwise, voi: voi(system, &gold, ws.config.voi_base)? }))
}

/// Every within-meeting pair of decision-related DAs, labelled by whether the
/// two share a gold decision cluster.
pub fn pairwise_examples(ws: &Workspace, meetings: &[&Meeting]) -> Vec<(FeatureVector, bool)> {
    let mut out = Vec::new();
    for m in meetings {
        let ma = ws.analyze(m);
        let labels = gold_clustering(m);
        let labels = labels.labels();
        let pos = drda_positions(m);
        for (x, &a) in pos.iter().enumerate() {
            for &b in &pos[x + 1..] {
                let same = labels[m.das[a].id.as_str()] == labels[m.das[b].id.as_str()];
                out.push((pairwise_features_at(a, b, &ma), same));
            }
        }
    }
    out
}

pub fn train_pairwise(ws: &Workspace, meetings: &[&Meeting], kind: ModelKind, seed: u64) -> Result<LinearModel> {
    train(kind, &pairwise_examples(ws, meetings), &ws.train_config(PAIRWISE_SPACE, seed, false))
}

/// Gold decision clusters of a meeting, each aligned to its decision.
pub fn gold_decision_clusters(m: &Meeting) -> Result<Vec<DecisionCluster>> {
    decision_members(m).into_iter().map(|(d, ids)| DecisionCluster::from_ids(m, &ids, Some(d))).collect()
}

fn training_clusters<'a>(ws: &Workspace, ma: &MeetingAnalysis<'a>, context_n: usize) -> Result<Vec<DecisionCluster>> {
    let mut out = Vec::new();
    for c in gold_decision_clusters(ma.meeting)? {
        let c = add_context(&c, ma, context_n);
        if ws.config.drop_zero_overlap_clusters && label_das_for_training(&c, ma, &ws.analyzer)?.best_overlap == 0 {
            continue;
        }
        out.push(c);
    }
    Ok(out)
}

pub fn da_examples(ws: &Workspace, meetings: &[&Meeting], context_n: usize) -> Result<Vec<(FeatureVector, bool)>> {
    let mut out = Vec::new();
    for m in meetings {
        let ma = ws.analyze(m);
        for c in training_clusters(ws, &ma, context_n)? {
            for (p, y) in label_das_for_training(&c, &ma, &ws.analyzer)?.labels {
                out.push((da_features_at(p, &ma), y));
            }
        }
    }
    Ok(out)
}

pub fn token_examples(ws: &Workspace, meetings: &[&Meeting], context_n: usize) -> Result<Vec<(FeatureVector, bool)>> {
    let mut out = Vec::new();
    for m in meetings {
        let ma = ws.analyze(m);
        for c in training_clusters(ws, &ma, context_n)? {
            for (p, t, y) in label_tokens_for_training(&c, &ma, &ws.analyzer)? {
                out.push((token_features_at(p, t, &ma), y));
            }
        }
    }
    Ok(out)
}

pub fn train_da(
    ws: &Workspace,
    meetings: &[&Meeting],
    kind: ModelKind,
    context_n: usize,
    seed: u64,
) -> Result<LinearModel> {
    train(kind, &da_examples(ws, meetings, context_n)?, &ws.train_config(DA_SPACE, seed, true))
}

pub fn train_token(
    ws: &Workspace,
    meetings: &[&Meeting],
    kind: ModelKind,
    context_n: usize,
    seed: u64,
) -> Result<LinearModel> {
    train(kind, &token_examples(ws, meetings, context_n)?, &ws.train_config(TOKEN_SPACE, seed, true))
}

#[derive(Debug, Clone, Copy)]
pub enum Summarizer<'a> {
    Longest,
    Prototype,
    Da(&'a LinearModel),
    Token(&'a LinearModel),
    UpperBound,
}

impl Summarizer<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Summarizer::Longest => "longest",
            Summarizer::Prototype => "prototype",
            Summarizer::Da(_) => "da",
            Summarizer::Token(_) => "token",
            Summarizer::UpperBound => "upper-bound",
        }
    }
}

/// Which clusters to summarize.
#[derive(Debug, Clone, Copy)]
pub enum ClusterSource<'a> {
    Gold,
    System(&'a Clustering),
    /// One cluster of every decision-related DA, scored against all abstracts at once.
    NoClustering,
}

/// One scored summary: a decision, or the whole meeting without clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutput {
    pub meeting_id: String,
    pub decision_id: String,
    pub method: String,
    pub context_n: usize,
    pub text: String,
    pub selected: Vec<String>,
    pub rouge: Prf,
}

fn run_summarizer(ws: &Workspace, ma: &MeetingAnalysis, c: &DecisionCluster, s: Summarizer) -> Result<DecisionSummary> {
    match s {
        Summarizer::Longest => Ok(longest_da(c, ma)),
        Summarizer::Prototype => Ok(prototype_da(c, ma)),
        Summarizer::Da(m) => extract_das(m, c, ma),
        Summarizer::Token(m) => extract_tokens(m, c, ma),
        Summarizer::UpperBound => upper_bound_summary(c, ma, &ws.analyzer),
    }
}

/// Summarizes a meeting's clusters and scores each decision with ROUGE-1.
/// A decision that receives several system clusters is scored on the union
/// of their summaries; one that receives none gets an empty summary.
pub fn summarize_meeting(
    ws: &Workspace,
    ma: &MeetingAnalysis,
    source: ClusterSource,
    summarizer: Summarizer,
    context_n: usize,
) -> Result<Vec<DecisionOutput>> {
    let m = ma.meeting;
    let stem = ws.config.rouge.stem;
    let make = |decision_id: String, summaries: Vec<DecisionSummary>, reference: &str| -> Result<DecisionOutput> {
        let texts: Vec<&str> = summaries.iter().map(|s| s.text.as_str()).filter(|t| !t.is_empty()).collect();
        let words: Vec<String> = summaries.iter().flat_map(|s| s.words()).collect();
        let rouge = rouge1(&words, &ws.reference_words(reference), stem)?;
        Ok(DecisionOutput {
            meeting_id: m.id.clone(),
            decision_id,
            method: summarizer.name().to_string(),
            context_n,
            text: texts.join(", "),
            selected: summaries.into_iter().flat_map(|s| s.selected).collect(),
            rouge,
        })
    };
    let with_context = |c: DecisionCluster| if context_n > 0 { add_context(&c, ma, context_n) } else { c };

    match source {
        ClusterSource::NoClustering => {
            let pos = drda_positions(m);
            if pos.is_empty() {
                return Ok(Vec::new());
            }
            if matches!(summarizer, Summarizer::UpperBound) {
                return Err(Error::invalid("the upper bound needs clusters aligned to decisions"));
            }
            let c = with_context(DecisionCluster::new(pos, None)?);
            let summary = run_summarizer(ws, ma, &c, summarizer)?;
            let reference: Vec<&str> = m.abstracts.iter().map(|a| a.text.as_str()).collect();
            if reference.is_empty() {
                return Ok(Vec::new());
            }
            Ok(vec![make("all".to_string(), vec![summary], &reference.join(" "))?])
        }
        ClusterSource::Gold | ClusterSource::System(_) => {
            let clusters = match source {
                ClusterSource::System(clustering) => {
                    let aligned = align_clusters_to_decisions(clustering, m);
                    clustering
                        .clusters()
                        .iter()
                        .zip(aligned)
                        .map(|(ids, d)| DecisionCluster::from_ids(m, ids, d))
                        .collect::<Result<Vec<_>>>()?
                }
                _ => gold_decision_clusters(m)?,
            };
            let mut by_decision: BTreeMap<String, Vec<DecisionSummary>> =
                decision_members(m).into_keys().map(|d| (d, Vec::new())).collect();
            for c in clusters {
                let Some(d) = c.aligned_decision.clone() else { continue };
                let summary = run_summarizer(ws, ma, &with_context(c), summarizer)?;
                by_decision.entry(d).or_default().push(summary);
            }
            by_decision
                .into_iter()
                .map(|(d, summaries)| {
                    let reference = m
                        .abstract_for(&d)
                        .ok_or_else(|| Error::Invariant(format!("decision {d} has no abstract")))?
                        .text
                        .clone();
                    make(d, summaries, &reference)
                })
                .collect()
        }
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn round_prf(p: Prf) -> Prf {
    Prf { precision: round6(p.precision), recall: round6(p.recall), f1: round6(p.f1) }
}

fn round_agg(a: Aggregate) -> Aggregate {
    Aggregate { macro_prf: round_prf(a.macro_prf), mean_f1: round6(a.mean_f1), count: a.count }
}

/// One row of the clustering table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringRow {
    pub method: String,
    pub threshold: Option<f64>,
    pub bcubed: Aggregate,
    pub pairwise: Aggregate,
    pub voi: f64,
}

impl ClusteringRow {
    pub fn from_scores(method: ClusterMethod, threshold: Option<f64>, scores: &[ClusterScore]) -> Result<Self> {
        let b: Vec<Prf> = scores.iter().map(|s| s.bcubed).collect();
        let p: Vec<Prf> = scores.iter().filter_map(|s| s.pairwise).collect();
        let voi = scores.iter().map(|s| s.voi).sum::<f64>() / scores.len().max(1) as f64;
        Ok(ClusteringRow {
            method: method.name().to_string(),
            threshold,
            bcubed: round_agg(aggregate(&b)?),
            pairwise: round_agg(aggregate(&p)?),
            voi: round6(voi),
        })
    }
}

/// One row of the summarization tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// "true", "lda", "svm" or "none".
    pub clustering: String,
    pub summarizer: String,
    /// Learner of a supervised summarizer.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub learner: Option<String>,
    pub context_n: usize,
    pub rouge: Aggregate,
}

/// The full cross-validation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XvalReport {
    pub seed: u64,
    pub folds: Vec<Fold>,
    pub clustering: Vec<ClusteringRow>,
    pub unsupervised: Vec<SummaryRow>,
    pub supervised: Vec<SummaryRow>,
}

/// Summarization conditions, in report order.
const CONDITIONS: [&str; 4] = ["true", "lda", "svm", "none"];

#[derive(Default)]
struct FoldResults {
    clustering: BTreeMap<usize, Vec<ClusterScore>>,
    /// Keyed by row index in a fixed enumeration of rows.
    summaries: BTreeMap<usize, Vec<Prf>>,
}

/// (condition, summarizer, learner, context).
type PlanRow = (usize, &'static str, Option<ModelKind>, usize);

/// Rows in report order, and how many of them are unsupervised.
fn summary_plan(context_n: usize) -> (Vec<PlanRow>, usize) {
    let mut rows = Vec::new();
    for c in 0..CONDITIONS.len() {
        rows.push((c, "longest", None, 0));
        rows.push((c, "prototype", None, 0));
    }
    rows.push((0, "upper-bound", None, 0));
    let unsupervised = rows.len();
    for c in 0..CONDITIONS.len() {
        for (level, ctx) in [("da", 0), ("token", 0), ("da", context_n), ("token", context_n)] {
            for learner in [ModelKind::MaxEnt, ModelKind::Svm] {
                rows.push((c, level, Some(learner), ctx));
            }
        }
    }
    (rows, unsupervised)
}

fn learner_slot(kind: ModelKind) -> usize {
    match kind {
        ModelKind::MaxEnt => 0,
        ModelKind::Svm => 1,
    }
}

fn run_fold(ws: &Workspace, meetings: &[Meeting], fold: &Fold, fold_index: usize, seed: u64) -> Result<FoldResults> {
    let pick = |ids: &[String]| -> Vec<&Meeting> {
        ids.iter().filter_map(|id| meetings.iter().find(|m| &m.id == id)).collect()
    };
    let train_m = pick(&fold.train);
    let test_m = pick(&fold.test);
    if train_m.iter().any(|m| fold.test.contains(&m.id)) {
        return Err(Error::Invariant(format!("fold {fold_index} trains on a test meeting")));
    }
    let seed = seed.wrapping_add(fold_index as u64);
    let cfg = &ws.config;

    let topics = fit_topics(ws, &train_m, &test_m, seed)?;
    let pair_svm = train_pairwise(ws, &train_m, ModelKind::Svm, seed)?;
    let pair_maxent = train_pairwise(ws, &train_m, ModelKind::MaxEnt, seed)?;
    // [learner][context?] for each level.
    let mut da_models = Vec::new();
    let mut token_models = Vec::new();
    for kind in [ModelKind::MaxEnt, ModelKind::Svm] {
        let mut da = Vec::new();
        let mut tok = Vec::new();
        for ctx in [0, cfg.context_n] {
            da.push(train_da(ws, &train_m, kind, ctx, seed)?);
            tok.push(train_token(ws, &train_m, kind, ctx, seed)?);
        }
        da_models.push(da);
        token_models.push(tok);
    }

    let (plan, _) = summary_plan(cfg.context_n);
    let mut out = FoldResults::default();
    for m in test_m {
        let ma = ws.analyze(m);
        let mut system = BTreeMap::new();
        for (mi, method) in ClusterMethod::ALL.into_iter().enumerate() {
            let clusterer = match method {
                ClusterMethod::AllInOne => Clusterer::AllInOne,
                ClusterMethod::Contiguous => Clusterer::Contiguous(cfg.contiguous_segments),
                _ => {
                    let kind = method.similarity().expect("similarity-based method");
                    let source = match method {
                        ClusterMethod::Tfidf => SimilaritySource::Tfidf,
                        ClusterMethod::Lda => SimilaritySource::Lda(&topics),
                        ClusterMethod::PairwiseSvm => SimilaritySource::Model(&pair_svm),
                        _ => SimilaritySource::Model(&pair_maxent),
                    };
                    Clusterer::Hac { source, threshold: cfg.thresholds.get(kind) }
                }
            };
            let clustering = cluster_meeting(&ma, clusterer)?;
            if let Some(score) = score_clustering(ws, &clustering, m)? {
                out.clustering.entry(mi).or_default().push(score);
            }
            system.insert(method, clustering);
        }

        for (row, &(cond, summarizer, learner, ctx)) in plan.iter().enumerate() {
            let source = match CONDITIONS[cond] {
                "true" => ClusterSource::Gold,
                "lda" => ClusterSource::System(&system[&ClusterMethod::Lda]),
                "svm" => ClusterSource::System(&system[&ClusterMethod::PairwiseSvm]),
                _ => ClusterSource::NoClustering,
            };
            let slot = usize::from(ctx > 0);
            let s = match (summarizer, learner) {
                ("longest", _) => Summarizer::Longest,
                ("prototype", _) => Summarizer::Prototype,
                ("upper-bound", _) => Summarizer::UpperBound,
                ("da", Some(k)) => Summarizer::Da(&da_models[learner_slot(k)][slot]),
                ("token", Some(k)) => Summarizer::Token(&token_models[learner_slot(k)][slot]),
                _ => unreachable!("summary plan rows are well formed"),
            };
            for o in summarize_meeting(ws, &ma, source, s, ctx)? {
                out.summaries.entry(row).or_default().push(o.rouge);
            }
        }
    }
    Ok(out)
}

/// k-fold cross-validation over meetings: every model used on a meeting is
/// trained on the other folds only.
pub fn cross_validate(meetings: &[Meeting], config: Config, seed: u64) -> Result<XvalReport> {
    let ws = Workspace::new(meetings, config)?;
    let ids: Vec<String> = meetings.iter().map(|m| m.id.clone()).collect();
    let folds = kfold_split(&ids, ws.config.folds, seed)?;
    for (i, f) in folds.iter().enumerate() {
        if f.train.iter().any(|id| f.test.contains(id)) {
            return Err(Error::Invariant(format!("fold {i} leaks test meetings into training")));
        }
    }
    let results: Vec<FoldResults> =
        folds.par_iter().enumerate().map(|(i, f)| run_fold(&ws, meetings, f, i, seed)).collect::<Result<_>>()?;

    let mut clustering = Vec::new();
    for (mi, method) in ClusterMethod::ALL.into_iter().enumerate() {
        let scores: Vec<ClusterScore> =
            results.iter().flat_map(|r| r.clustering.get(&mi).cloned().unwrap_or_default()).collect();
        let threshold = method.similarity().map(|k| ws.config.thresholds.get(k));
        clustering.push(ClusteringRow::from_scores(method, threshold, &scores)?);
    }

    let (plan, n_unsupervised) = summary_plan(ws.config.context_n);
    let mut unsupervised = Vec::new();
    let mut supervised = Vec::new();
    for (row, &(cond, summarizer, learner, ctx)) in plan.iter().enumerate() {
        let scores: Vec<Prf> =
            results.iter().flat_map(|r| r.summaries.get(&row).cloned().unwrap_or_default()).collect();
        let out = SummaryRow {
            clustering: CONDITIONS[cond].to_string(),
            summarizer: summarizer.to_string(),
            learner: learner.map(|k| k.to_string()),
            context_n: ctx,
            rouge: round_agg(aggregate(&scores)?),
        };
        if row < n_unsupervised {
            unsupervised.push(out);
        } else {
            supervised.push(out);
        }
    }
    Ok(XvalReport { seed, folds, clustering, unsupervised, supervised })
}

impl XvalReport {
    /// Plain-text tables laid out like the published result tables.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Clustering ({} folds, seed {})", self.folds.len(), self.seed);
        let _ = writeln!(
            s,
            "{:<16} {:>9} | {:>9} {:>9} {:>9} | {:>9} {:>9} {:>9} | {:>9}",
            "method", "threshold", "B3-P", "B3-R", "B3-F1", "pair-P", "pair-R", "pair-F1", "VOI"
        );
        for r in &self.clustering {
            let t = r.threshold.map(|t| format!("{t}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<16} {:>9} | {:>9.4} {:>9.4} {:>9.4} | {:>9.4} {:>9.4} {:>9.4} | {:>9.4}",
                r.method,
                t,
                r.bcubed.macro_prf.precision,
                r.bcubed.macro_prf.recall,
                r.bcubed.macro_prf.f1,
                r.pairwise.macro_prf.precision,
                r.pairwise.macro_prf.recall,
                r.pairwise.macro_prf.f1,
                r.voi
            );
        }
        for (title, rows) in
            [("Unsupervised summaries", &self.unsupervised), ("Supervised summaries", &self.supervised)]
        {
            let _ = writeln!(s, "\n{title} (ROUGE-1)");
            let _ = writeln!(
                s,
                "{:<10} {:<12} {:<8} {:>7} | {:>9} {:>9} {:>9}",
                "clusters", "summarizer", "learner", "context", "P", "R", "F1"
            );
            for r in rows.iter() {
                let _ = writeln!(
                    s,
                    "{:<10} {:<12} {:<8} {:>7} | {:>9.4} {:>9.4} {:>9.4}",
                    r.clustering,
                    r.summarizer,
                    r.learner.as_deref().unwrap_or("-"),
                    r.context_n,
                    r.rouge.macro_prf.precision,
                    r.rouge.macro_prf.recall,
                    r.rouge.macro_prf.f1
                );
            }
        }
        s
    }

    pub fn clustering_row(&self, method: ClusterMethod) -> Option<&ClusteringRow> {
        self.clustering.iter().find(|r| r.method == method.name())
    }
}

/// One meeting's clustering in the output file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringRecord {
    pub meeting_id: String,
    pub method: String,
    pub threshold: Option<f64>,
    pub clusters: Clustering,
}

/// Clusters every meeting with one method.
///
/// LDA and pairwise models come from `model` when given. Otherwise, with
/// `xval`, each meeting is clustered by models trained on the other folds;
/// without it, LDA is fitted on the whole corpus and supervised methods fail.
pub fn cluster_corpus(
    ws: &Workspace,
    meetings: &[Meeting],
    method: ClusterMethod,
    threshold: Option<f64>,
    model: Option<&LinearModel>,
    xval: bool,
    seed: u64,
) -> Result<Vec<ClusteringRecord>> {
    let threshold = method.similarity().map(|k| threshold.unwrap_or_else(|| ws.config.thresholds.get(k)));
    if let (Some(kind), Some(m)) = (method.learner(), model) {
        if m.kind != kind {
            return Err(Error::KindMismatch { expected: kind.to_string(), found: m.kind.to_string() });
        }
    }
    let all: Vec<&Meeting> = meetings.iter().collect();
    let groups: Vec<(Vec<&Meeting>, Vec<&Meeting>, u64)> = if xval {
        let ids: Vec<String> = meetings.iter().map(|m| m.id.clone()).collect();
        kfold_split(&ids, ws.config.folds, seed)?
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                let pick = |ids: &[String]| all.iter().copied().filter(|m| ids.contains(&m.id)).collect::<Vec<_>>();
                (pick(&f.train), pick(&f.test), seed.wrapping_add(i as u64))
            })
            .collect()
    } else {
        vec![(all.clone(), all.clone(), seed)]
    };

    let mut records: BTreeMap<String, ClusteringRecord> = BTreeMap::new();
    for (train_m, test_m, seed) in groups {
        let topics = match method {
            ClusterMethod::Lda => Some(fit_topics(ws, &train_m, &test_m, seed)?),
            _ => None,
        };
        let trained;
        let model = match (method.learner(), model) {
            (None, _) => None,
            (Some(_), Some(m)) => Some(m),
            (Some(kind), None) if xval => {
                trained = train_pairwise(ws, &train_m, kind, seed)?;
                Some(&trained)
            }
            (Some(_), None) => {
                return Err(Error::invalid(format!("{} needs a trained model or cross-validation", method.name())))
            }
        };
        for m in test_m {
            let ma = ws.analyze(m);
            let clusterer = match method {
                ClusterMethod::AllInOne => Clusterer::AllInOne,
                ClusterMethod::Contiguous => Clusterer::Contiguous(ws.config.contiguous_segments),
                ClusterMethod::Tfidf => {
                    Clusterer::Hac { source: SimilaritySource::Tfidf, threshold: threshold.unwrap() }
                }
                ClusterMethod::Lda => Clusterer::Hac {
                    source: SimilaritySource::Lda(topics.as_ref().expect("topics fitted")),
                    threshold: threshold.unwrap(),
                },
                ClusterMethod::PairwiseSvm | ClusterMethod::PairwiseMaxent => Clusterer::Hac {
                    source: SimilaritySource::Model(model.expect("model resolved")),
                    threshold: threshold.unwrap(),
                },
            };
            let clusters = cluster_meeting(&ma, clusterer)?;
            records.insert(
                m.id.clone(),
                ClusteringRecord { meeting_id: m.id.clone(), method: method.name().to_string(), threshold, clusters },
            );
        }
    }
    // Corpus order.
    Ok(meetings.iter().filter_map(|m| records.remove(&m.id)).collect())
}

/// Scores clustering records against gold, one row for the whole corpus.
pub fn clustering_report(
    ws: &Workspace,
    meetings: &[Meeting],
    method: ClusterMethod,
    records: &[ClusteringRecord],
) -> Result<ClusteringRow> {
    let mut scores = Vec::new();
    for r in records {
        let m = meetings
            .iter()
            .find(|m| m.id == r.meeting_id)
            .ok_or_else(|| Error::invalid(format!("clustering for unknown meeting {}", r.meeting_id)))?;
        if let Some(s) = score_clustering(ws, &r.clusters, m)? {
            scores.push(s);
        }
    }
    let threshold = records.first().and_then(|r| r.threshold);
    ClusteringRow::from_scores(method, threshold, &scores)
}

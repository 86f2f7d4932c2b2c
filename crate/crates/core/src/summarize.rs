//! Decision summaries from clusters of decision-related DAs.
//!
//! Clusters hold meeting positions. Context DAs only ever feed features and
//! never contribute words to a summary.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Clustering, Meeting};
use crate::error::{Error, Result};
use crate::features::{da_features_at, token_features_at, MeetingAnalysis, DA_SPACE, TOKEN_SPACE};
use crate::learn::{FeatureVector, LinearModel};
use crate::textproc::{centroid, cosine, stem, TfIdfVector};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionCluster {
    /// Decision-related DA positions, in meeting order.
    pub core: Vec<usize>,
    /// Non-decision-related DA positions, most relevant first.
    pub context: Vec<usize>,
    pub aligned_decision: Option<String>,
}

impl DecisionCluster {
    pub fn new(mut core: Vec<usize>, aligned_decision: Option<String>) -> Result<Self> {
        if core.is_empty() {
            return Err(Error::invalid("a decision cluster needs at least one DA"));
        }
        core.sort_unstable();
        core.dedup();
        Ok(DecisionCluster { core, context: Vec::new(), aligned_decision })
    }

    /// Clusters of DA ids resolved to positions in `meeting`.
    pub fn from_ids(meeting: &Meeting, ids: &[String], aligned_decision: Option<String>) -> Result<Self> {
        let core = ids
            .iter()
            .map(|id| {
                meeting.position(id).ok_or_else(|| Error::invalid(format!("DA {id} is not in meeting {}", meeting.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(core, aligned_decision)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryLevel {
    Da,
    Token,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub level: SummaryLevel,
    /// Selected DA ids (DA level) or words (token level), in meeting order.
    pub selected: Vec<String>,
    pub text: String,
}

impl DecisionSummary {
    fn from_das(ma: &MeetingAnalysis, positions: &[usize]) -> Self {
        let mut positions = positions.to_vec();
        positions.sort_unstable();
        let fragments: Vec<String> = positions.iter().map(|&p| ma.render(p)).filter(|s| !s.is_empty()).collect();
        DecisionSummary {
            level: SummaryLevel::Da,
            selected: positions.iter().map(|&p| ma.meeting.das[p].id.clone()).collect(),
            text: fragments.join(", "),
        }
    }

    fn from_words(words: Vec<String>) -> Self {
        DecisionSummary { level: SummaryLevel::Token, text: words.join(" "), selected: words }
    }

    /// Words of the rendered text, the unit ROUGE compares.
    pub fn words(&self) -> Vec<String> {
        self.text.split(|c: char| c.is_whitespace() || c == ',').filter(|w| !w.is_empty()).map(String::from).collect()
    }
}

/// Content stems of an abstract, the target of training labels.
fn abstract_stems(
    ma: &MeetingAnalysis,
    analyzer: &crate::textproc::Analyzer,
    decision: &str,
) -> Result<BTreeSet<String>> {
    let abs = ma
        .meeting
        .abstract_for(decision)
        .ok_or_else(|| Error::invalid(format!("meeting {} has no abstract for decision {decision}", ma.meeting.id)))?;
    Ok(analyzer.content_stems(&abs.text).into_iter().collect())
}

fn aligned(c: &DecisionCluster) -> Result<&str> {
    c.aligned_decision.as_deref().ok_or_else(|| Error::invalid("cluster is not aligned to a decision"))
}

/// Index of the maximum key; the earliest wins ties.
fn argmax_by<F: Fn(usize) -> f64>(items: &[usize], key: F) -> usize {
    let mut best = items[0];
    let mut best_key = key(best);
    for &p in &items[1..] {
        let k = key(p);
        if k > best_key {
            best = p;
            best_key = k;
        }
    }
    best
}

/// Ordering key for "earliest": start time, then meeting position.
fn by_time(ma: &MeetingAnalysis, positions: &mut [usize]) {
    positions.sort_by(|&a, &b| ma.meeting.das[a].start_time.total_cmp(&ma.meeting.das[b].start_time).then(a.cmp(&b)));
}

/// The core DA with the most content words.
pub fn longest_da(c: &DecisionCluster, ma: &MeetingAnalysis) -> DecisionSummary {
    let mut core = c.core.clone();
    by_time(ma, &mut core);
    let best = argmax_by(&core, |p| ma.tokens(p).len() as f64);
    DecisionSummary::from_das(ma, &[best])
}

/// The core DA closest to the centroid of the core vectors.
pub fn prototype_da(c: &DecisionCluster, ma: &MeetingAnalysis) -> DecisionSummary {
    let mut core = c.core.clone();
    by_time(ma, &mut core);
    let vectors: Vec<TfIdfVector> = core.iter().map(|&p| ma.vector(p).clone()).collect();
    let center = centroid(&vectors);
    let best = argmax_by(&core, |p| cosine(ma.vector(p), &center));
    DecisionSummary::from_das(ma, &[best])
}

/// Adds the `n` non-decision-related DAs nearest to the core centroid.
pub fn add_context(c: &DecisionCluster, ma: &MeetingAnalysis, n: usize) -> DecisionCluster {
    let vectors: Vec<TfIdfVector> = c.core.iter().map(|&p| ma.vector(p).clone()).collect();
    let center = centroid(&vectors);
    DecisionCluster { context: ma.nearest_non_drdas(&center, n), ..c.clone() }
}

/// Per-DA training labels for one gold cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct DaLabels {
    /// (position, label) for core DAs in meeting order, then context DAs.
    pub labels: Vec<(usize, bool)>,
    /// Overlap of the positive DA with the abstract; 0 means the positive was a fallback.
    pub best_overlap: usize,
}

/// Marks the single core DA sharing the most content stems with the abstract
/// as positive. With no overlap at all, the earliest DA is positive.
pub fn label_das_for_training(
    c: &DecisionCluster,
    ma: &MeetingAnalysis,
    analyzer: &crate::textproc::Analyzer,
) -> Result<DaLabels> {
    let target = abstract_stems(ma, analyzer, aligned(c)?)?;
    let mut core = c.core.clone();
    by_time(ma, &mut core);
    let overlap = |p: usize| ma.stems(p).intersection(&target).count();
    let best = argmax_by(&core, |p| overlap(p) as f64);
    let mut labels: Vec<(usize, bool)> = c.core.iter().map(|&p| (p, p == best)).collect();
    labels.extend(c.context.iter().map(|&p| (p, false)));
    Ok(DaLabels { labels, best_overlap: overlap(best) })
}

/// Token labels: positive iff the token's stem occurs in the abstract's
/// content stems. Covers core and context DAs: (position, token index, label).
pub fn label_tokens_for_training(
    c: &DecisionCluster,
    ma: &MeetingAnalysis,
    analyzer: &crate::textproc::Analyzer,
) -> Result<Vec<(usize, usize, bool)>> {
    let target = abstract_stems(ma, analyzer, aligned(c)?)?;
    Ok(c.core
        .iter()
        .chain(&c.context)
        .flat_map(|&p| {
            let target = &target;
            ma.tokens(p).iter().enumerate().map(move |(t, tok)| (p, t, target.contains(&tok.stem)))
        })
        .collect())
}

/// DA-level feature vectors for the cluster: core first, then context.
pub fn da_examples(c: &DecisionCluster, ma: &MeetingAnalysis) -> Vec<(usize, FeatureVector)> {
    c.core.iter().chain(&c.context).map(|&p| (p, da_features_at(p, ma))).collect()
}

/// Keeps every core DA the model calls positive, or the best-scoring one if none is.
pub fn extract_das(model: &LinearModel, c: &DecisionCluster, ma: &MeetingAnalysis) -> Result<DecisionSummary> {
    model.expect_feature_space(DA_SPACE)?;
    let scores: BTreeMap<usize, f64> = c.core.iter().map(|&p| (p, model.score(&da_features_at(p, ma)))).collect();
    let mut chosen: Vec<usize> = c.core.iter().copied().filter(|p| model.is_positive_score(scores[p])).collect();
    if chosen.is_empty() {
        let mut core = c.core.clone();
        by_time(ma, &mut core);
        chosen.push(argmax_by(&core, |p| scores[&p]));
    }
    Ok(DecisionSummary::from_das(ma, &chosen))
}

/// Keeps the core tokens the model calls positive, first occurrence per stem.
pub fn extract_tokens(model: &LinearModel, c: &DecisionCluster, ma: &MeetingAnalysis) -> Result<DecisionSummary> {
    model.expect_feature_space(TOKEN_SPACE)?;
    let mut seen = HashSet::new();
    let mut words = Vec::new();
    for &p in &c.core {
        for (t, tok) in ma.tokens(p).iter().enumerate() {
            if seen.contains(&tok.stem) {
                continue;
            }
            if model.is_positive(&token_features_at(p, t, ma)) {
                seen.insert(tok.stem.clone());
                words.push(tok.surface.clone());
            }
        }
    }
    Ok(DecisionSummary::from_words(words))
}

/// Every core word whose stem is in the abstract, first occurrence per stem.
pub fn upper_bound_summary(
    c: &DecisionCluster,
    ma: &MeetingAnalysis,
    analyzer: &crate::textproc::Analyzer,
) -> Result<DecisionSummary> {
    let target = abstract_stems(ma, analyzer, aligned(c)?)?;
    let mut seen = HashSet::new();
    let words = c
        .core
        .iter()
        .flat_map(|&p| ma.tokens(p))
        .filter(|t| target.contains(&t.stem) && seen.insert(t.stem.clone()))
        .map(|t| t.surface.clone())
        .collect();
    Ok(DecisionSummary::from_words(words))
}

/// Maps each system cluster to the decision most of its DAs link to; ties go
/// to the smallest decision id. Clusters with no linked DA get `None`.
pub fn align_clusters_to_decisions(clustering: &Clustering, meeting: &Meeting) -> Vec<Option<String>> {
    clustering
        .clusters()
        .iter()
        .map(|cluster| {
            let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
            for id in cluster {
                if let Some(da) = meeting.da(id) {
                    for d in &da.decisions {
                        *votes.entry(d.as_str()).or_default() += 1;
                    }
                }
            }
            let best = votes.values().copied().max()?;
            votes.into_iter().find(|&(_, v)| v == best).map(|(d, _)| d.to_string())
        })
        .collect()
}

/// Words of a content-word string split the way summaries are scored.
pub fn summary_words(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || c == ',').filter(|w| !w.is_empty()).map(String::from).collect()
}

/// Stems of a word list, used when comparing summaries by stem.
pub fn stems_of(words: &[String]) -> Vec<String> {
    words.iter().map(|w| stem(w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FeatureConfig;
    use crate::corpus::{decision_members, toy_corpus, DialogueAct};
    use crate::learn::{train, ModelKind, TrainConfig};
    use crate::textproc::{Analyzer, Stopwords, Vectorizer};

    fn analyzer() -> Analyzer {
        Analyzer::new(Stopwords::english())
    }

    fn corpus_vectorizer(corpus: &[Meeting]) -> Vectorizer {
        let a = analyzer();
        let docs: Vec<Vec<String>> =
            corpus.iter().flat_map(|m| m.drdas().map(|d| a.content_stems(&d.text)).collect::<Vec<_>>()).collect();
        Vectorizer::fit(&docs, false).unwrap()
    }

    fn gold_cluster(m: &Meeting, decision: &str) -> DecisionCluster {
        let members = decision_members(m);
        DecisionCluster::from_ids(m, &members[decision], Some(decision.to_string())).unwrap()
    }

    fn with<R>(meeting_index: usize, f: impl FnOnce(&Meeting, &MeetingAnalysis) -> R) -> R {
        let corpus = toy_corpus();
        let vz = corpus_vectorizer(&corpus);
        let config = FeatureConfig::default();
        let m = &corpus[meeting_index];
        let ma = MeetingAnalysis::new(m, &analyzer(), &vz, &config);
        f(m, &ma)
    }

    #[test]
    fn worked_example_unsupervised_outputs() {
        with(1, |m, ma| {
            // The four DAs shown together in the worked example span two decisions.
            let core: Vec<usize> = [2, 3, 6, 8].to_vec();
            assert!(core.iter().all(|&p| m.das[p].is_drda()));
            let c = DecisionCluster::new(core, Some("b".into())).unwrap();
            assert_eq!(longest_da(&c, ma).text, "talked about personal face plates in meeting");
            assert_eq!(prototype_da(&c, ma).text, "actual remote hard plastic casings rubber");
        });
    }

    #[test]
    fn singleton_and_tie_rules() {
        with(0, |m, ma| {
            let c = DecisionCluster::new(vec![3], None).unwrap();
            assert_eq!(longest_da(&c, ma).selected, vec![m.das[3].id.clone()]);
            assert_eq!(prototype_da(&c, ma).selected, vec![m.das[3].id.clone()]);
        });
        let mut m = toy_corpus().remove(0);
        m.das[4].text = "rubber buttons please".into();
        m.das[6].text = "rubber buttons please".into();
        let vz = corpus_vectorizer(std::slice::from_ref(&m));
        let config = FeatureConfig::default();
        let ma = MeetingAnalysis::new(&m, &analyzer(), &vz, &config);
        let c = DecisionCluster::new(vec![6, 4], None).unwrap();
        assert_eq!(longest_da(&c, &ma).selected, vec![m.das[4].id.clone()]);
        assert_eq!(prototype_da(&c, &ma).selected, vec![m.das[4].id.clone()]);
    }

    #[test]
    fn upper_bound_on_the_rubber_decision() {
        with(0, |m, ma| {
            let pos = m.das.iter().position(|d| d.text.contains("the case would be rubber")).unwrap();
            let c = DecisionCluster::new(vec![pos], m.das[pos].decisions.first().cloned()).unwrap();
            let s = upper_bound_summary(&c, ma, &analyzer()).unwrap();
            let mut got = s.selected.clone();
            got.sort();
            assert_eq!(got, ["buttons", "rubber"]);
            assert_eq!(s.level, SummaryLevel::Token);
        });
    }

    #[test]
    fn labels_pick_the_best_overlap() {
        with(1, |m, ma| {
            let c = gold_cluster(m, "b");
            let labels = label_das_for_training(&c, ma, &analyzer()).unwrap();
            assert_eq!(labels.labels.iter().filter(|(_, y)| *y).count(), 1);
            assert!(labels.best_overlap > 0);
            let tokens = label_tokens_for_training(&c, ma, &analyzer()).unwrap();
            let rubber = tokens.iter().find(|(p, t, _)| ma.tokens(*p)[*t].surface == "rubber").unwrap();
            assert!(rubber.2);
        });
        with(0, |m, ma| {
            let c = DecisionCluster::new(vec![0, 1], Some("d1".into())).unwrap();
            let unaligned = DecisionCluster { aligned_decision: None, ..c.clone() };
            assert!(label_das_for_training(&unaligned, ma, &analyzer()).is_err());
            assert!(upper_bound_summary(&unaligned, ma, &analyzer()).is_err());
            let _ = m;
        });
    }

    fn labelled_meeting(texts: &[&str], abstract_text: &str) -> Meeting {
        let das = texts
            .iter()
            .enumerate()
            .map(|(i, t)| DialogueAct {
                id: format!("x.da{i}"),
                index: i,
                speaker: "A".into(),
                role: "PM".into(),
                start_time: i as f64,
                end_time: i as f64 + 0.5,
                da_type: "inf".into(),
                text: t.to_string(),
                topic: None,
                decisions: vec!["d".into()],
                tokens: None,
            })
            .collect();
        Meeting {
            id: "x".into(),
            das,
            adjacency_pairs: vec![],
            abstracts: vec![crate::corpus::DecisionAbstract { id: "d".into(), text: abstract_text.into() }],
        }
    }

    fn first_positive(m: &Meeting) -> usize {
        let vz = corpus_vectorizer(std::slice::from_ref(m));
        let config = FeatureConfig::default();
        let ma = MeetingAnalysis::new(m, &analyzer(), &vz, &config);
        let c = DecisionCluster::new((0..m.len()).collect(), Some("d".into())).unwrap();
        let l = label_das_for_training(&c, &ma, &analyzer()).unwrap();
        l.labels.iter().find(|(_, y)| *y).unwrap().0
    }

    #[test]
    fn label_overlap_examples() {
        let abs = "red rubber remote button";
        assert_eq!(first_positive(&labelled_meeting(&["red rubber remote", "button", "banana"], abs)), 0);
        assert_eq!(first_positive(&labelled_meeting(&["banana", "apple", "cherry"], abs)), 0);
        assert_eq!(first_positive(&labelled_meeting(&["apple", "red rubber", "remote button"], abs)), 1);
    }

    #[test]
    fn context_excludes_decision_related_das() {
        with(0, |m, ma| {
            let c = gold_cluster(m, "d1");
            assert_eq!(add_context(&c, ma, 0).context, Vec::<usize>::new());
            let all = add_context(&c, ma, 1000);
            let non_drdas = m.das.iter().filter(|d| !d.is_drda()).count();
            assert_eq!(all.context.len(), non_drdas);
            assert!(all.context.iter().all(|&p| !m.das[p].is_drda()));
            assert_eq!(all.core, c.core);
        });
    }

    #[test]
    fn extraction_respects_feature_space_and_fallback() {
        with(1, |m, ma| {
            let c = add_context(&gold_cluster(m, "b"), ma, 3);
            let labels = label_das_for_training(&c, ma, &analyzer()).unwrap();
            let examples: Vec<(FeatureVector, bool)> =
                labels.labels.iter().map(|&(p, y)| (da_features_at(p, ma), y)).collect();
            let config = TrainConfig { feature_space: DA_SPACE.into(), ..TrainConfig::default() };
            let model = train(ModelKind::Svm, &examples, &config).unwrap();
            let s = extract_das(&model, &c, ma).unwrap();
            assert!(!s.selected.is_empty());
            for id in &s.selected {
                assert!(c.core.contains(&m.position(id).unwrap()));
            }
            assert!(extract_tokens(&model, &c, ma).is_err());

            // A model that scores everything negative still yields one DA.
            let mut negative = model.clone();
            negative.weights.iter_mut().for_each(|w| *w = 0.0);
            negative.bias = -1.0;
            assert_eq!(extract_das(&negative, &c, ma).unwrap().selected.len(), 1);
        });
    }

    #[test]
    fn alignment_by_plurality() {
        let corpus = toy_corpus();
        let m = &corpus[0];
        let gold = crate::corpus::gold_clustering(m);
        let aligned = align_clusters_to_decisions(&gold, m);
        let expected: Vec<Option<String>> = crate::corpus::gold_assignment(m).into_keys().map(Some).collect();
        let mut got = aligned.clone();
        got.sort();
        assert_eq!(got, expected);

        let ids = |d: &str| decision_members(m)[d].clone();
        let mut mixed = ids("d1");
        mixed.push(ids("d2")[0].clone());
        let c = Clustering::new(vec![mixed]).unwrap();
        assert_eq!(align_clusters_to_decisions(&c, m), vec![Some("d1".to_string())]);
        let non = m.das.iter().find(|d| !d.is_drda()).unwrap().id.clone();
        let c = Clustering::new(vec![vec![non]]).unwrap();
        assert_eq!(align_clusters_to_decisions(&c, m), vec![None]);
    }

    #[test]
    fn rendering_joins_fragments() {
        with(1, |m, ma| {
            let c = gold_cluster(m, "b");
            let s = DecisionSummary::from_das(ma, &c.core);
            assert_eq!(s.text.matches(", ").count(), c.core.len() - 1);
            assert_eq!(summary_words("a b, c"), ["a", "b", "c"]);
            assert_eq!(s.words(), summary_words(&s.text));
        });
    }
}

//! Feature inventories for pairwise clustering and for DA- and token-level
//! extraction, plus the dialogue cue predicates they rely on.

use std::collections::BTreeSet;

use crate::config::FeatureConfig;
use crate::corpus::{DialogueAct, Meeting};
use crate::error::{Error, Result};
use crate::learn::FeatureVector;
use crate::textproc::{cosine, stem, tokenize, Analyzer, TfIdfVector, Vectorizer};

/// Feature-space tags stored in trained models.
pub const PAIRWISE_SPACE: &str = "pairwise";
pub const DA_SPACE: &str = "da";
pub const TOKEN_SPACE: &str = "token";

/// Names of the eight pairwise features, in a fixed order.
pub const PAIRWISE_FEATURES: [&str; 8] = [
    "overlap_count",
    "overlap_ratio",
    "tfidf_cosine",
    "in_adjacency_pair",
    "time_diff",
    "position_diff",
    "same_da_type",
    "context_overlap",
];

/// True iff some token of the DA is in the feedback lexicon.
pub fn is_positive_feedback(da: &DialogueAct, lexicon: &[String]) -> bool {
    tokenize(&da.text).iter().any(|t| lexicon.iter().any(|w| w == t))
}

/// True iff the DA says "wrap up" (any inflection, or hyphenated) or "recap".
pub fn is_wrapup_indicator(da: &DialogueAct) -> bool {
    let stems: Vec<String> = tokenize(&da.text).iter().map(|t| stem(t)).collect();
    stems.iter().enumerate().any(|(i, s)| {
        s == "recap"
            || s.starts_with("wrap-up")
            || s.starts_with("wrapup")
            || (s == "wrap" && stems.get(i + 1).is_some_and(|n| n == "up"))
    })
}

/// Distance from the DA to the nearest wrap-up/recap DA, as a fraction of the
/// meeting length. `None` when the meeting has no such DA.
pub fn wrapup_relative_position(da: &DialogueAct, meeting: &Meeting) -> Option<f64> {
    let indicators: Vec<usize> = meeting.das.iter().filter(|d| is_wrapup_indicator(d)).map(|d| d.index).collect();
    nearest_distance(da.index, &indicators, meeting.len())
}

fn nearest_distance(index: usize, indicators: &[usize], n: usize) -> Option<f64> {
    indicators.iter().map(|&i| i.abs_diff(index)).min().map(|d| d as f64 / n as f64)
}

/// One analysed token of a DA.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub surface: String,
    pub stem: String,
    /// Index into the DA's token annotations, when the DA carries them.
    pub annotation: Option<usize>,
}

/// Token sequence of a DA: annotation surfaces when present, the tokenized
/// text otherwise. Stopwords are dropped.
pub fn content_tokens(da: &DialogueAct, analyzer: &Analyzer) -> Vec<Token> {
    let raw: Vec<(String, Option<usize>)> = match &da.tokens {
        Some(annotations) => annotations
            .iter()
            .enumerate()
            .flat_map(|(i, a)| tokenize(&a.surface).into_iter().map(move |t| (t, Some(i))))
            .collect(),
        None => tokenize(&da.text).into_iter().map(|t| (t, None)).collect(),
    };
    raw.into_iter()
        .filter(|(t, _)| !analyzer.is_stopword(t))
        .map(|(surface, annotation)| Token { stem: stem(&surface), surface, annotation })
        .collect()
}

/// Per-meeting precomputation shared by every feature extractor.
#[derive(Debug, Clone)]
pub struct MeetingAnalysis<'a> {
    pub meeting: &'a Meeting,
    pub config: &'a FeatureConfig,
    tokens: Vec<Vec<Token>>,
    stem_sets: Vec<BTreeSet<String>>,
    vectors: Vec<TfIdfVector>,
    feedback: Vec<bool>,
    indicators: Vec<usize>,
    /// Per DA, the adjacency pairs it takes part in, as (pair index, is source).
    pair_roles: Vec<Vec<(usize, bool)>>,
    /// Per DA, union of content stems over its pairwise-feature context.
    context_stems: Vec<BTreeSet<String>>,
}

impl<'a> MeetingAnalysis<'a> {
    pub fn new(meeting: &'a Meeting, analyzer: &Analyzer, vectorizer: &Vectorizer, config: &'a FeatureConfig) -> Self {
        let tokens: Vec<Vec<Token>> = meeting.das.iter().map(|da| content_tokens(da, analyzer)).collect();
        let stem_sets = tokens.iter().map(|ts| ts.iter().map(|t| t.stem.clone()).collect()).collect();
        let vectors = tokens
            .iter()
            .map(|ts| vectorizer.vectorize(&ts.iter().map(|t| t.stem.as_str()).collect::<Vec<_>>()))
            .collect();
        let feedback = meeting.das.iter().map(|da| is_positive_feedback(da, &config.feedback_lexicon)).collect();
        let indicators = meeting.das.iter().filter(|d| is_wrapup_indicator(d)).map(|d| d.index).collect();
        let mut pair_roles = vec![Vec::new(); meeting.len()];
        for (k, ap) in meeting.adjacency_pairs.iter().enumerate() {
            if let (Some(s), Some(t)) = (meeting.position(&ap.source_da), meeting.position(&ap.target_da)) {
                pair_roles[s].push((k, true));
                pair_roles[t].push((k, false));
            }
        }
        let mut analysis = MeetingAnalysis {
            meeting,
            config,
            tokens,
            stem_sets,
            vectors,
            feedback,
            indicators,
            pair_roles,
            context_stems: Vec::new(),
        };
        analysis.context_stems = (0..meeting.len())
            .map(|i| {
                let ctx = if meeting.das[i].is_drda() {
                    analysis.nearest_non_drdas(&analysis.vectors[i], config.pairwise_context_n)
                } else {
                    Vec::new()
                };
                ctx.iter().flat_map(|&j| analysis.stem_sets[j].iter().cloned()).collect()
            })
            .collect();
        analysis
    }

    pub fn tokens(&self, pos: usize) -> &[Token] {
        &self.tokens[pos]
    }

    pub fn stems(&self, pos: usize) -> &BTreeSet<String> {
        &self.stem_sets[pos]
    }

    pub fn vector(&self, pos: usize) -> &TfIdfVector {
        &self.vectors[pos]
    }

    pub fn is_feedback(&self, pos: usize) -> bool {
        self.feedback[pos]
    }

    /// Content words of the DA joined by spaces.
    pub fn render(&self, pos: usize) -> String {
        self.tokens[pos].iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ")
    }

    pub fn position_of(&self, da: &DialogueAct) -> Result<usize> {
        match self.meeting.position(&da.id) {
            Some(p) if self.meeting.das[p] == *da => Ok(p),
            _ => Err(Error::invalid(format!("DA {} is not part of meeting {}", da.id, self.meeting.id))),
        }
    }

    /// Up to `n` non-decision-related DAs most similar to `target`, best first,
    /// ties broken by meeting order.
    pub fn nearest_non_drdas(&self, target: &TfIdfVector, n: usize) -> Vec<usize> {
        let mut scored: Vec<(f64, usize)> = self
            .meeting
            .das
            .iter()
            .enumerate()
            .filter(|(_, da)| !da.is_drda())
            .map(|(j, _)| (cosine(target, &self.vectors[j]), j))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.into_iter().take(n).map(|(_, j)| j).collect()
    }

    fn is_question(&self, pos: usize) -> bool {
        let t = self.meeting.das[pos].da_type.to_lowercase();
        self.config.question_da_types.iter().any(|p| t.starts_with(&p.to_lowercase()))
    }

    fn in_pair_together(&self, a: usize, b: usize) -> bool {
        self.pair_roles[a].iter().any(|(k, _)| self.pair_roles[b].iter().any(|(k2, _)| k == k2))
    }

    fn structural_features(&self, pos: usize, fv: &mut FeatureVector) {
        let n = self.meeting.len();
        let begin = (self.config.begin_fraction * n as f64).ceil() as usize;
        let end = (self.config.end_fraction * n as f64).ceil() as usize;
        let bucket = if pos < begin {
            "beginning"
        } else if pos + end >= n {
            "ending"
        } else {
            "middle"
        };
        fv.flag(format!("position={bucket}"), true);

        let roles = &self.pair_roles[pos];
        if !roles.is_empty() {
            fv.flag("in_ap", true);
        }
        for &(k, is_source) in roles {
            let ap = &self.meeting.adjacency_pairs[k];
            let other_id = if is_source { &ap.target_da } else { &ap.source_da };
            let other = self.meeting.position(other_id).expect("validated adjacency pair");
            fv.flag(format!("ap_type={}", ap.ap_type), true);
            if self.meeting.das[other].is_drda() {
                fv.flag("ap_other_decision_related", true);
            }
            if is_source {
                fv.flag("ap_source", true);
                if self.feedback[other] {
                    fv.flag("ap_target_is_feedback", true);
                }
            } else {
                fv.flag("ap_target", true);
                if self.is_question(other) {
                    fv.flag("ap_source_is_question", true);
                }
            }
        }
        if let Some(d) = nearest_distance(pos, &self.indicators, n) {
            fv.set("wrapup_distance", d);
        }
    }

    fn speaker_and_topic(&self, da: &DialogueAct, fv: &mut FeatureVector) {
        fv.flag(format!("role={}", da.role), true);
        if let Some(topic) = &da.topic {
            fv.flag(format!("topic={topic}"), true);
        }
    }
}

/// The eight pairwise features for two distinct DAs of the same meeting.
/// Every feature is emitted, zeros included, and all are symmetric in (a, b).
pub fn pairwise_features(a: &DialogueAct, b: &DialogueAct, ma: &MeetingAnalysis) -> Result<FeatureVector> {
    let i = ma.position_of(a)?;
    let j = ma.position_of(b)?;
    if i == j {
        return Err(Error::invalid(format!("pairwise features need two distinct DAs, got {} twice", a.id)));
    }
    Ok(pairwise_features_at(i, j, ma))
}

pub(crate) fn pairwise_features_at(i: usize, j: usize, ma: &MeetingAnalysis) -> FeatureVector {
    let (a, b) = (&ma.meeting.das[i], &ma.meeting.das[j]);
    let overlap = ma.stem_sets[i].intersection(&ma.stem_sets[j]).count();
    let shorter = ma.stem_sets[i].len().min(ma.stem_sets[j].len());
    let ratio = if shorter == 0 { 0.0 } else { overlap as f64 / shorter as f64 };
    let context_overlap = ma.context_stems[i].intersection(&ma.context_stems[j]).count();
    let mut fv = FeatureVector::new();
    let values = [
        overlap as f64,
        ratio,
        cosine(&ma.vectors[i], &ma.vectors[j]),
        f64::from(u8::from(ma.in_pair_together(i, j))),
        (a.start_time - b.start_time).abs(),
        i.abs_diff(j) as f64 / ma.meeting.len() as f64,
        f64::from(u8::from(a.da_type == b.da_type)),
        context_overlap as f64,
    ];
    for (name, v) in PAIRWISE_FEATURES.iter().zip(values) {
        fv.set(*name, v);
    }
    fv
}

/// DA-level inventory: lexical, structural, discourse and speaker features.
pub fn da_features(da: &DialogueAct, ma: &MeetingAnalysis) -> Result<FeatureVector> {
    Ok(da_features_at(ma.position_of(da)?, ma))
}

pub(crate) fn da_features_at(pos: usize, ma: &MeetingAnalysis) -> FeatureVector {
    let da = &ma.meeting.das[pos];
    let tokens = &ma.tokens[pos];
    let mut fv = FeatureVector::new();
    for t in tokens {
        fv.flag(format!("uni={}", t.stem), true);
    }
    for w in tokens.windows(2) {
        fv.flag(format!("bi={}_{}", w[0].stem, w[1].stem), true);
    }
    fv.set("length", tokens.len() as f64);
    fv.flag("has_digit", da.text.chars().any(|c| c.is_ascii_digit()));
    if let Some(next) = ma.stem_sets.get(pos + 1) {
        fv.flag("overlaps_next", !ma.stem_sets[pos].is_disjoint(next));
        fv.flag("next_is_feedback", ma.feedback[pos + 1]);
    }
    ma.structural_features(pos, &mut fv);
    fv.flag(format!("da_type={}", da.da_type), true);
    ma.speaker_and_topic(da, &mut fv);
    fv
}

/// Token-level inventory for the `tok_index`-th content token of the DA.
pub fn token_features(da: &DialogueAct, tok_index: usize, ma: &MeetingAnalysis) -> Result<FeatureVector> {
    let pos = ma.position_of(da)?;
    if tok_index >= ma.tokens[pos].len() {
        return Err(Error::invalid(format!(
            "token index {tok_index} out of range for DA {} with {} content tokens",
            da.id,
            ma.tokens[pos].len()
        )));
    }
    Ok(token_features_at(pos, tok_index, ma))
}

pub(crate) fn token_features_at(pos: usize, tok_index: usize, ma: &MeetingAnalysis) -> FeatureVector {
    let da = &ma.meeting.das[pos];
    let tokens = &ma.tokens[pos];
    let tok = &tokens[tok_index];
    let mut fv = FeatureVector::new();
    fv.flag(format!("tok={}", tok.stem), true);
    if let Some(next) = tokens.get(tok_index + 1) {
        fv.flag(format!("bi={}_{}", tok.stem, next.stem), true);
    }
    fv.set("length", tokens.len() as f64);
    fv.flag("is_digit", tok.surface.chars().all(|c| c.is_ascii_digit()));
    if let Some(next) = ma.stem_sets.get(pos + 1) {
        fv.flag("in_next", next.contains(&tok.stem));
        fv.flag("next_is_feedback", ma.feedback[pos + 1]);
    }
    ma.structural_features(pos, &mut fv);
    if let (Some(i), Some(annotations)) = (tok.annotation, &da.tokens) {
        let a = &annotations[i];
        if let Some(p) = &a.pos {
            fv.flag(format!("pos_tag={p}"), true);
        }
        if let Some(p) = a.phrase_type {
            fv.flag(format!("phrase={}", p.as_str()), true);
        }
        if let Some(rel) = &a.dep_relation {
            fv.flag(format!("dep={rel}"), true);
            if let Some(head) = a.dep_head.and_then(|h| annotations.get(h)) {
                if let Some(p) = head.phrase_type {
                    fv.flag(format!("dep={rel}_head={}", p.as_str()), true);
                }
            }
        }
    }
    ma.speaker_and_topic(da, &mut fv);
    fv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{toy_corpus, AdjacencyPair};
    use crate::textproc::Stopwords;
    use proptest::prelude::*;

    fn da(index: usize, speaker: &str, text: &str, start: f64) -> DialogueAct {
        DialogueAct {
            id: format!("m.da{index}"),
            index,
            speaker: speaker.into(),
            role: format!("role-{speaker}"),
            start_time: start,
            end_time: start + 1.0,
            da_type: "inf".into(),
            text: text.into(),
            topic: None,
            decisions: Vec::new(),
            tokens: None,
        }
    }

    fn meeting(texts: &[&str]) -> Meeting {
        Meeting {
            id: "m".into(),
            das: texts
                .iter()
                .enumerate()
                .map(|(i, t)| da(i, if i % 2 == 0 { "A" } else { "B" }, t, i as f64 * 2.0))
                .collect(),
            adjacency_pairs: Vec::new(),
            abstracts: Vec::new(),
        }
    }

    fn analyzer() -> Analyzer {
        Analyzer::new(Stopwords::english())
    }

    fn vectorizer(m: &Meeting) -> Vectorizer {
        let a = analyzer();
        let docs: Vec<Vec<String>> = m.das.iter().map(|d| a.content_stems(&d.text)).collect();
        Vectorizer::fit(&docs, false).unwrap()
    }

    fn lexicon() -> Vec<String> {
        FeatureConfig::default().feedback_lexicon
    }

    #[test]
    fn positive_feedback_examples() {
        assert!(is_positive_feedback(&da(0, "A", "Yeah .", 0.0), &lexicon()));
        assert!(!is_positive_feedback(&da(0, "A", "Flat on the top .", 0.0), &lexicon()));
        assert!(!is_positive_feedback(&da(0, "A", "", 0.0), &lexicon()));
    }

    #[test]
    fn wrapup_examples() {
        let mut texts = vec!["remote control"; 10];
        texts[9] = "so let's wrap up now";
        let m = meeting(&texts);
        assert_eq!(wrapup_relative_position(&m.das[5], &m), Some(0.4));
        assert_eq!(wrapup_relative_position(&m.das[9], &m), Some(0.0));
        let m = meeting(&["we should recap", "fine"]);
        assert_eq!(wrapup_relative_position(&m.das[0], &m), Some(0.0));
        let m = meeting(&["nothing", "here"]);
        assert_eq!(wrapup_relative_position(&m.das[0], &m), None);
        assert!(is_wrapup_indicator(&da(0, "A", "Wrapping up then", 0.0)));
        assert!(is_wrapup_indicator(&da(0, "A", "a quick wrap-up", 0.0)));
        assert!(!is_wrapup_indicator(&da(0, "A", "wrap the cable up", 0.0)));
    }

    #[test]
    fn pairwise_examples() {
        let m = meeting(&[
            "rubber buttons",
            "hello",
            "plastic case",
            "rubber buttons",
            "yellow",
            "plastic case",
            "x",
            "y",
            "z",
            "w",
        ]);
        let config = FeatureConfig::default();
        let vz = vectorizer(&m);
        let ma = MeetingAnalysis::new(&m, &analyzer(), &vz, &config);
        let f = pairwise_features(&m.das[0], &m.das[3], &ma).unwrap();
        assert_eq!(f.get("overlap_ratio"), Some(1.0));
        assert_eq!(f.get("overlap_count"), Some(2.0));
        let f = pairwise_features(&m.das[3], &m.das[5], &ma).unwrap();
        assert_eq!(f.get("position_diff"), Some(0.2));
        assert_eq!(f.get("overlap_count"), Some(0.0));
        assert_eq!(f.get("overlap_ratio"), Some(0.0));
        assert_eq!(f.get("time_diff"), Some(4.0));
        assert_eq!(f.len(), 8);
        assert!(pairwise_features(&m.das[3], &m.das[3], &ma).is_err());
        let other = meeting(&["rubber buttons"]);
        let mut stranger = other.das[0].clone();
        stranger.text = "changed".into();
        assert!(pairwise_features(&m.das[0], &stranger, &ma).is_err());
    }

    fn ap_meeting() -> Meeting {
        let mut m =
            meeting(&["Shall we use rubber ?", "Yeah .", "15 buttons", "ok", "more", "text", "x", "y", "z", "end"]);
        m.das[0].da_type = "el.ass".into();
        m.das[2].decisions = vec!["d1".into()];
        m.adjacency_pairs = vec![AdjacencyPair {
            source_da: m.das[0].id.clone(),
            target_da: m.das[1].id.clone(),
            ap_type: "pos.feedback".into(),
        }];
        m
    }

    #[test]
    fn da_feature_examples() {
        let m = ap_meeting();
        let config = FeatureConfig::default();
        let vz = vectorizer(&m);
        let ma = MeetingAnalysis::new(&m, &analyzer(), &vz, &config);
        let first = da_features(&m.das[0], &ma).unwrap();
        assert_eq!(first.get("position=beginning"), Some(1.0));
        assert_eq!(first.get("ap_source"), Some(1.0));
        assert_eq!(first.get("ap_target_is_feedback"), Some(1.0));
        assert_eq!(first.get("ap_type=pos.feedback"), Some(1.0));
        assert_eq!(first.get("next_is_feedback"), Some(1.0));
        assert_eq!(first.get("has_digit"), Some(0.0));
        assert!(!first.contains("wrapup_distance"));
        let second = da_features(&m.das[1], &ma).unwrap();
        assert_eq!(second.get("ap_target"), Some(1.0));
        assert_eq!(second.get("ap_source_is_question"), Some(1.0));
        assert!(!second.contains("ap_other_decision_related"));
        let digits = da_features(&m.das[2], &ma).unwrap();
        assert_eq!(digits.get("has_digit"), Some(1.0));
        assert_eq!(digits.get("position=middle"), Some(1.0));
        assert!(!digits.contains("in_ap"));
        let last = da_features(&m.das[9], &ma).unwrap();
        assert_eq!(last.get("position=ending"), Some(1.0));
        assert!(!last.contains("overlaps_next"));
    }

    #[test]
    fn token_feature_examples() {
        let m = meeting(&["rubber case 7", "the rubber one", "other"]);
        let config = FeatureConfig::default();
        let vz = vectorizer(&m);
        let ma = MeetingAnalysis::new(&m, &analyzer(), &vz, &config);
        let words: Vec<&str> = ma.tokens(0).iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(words, ["rubber", "case", "7"]);
        let rubber = token_features(&m.das[0], 0, &ma).unwrap();
        assert_eq!(rubber.get("in_next"), Some(1.0));
        assert_eq!(rubber.get("bi=rubber_case"), Some(1.0));
        let seven = token_features(&m.das[0], 2, &ma).unwrap();
        assert_eq!(seven.get("is_digit"), Some(1.0));
        assert!(!seven.0.keys().any(|k| k.starts_with("bi=")));
        assert!(!seven.0.keys().any(|k| k.starts_with("pos_tag=")));
        assert!(token_features(&m.das[0], 3, &ma).is_err());
    }

    #[test]
    fn grammatical_features_follow_annotations() {
        let corpus = toy_corpus();
        let m = &corpus[0];
        let pos = m.das.iter().position(|d| d.tokens.is_some()).expect("annotated DA in toy corpus");
        let config = FeatureConfig::default();
        let docs: Vec<Vec<String>> = m.das.iter().map(|d| analyzer().content_stems(&d.text)).collect();
        let vz = Vectorizer::fit(&docs, false).unwrap();
        let ma = MeetingAnalysis::new(m, &analyzer(), &vz, &config);
        let annotated = token_features(&m.das[pos], 0, &ma).unwrap();
        assert!(annotated.0.keys().any(|k| k.starts_with("pos_tag=")));

        let mut stripped = m.clone();
        stripped.das[pos].tokens = None;
        let ma = MeetingAnalysis::new(&stripped, &analyzer(), &vz, &config);
        let plain = token_features(&stripped.das[pos], 0, &ma).unwrap();
        assert!(!plain
            .0
            .keys()
            .any(|k| k.starts_with("pos_tag=") || k.starts_with("phrase=") || k.starts_with("dep=")));
        let lexical = |f: &FeatureVector| {
            f.iter()
                .filter(|(k, _)| !(k.starts_with("pos_tag=") || k.starts_with("phrase=") || k.starts_with("dep=")))
                .map(|(k, v)| (k.to_string(), v))
                .collect::<Vec<_>>()
        };
        assert_eq!(lexical(&annotated), lexical(&plain));
    }

    proptest! {
        #[test]
        fn pairwise_features_are_symmetric_and_pure(i in 0usize..17, j in 0usize..17) {
            prop_assume!(i != j);
            let corpus = toy_corpus();
            let m = &corpus[0];
            let config = FeatureConfig { pairwise_context_n: 3, ..FeatureConfig::default() };
            let docs: Vec<Vec<String>> = m.das.iter().map(|d| analyzer().content_stems(&d.text)).collect();
            let vz = Vectorizer::fit(&docs, false).unwrap();
            let ma = MeetingAnalysis::new(m, &analyzer(), &vz, &config);
            let ab = pairwise_features(&m.das[i], &m.das[j], &ma).unwrap();
            let ba = pairwise_features(&m.das[j], &m.das[i], &ma).unwrap();
            prop_assert_eq!(&ab, &ba);
            prop_assert_eq!(ab, pairwise_features(&m.das[i], &m.das[j], &ma).unwrap());
        }
    }
}

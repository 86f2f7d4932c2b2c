//! Meeting data model and the JSONL corpus format.
//!
//! One meeting per line. Field names on the wire are fixed:
//!
//! ```text
//! {"id", "das": [{"id","index","speaker","role","start","end","da_type","text",
//!                 "topic"?, "decisions": [], "tokens"?: [{"t","pos"?,"phrase"?,"dep_rel"?,"dep_head"?}]}],
//!  "adjacency_pairs": [{"source","target","type"}],
//!  "abstracts": [{"id","text"}]}
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meeting {
    pub id: String,
    pub das: Vec<DialogueAct>,
    #[serde(default)]
    pub adjacency_pairs: Vec<AdjacencyPair>,
    #[serde(default)]
    pub abstracts: Vec<DecisionAbstract>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueAct {
    pub id: String,
    pub index: usize,
    pub speaker: String,
    pub role: String,
    #[serde(rename = "start")]
    pub start_time: f64,
    #[serde(rename = "end")]
    pub end_time: f64,
    pub da_type: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(default)]
    pub decisions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenAnnotation>>,
}

impl DialogueAct {
    /// A DA is decision-related iff it links to at least one decision.
    pub fn is_drda(&self) -> bool {
        !self.decisions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenAnnotation {
    #[serde(rename = "t")]
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<String>,
    #[serde(rename = "phrase", default, skip_serializing_if = "Option::is_none")]
    pub phrase_type: Option<PhraseType>,
    #[serde(rename = "dep_rel", default, skip_serializing_if = "Option::is_none")]
    pub dep_relation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dep_head: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhraseType {
    VP,
    NP,
    PP,
    S,
    #[serde(rename = "other")]
    Other,
}

impl PhraseType {
    pub fn as_str(self) -> &'static str {
        match self {
            PhraseType::VP => "VP",
            PhraseType::NP => "NP",
            PhraseType::PP => "PP",
            PhraseType::S => "S",
            PhraseType::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyPair {
    #[serde(rename = "source")]
    pub source_da: String,
    #[serde(rename = "target")]
    pub target_da: String,
    #[serde(rename = "type")]
    pub ap_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionAbstract {
    pub id: String,
    pub text: String,
}

impl Meeting {
    pub fn len(&self) -> usize {
        self.das.len()
    }

    pub fn is_empty(&self) -> bool {
        self.das.is_empty()
    }

    pub fn position(&self, da_id: &str) -> Option<usize> {
        self.das.iter().position(|d| d.id == da_id)
    }

    pub fn da(&self, da_id: &str) -> Option<&DialogueAct> {
        self.das.iter().find(|d| d.id == da_id)
    }

    pub fn drdas(&self) -> impl Iterator<Item = &DialogueAct> {
        self.das.iter().filter(|d| d.is_drda())
    }

    pub fn drda_ids(&self) -> Vec<String> {
        self.drdas().map(|d| d.id.clone()).collect()
    }

    pub fn abstract_for(&self, decision_id: &str) -> Option<&DecisionAbstract> {
        self.abstracts.iter().find(|a| a.id == decision_id)
    }

    /// Checks every structural invariant; the message names the offending item.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.das.is_empty() {
            return Err("meeting has no dialogue acts".into());
        }
        let mut abstract_ids = HashSet::new();
        for a in &self.abstracts {
            if !abstract_ids.insert(a.id.as_str()) {
                return Err(format!("duplicate abstract id {}", a.id));
            }
            if a.text.trim().is_empty() {
                return Err(format!("abstract {} has empty text", a.id));
            }
        }
        let mut da_ids = HashMap::new();
        for (pos, da) in self.das.iter().enumerate() {
            if da_ids.insert(da.id.as_str(), pos).is_some() {
                return Err(format!("duplicate DA id {}", da.id));
            }
            if da.index != pos {
                return Err(format!("DA {} has index {} but sits at position {pos}", da.id, da.index));
            }
            if !da.start_time.is_finite() || !da.end_time.is_finite() {
                return Err(format!("DA {} has a non-finite timestamp", da.id));
            }
            if da.end_time < da.start_time {
                return Err(format!("DA {} ends before it starts", da.id));
            }
            if pos > 0 && da.start_time < self.das[pos - 1].start_time {
                return Err(format!("DA {} is out of time order", da.id));
            }
            for d in &da.decisions {
                if !abstract_ids.contains(d.as_str()) {
                    return Err(format!("DA {} links to decision {d} which has no abstract", da.id));
                }
            }
            if let Some(tokens) = &da.tokens {
                for (ti, tok) in tokens.iter().enumerate() {
                    if let Some(head) = tok.dep_head {
                        if head >= tokens.len() {
                            return Err(format!("DA {} token {ti} has dep_head {head} outside the DA", da.id));
                        }
                    }
                }
            }
        }
        for ap in &self.adjacency_pairs {
            let describe = || format!("adjacency pair {}->{}", ap.source_da, ap.target_da);
            let src = da_ids
                .get(ap.source_da.as_str())
                .map(|&p| &self.das[p])
                .ok_or_else(|| format!("{} references unknown DA {}", describe(), ap.source_da))?;
            let tgt = da_ids
                .get(ap.target_da.as_str())
                .map(|&p| &self.das[p])
                .ok_or_else(|| format!("{} references unknown DA {}", describe(), ap.target_da))?;
            if src.speaker == tgt.speaker {
                return Err(format!("{} has the same speaker on both sides", describe()));
            }
            if src.start_time > tgt.start_time {
                return Err(format!("{} has a source starting after its target", describe()));
            }
        }
        Ok(())
    }

    fn normalize(&mut self) {
        for da in &mut self.das {
            da.text = normalize_text(&da.text);
        }
    }
}

fn marker_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[[^\]]*\]").expect("static regex"))
}

/// Strips transcription markers such as `[disfmarker]` and collapses whitespace.
pub fn normalize_text(text: &str) -> String {
    let stripped = marker_regex().replace_all(text, " ");
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses and validates a JSONL corpus from any reader. Blank lines are skipped.
pub fn read_corpus<R: Read>(reader: R) -> Result<Vec<Meeting>> {
    let mut meetings = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| Error::Io { path: "<corpus>".into(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut meeting: Meeting =
            serde_json::from_str(&line).map_err(|source| Error::Parse { line: line_no, source })?;
        meeting.normalize();
        let invalid = |message: String| Error::InvalidMeeting { line: line_no, meeting: meeting.id.clone(), message };
        meeting.validate().map_err(invalid)?;
        if !seen.insert(meeting.id.clone()) {
            return Err(invalid("duplicate meeting id".into()));
        }
        meetings.push(meeting);
    }
    if meetings.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(meetings)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Meeting>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_corpus(file)
}

pub fn write_corpus<W: Write>(meetings: &[Meeting], mut out: W) -> Result<()> {
    for m in meetings {
        serde_json::to_writer(&mut out, m)?;
        out.write_all(b"\n").map_err(|source| Error::Io { path: "<output>".into(), source })?;
    }
    Ok(())
}

/// A partition of DA ids into clusters.
///
/// Clusters are non-empty and pairwise disjoint; the universe is their union.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<String>>", into = "Vec<Vec<String>>")]
pub struct Clustering {
    clusters: Vec<Vec<String>>,
}

impl Clustering {
    pub fn new(clusters: Vec<Vec<String>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &clusters {
            if c.is_empty() {
                return Err(Error::invalid("clustering contains an empty cluster"));
            }
            for id in c {
                if !seen.insert(id.as_str()) {
                    return Err(Error::invalid(format!("item {id} appears in two clusters")));
                }
            }
        }
        Ok(Clustering { clusters })
    }

    pub fn empty() -> Self {
        Clustering { clusters: Vec::new() }
    }

    pub fn clusters(&self) -> &[Vec<String>] {
        &self.clusters
    }

    pub fn into_clusters(self) -> Vec<Vec<String>> {
        self.clusters
    }

    /// Number of clusters.
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn item_count(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn universe(&self) -> BTreeSet<&str> {
        self.clusters.iter().flatten().map(String::as_str).collect()
    }

    /// Maps each item to the position of its cluster.
    pub fn labels(&self) -> HashMap<&str, usize> {
        self.clusters.iter().enumerate().flat_map(|(ci, c)| c.iter().map(move |id| (id.as_str(), ci))).collect()
    }

    /// Order-free form for comparing partitions up to relabeling.
    pub fn canonical(&self) -> BTreeSet<BTreeSet<String>> {
        self.clusters.iter().map(|c| c.iter().cloned().collect()).collect()
    }
}

impl TryFrom<Vec<Vec<String>>> for Clustering {
    type Error = Error;

    fn try_from(clusters: Vec<Vec<String>>) -> Result<Self> {
        Clustering::new(clusters)
    }
}

impl From<Clustering> for Vec<Vec<String>> {
    fn from(c: Clustering) -> Self {
        c.clusters
    }
}

/// Gold DRDA groups keyed by decision id.
///
/// A DRDA linked to several decisions goes to the lexicographically smallest one,
/// which keeps the result a partition.
pub fn gold_assignment(meeting: &Meeting) -> BTreeMap<String, Vec<String>> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for da in meeting.drdas() {
        if let Some(first) = da.decisions.iter().min() {
            groups.entry(first.clone()).or_default().push(da.id.clone());
        }
    }
    groups
}

pub fn gold_clustering(meeting: &Meeting) -> Clustering {
    Clustering { clusters: gold_assignment(meeting).into_values().collect() }
}

/// Every DRDA linked to each decision, multi-linked DAs included in each group.
pub fn decision_members(meeting: &Meeting) -> BTreeMap<String, Vec<String>> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for da in meeting.drdas() {
        let linked: BTreeSet<&String> = da.decisions.iter().collect();
        for d in linked {
            groups.entry(d.clone()).or_default().push(da.id.clone());
        }
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Splits meeting ids into `k` folds of near-equal size.
///
/// The shuffle is seeded, so a fixed seed always yields the same folds. Ids keep
/// their input order inside each train and test list.
pub fn kfold_split(meeting_ids: &[String], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if meeting_ids.len() < k {
        return Err(Error::invalid(format!("cannot split {} meetings into {k} folds", meeting_ids.len())));
    }
    let mut order: Vec<usize> = (0..meeting_ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; meeting_ids.len()];
    for (rank, &pos) in order.iter().enumerate() {
        fold_of[pos] = rank % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<_>, Vec<_>) =
                meeting_ids.iter().enumerate().partition(|(pos, _)| fold_of[*pos] == f);
            Fold {
                train: train.into_iter().map(|(_, id)| id.clone()).collect(),
                test: test.into_iter().map(|(_, id)| id.clone()).collect(),
            }
        })
        .collect())
}

/// The bundled three-meeting toy corpus.
pub const TOY_CORPUS: &str = include_str!("../data/toy_corpus.jsonl");

pub fn toy_corpus() -> Vec<Meeting> {
    read_corpus(TOY_CORPUS.as_bytes()).expect("bundled toy corpus is valid")
}

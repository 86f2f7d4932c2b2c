//! Planted-structure meeting corpora for end-to-end checks.
//!
//! Each decision draws its words from its own vocabulary pool, so a clustering
//! method that follows lexical or topical similarity can recover the gold
//! partition. Filler DAs use a shared chatter vocabulary.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AdjacencyPair, DecisionAbstract, DialogueAct, Meeting};

const POOLS: [[&str; 8]; 12] = [
    ["rubber", "buttons", "soft", "grip", "squeeze", "texture", "finger", "press"],
    ["battery", "solar", "charger", "power", "cells", "kinetic", "energy", "dock"],
    ["banana", "curved", "shape", "ergonomic", "palm", "hand", "form", "organic"],
    ["colour", "yellow", "fruity", "bright", "paint", "shade", "vivid", "logo"],
    ["scroll", "wheel", "volume", "channel", "rotate", "menu", "navigate", "click"],
    ["speech", "recognition", "voice", "microphone", "command", "spoken", "whistle", "sensor"],
    ["budget", "price", "euros", "cost", "profit", "margin", "twelve", "cheap"],
    ["screen", "display", "lcd", "pixels", "backlight", "readable", "contrast", "panel"],
    ["titanium", "casing", "metal", "sturdy", "durable", "drop", "scratch", "shell"],
    ["chip", "processor", "infrared", "signal", "transmitter", "circuit", "board", "sender"],
    ["teenagers", "market", "young", "fashion", "trendy", "audience", "survey", "target"],
    ["faceplate", "swappable", "cover", "personal", "custom", "clip", "fronts", "change"],
];

const CHATTER: [&str; 16] = [
    "coffee",
    "slides",
    "laptop",
    "agenda",
    "lunch",
    "minutes",
    "email",
    "presentation",
    "pen",
    "whiteboard",
    "tomorrow",
    "break",
    "projector",
    "notes",
    "chair",
    "window",
];

const FILLER: [&str; 10] = ["um", "so", "we", "the", "i", "think", "that", "it", "and", "uh"];

const ROLES: [(&str, &str); 4] = [("A", "PM"), ("B", "ID"), ("C", "UI"), ("D", "ME")];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantedSpec {
    pub meetings: usize,
    pub decisions_per_meeting: usize,
    pub das_per_decision: usize,
    pub filler_das: usize,
    /// Inclusive range of pool words per decision-related DA.
    pub content_words: (usize, usize),
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            meetings: 12,
            decisions_per_meeting: 3,
            das_per_decision: 5,
            filler_das: 15,
            content_words: (4, 7),
        }
    }
}

fn sentence(rng: &mut ChaCha8Rng, content: &[&str], n_content: usize) -> String {
    let mut words: Vec<&str> = (0..n_content).map(|_| *content.choose(rng).expect("non-empty pool")).collect();
    for _ in 0..rng.gen_range(1..=3) {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, FILLER.choose(rng).expect("non-empty filler"));
    }
    format!("{} .", words.join(" "))
}

/// Generates a valid corpus with `spec.decisions_per_meeting` planted decisions per meeting.
pub fn planted_corpus(spec: &PlantedSpec, seed: u64) -> Vec<Meeting> {
    assert!(spec.decisions_per_meeting <= POOLS.len(), "not enough vocabulary pools");
    assert!(spec.content_words.0 >= 1 && spec.content_words.0 <= spec.content_words.1, "bad content word range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..spec.meetings)
        .map(|mi| {
            let id = format!("syn{mi:02}");
            let mut pools: Vec<usize> = (0..POOLS.len()).collect();
            pools.shuffle(&mut rng);
            pools.truncate(spec.decisions_per_meeting);

            // (decision index or None, text)
            let mut slots: Vec<(Option<usize>, String)> = Vec::new();
            for (d, &p) in pools.iter().enumerate() {
                for _ in 0..spec.das_per_decision {
                    let n = rng.gen_range(spec.content_words.0..=spec.content_words.1);
                    slots.push((Some(d), sentence(&mut rng, &POOLS[p], n)));
                }
            }
            for _ in 0..spec.filler_das {
                let n = rng.gen_range(1..=4);
                let text = if rng.gen_bool(0.25) { "Yeah .".to_string() } else { sentence(&mut rng, &CHATTER, n) };
                slots.push((None, text));
            }
            slots.shuffle(&mut rng);
            slots.push((None, "okay let's wrap up .".to_string()));

            let mut time = 0.0;
            let das: Vec<DialogueAct> = slots
                .into_iter()
                .enumerate()
                .map(|(i, (decision, text))| {
                    let (speaker, role) = ROLES[rng.gen_range(0..ROLES.len())];
                    let duration = 1.0 + text.len() as f64 / 12.0;
                    let start = time;
                    time += duration + 0.5;
                    DialogueAct {
                        id: format!("{id}.da{i:03}"),
                        index: i,
                        speaker: speaker.into(),
                        role: role.into(),
                        start_time: start,
                        end_time: start + duration,
                        da_type: if decision.is_some() { "inf" } else { "fra" }.into(),
                        text,
                        topic: None,
                        decisions: decision.map(|d| vec![format!("{id}.d{d}")]).unwrap_or_default(),
                        tokens: None,
                    }
                })
                .collect();

            let adjacency_pairs = das
                .windows(2)
                .filter(|w| w[0].speaker != w[1].speaker && w[1].text == "Yeah .")
                .map(|w| AdjacencyPair {
                    source_da: w[0].id.clone(),
                    target_da: w[1].id.clone(),
                    ap_type: "pos.feedback".into(),
                })
                .collect();

            let abstracts = pools
                .iter()
                .enumerate()
                .map(|(d, &p)| {
                    let w = &POOLS[p];
                    DecisionAbstract {
                        id: format!("{id}.d{d}"),
                        text: format!("The remote will use {} {} with {} and {}.", w[0], w[1], w[2], w[3]),
                    }
                })
                .collect();

            Meeting { id, das, adjacency_pairs, abstracts }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::gold_clustering;

    #[test]
    fn corpus_is_valid_and_deterministic() {
        let spec = PlantedSpec::default();
        let a = planted_corpus(&spec, 3);
        assert_eq!(a, planted_corpus(&spec, 3));
        assert_ne!(a, planted_corpus(&spec, 4));
        assert_eq!(a.len(), spec.meetings);
        for m in &a {
            m.validate().unwrap();
            assert_eq!(gold_clustering(m).len(), spec.decisions_per_meeting);
            assert_eq!(m.drdas().count(), spec.decisions_per_meeting * spec.das_per_decision);
        }
    }
}

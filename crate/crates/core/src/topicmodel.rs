//! Latent Dirichlet Allocation trained by collapsed Gibbs sampling.
//!
//! Each DRDA is one document. After training every document has a topic
//! distribution θ, and two DRDAs are compared by the dot product of their θs.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub k: usize,
    /// Document-topic prior; `None` means `1 / k`. The common `50 / k` swamps
    /// documents as short as a single DA and flattens every θ toward uniform.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    /// Number of final sweeps whose θ estimates are averaged. 1 reads the last sample only.
    pub theta_samples: usize,
    pub fold_in_sweeps: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig { k: 100, alpha: None, beta: 0.1, iterations: 500, theta_samples: 1, fold_in_sweeps: 50 }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0 / self.k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDistribution(pub Vec<f64>);

impl TopicDistribution {
    pub fn uniform(k: usize) -> Self {
        TopicDistribution(vec![1.0 / k as f64; k])
    }

    /// Dirichlet-smoothed normalization: `(n_k + α) / (len + Kα)`.
    pub fn from_counts(counts: &[u32], alpha: f64) -> Self {
        let k = counts.len() as f64;
        let len: f64 = counts.iter().map(|&c| c as f64).sum();
        let denom = len + k * alpha;
        TopicDistribution(counts.iter().map(|&c| (c as f64 + alpha) / denom).collect())
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Sim_LDA between two documents: the plain dot product of their θs.
pub fn lda_similarity(a: &TopicDistribution, b: &TopicDistribution) -> Result<f64> {
    if a.k() != b.k() {
        return Err(Error::invalid(format!("topic count mismatch: {} vs {}", a.k(), b.k())));
    }
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum())
}

/// Collapsed Gibbs sampler state. [`train_lda`] drives it; tests step it by hand.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    vocabulary: Vec<String>,
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_totals: Vec<u32>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl GibbsSampler {
    pub fn new<S: AsRef<str>>(docs: &[Vec<S>], k: usize, alpha: f64, beta: f64, seed: u64) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::invalid("LDA needs at least one document"));
        }
        if k < 2 {
            return Err(Error::invalid(format!("LDA needs at least 2 topics, got {k}")));
        }
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::invalid("LDA hyperparameters must be positive"));
        }
        if let Some(i) = docs.iter().position(Vec::is_empty) {
            return Err(Error::invalid(format!("LDA document {i} has no tokens")));
        }
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut vocabulary = Vec::new();
        let word_docs: Vec<Vec<usize>> = docs
            .iter()
            .map(|doc| {
                doc.iter()
                    .map(|w| {
                        let w = w.as_ref();
                        *index.entry(w).or_insert_with(|| {
                            vocabulary.push(w.to_string());
                            vocabulary.len() - 1
                        })
                    })
                    .collect()
            })
            .collect();

        let v = vocabulary.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut doc_topic = vec![vec![0u32; k]; docs.len()];
        let mut topic_word = vec![vec![0u32; v]; k];
        let mut topic_totals = vec![0u32; k];
        let assignments: Vec<Vec<usize>> = word_docs
            .iter()
            .enumerate()
            .map(|(d, words)| {
                words
                    .iter()
                    .map(|&w| {
                        let z = rng.gen_range(0..k);
                        doc_topic[d][z] += 1;
                        topic_word[z][w] += 1;
                        topic_totals[z] += 1;
                        z
                    })
                    .collect()
            })
            .collect();

        Ok(GibbsSampler {
            k,
            alpha,
            beta,
            seed,
            vocabulary,
            docs: word_docs,
            assignments,
            doc_topic,
            topic_word,
            topic_totals,
            rng,
            weights: vec![0.0; k],
        })
    }

    /// One full pass over every token.
    pub fn sweep(&mut self) {
        let vbeta = self.vocabulary.len() as f64 * self.beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.assignments[d][i];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_totals[old] -= 1;

                let mut total = 0.0;
                for z in 0..self.k {
                    let p = (self.doc_topic[d][z] as f64 + self.alpha) * (self.topic_word[z][w] as f64 + self.beta)
                        / (self.topic_totals[z] as f64 + vbeta);
                    total += p;
                    self.weights[z] = total;
                }
                let new = sample_cumulative(&self.weights, total, &mut self.rng);

                self.assignments[d][i] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_totals[new] += 1;
            }
        }
    }

    /// Joint log-likelihood `ln p(w, z)` of the current assignment.
    pub fn log_likelihood(&self) -> f64 {
        let v = self.vocabulary.len() as f64;
        let k = self.k as f64;
        let mut ll = k * (ln_gamma(v * self.beta) - v * ln_gamma(self.beta));
        for z in 0..self.k {
            ll += self.topic_word[z].iter().map(|&c| ln_gamma(c as f64 + self.beta)).sum::<f64>();
            ll -= ln_gamma(self.topic_totals[z] as f64 + v * self.beta);
        }
        let d = self.docs.len() as f64;
        ll += d * (ln_gamma(k * self.alpha) - k * ln_gamma(self.alpha));
        for (counts, words) in self.doc_topic.iter().zip(&self.docs) {
            ll += counts.iter().map(|&c| ln_gamma(c as f64 + self.alpha)).sum::<f64>();
            ll -= ln_gamma(words.len() as f64 + k * self.alpha);
        }
        ll
    }

    /// Verifies the count tables against the assignment vector.
    pub fn check_counts(&self) -> std::result::Result<(), String> {
        let v = self.vocabulary.len();
        let mut doc_topic = vec![vec![0u32; self.k]; self.docs.len()];
        let mut topic_word = vec![vec![0u32; v]; self.k];
        for (d, (words, zs)) in self.docs.iter().zip(&self.assignments).enumerate() {
            if words.len() != zs.len() {
                return Err(format!("doc {d}: {} tokens but {} assignments", words.len(), zs.len()));
            }
            for (&w, &z) in words.iter().zip(zs) {
                doc_topic[d][z] += 1;
                topic_word[z][w] += 1;
            }
            let row_sum: u32 = self.doc_topic[d].iter().sum();
            if row_sum as usize != words.len() {
                return Err(format!("doc {d}: topic counts sum to {row_sum}, length {}", words.len()));
            }
        }
        if doc_topic != self.doc_topic {
            return Err("doc-topic table disagrees with assignments".into());
        }
        if topic_word != self.topic_word {
            return Err("topic-word table disagrees with assignments".into());
        }
        for z in 0..self.k {
            let col: u32 = self.topic_word[z].iter().sum();
            if col != self.topic_totals[z] {
                return Err(format!("topic {z}: word counts sum to {col}, total {}", self.topic_totals[z]));
            }
        }
        Ok(())
    }

    pub fn theta(&self, doc: usize) -> TopicDistribution {
        TopicDistribution::from_counts(&self.doc_topic[doc], self.alpha)
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }
}

fn sample_cumulative(cumulative: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let u = rng.gen::<f64>() * total;
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
}

/// A trained topic model.
///
/// Only the global parameters are persisted; per-document θ and the likelihood
/// trace exist on freshly trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocabulary: Vec<String>,
    pub topic_word: Vec<Vec<u32>>,
    pub seed: u64,
    #[serde(skip, default = "default_fold_in")]
    pub fold_in_sweeps: usize,
    #[serde(skip)]
    thetas: Vec<TopicDistribution>,
    #[serde(skip)]
    log_likelihood: Vec<f64>,
}

fn default_fold_in() -> usize {
    LdaConfig::default().fold_in_sweeps
}

/// Trains LDA for `config.iterations` sweeps. Documents must be non-empty.
pub fn train_lda<S: AsRef<str>>(docs: &[Vec<S>], config: &LdaConfig, seed: u64) -> Result<LdaModel> {
    let mut sampler = GibbsSampler::new(docs, config.k, config.alpha(), config.beta, seed)?;
    let samples = config.theta_samples.clamp(1, config.iterations.max(1));
    let mut trace = Vec::with_capacity(config.iterations);
    let mut theta_sum = vec![vec![0.0; config.k]; sampler.doc_count()];
    for it in 0..config.iterations {
        sampler.sweep();
        trace.push(sampler.log_likelihood());
        if it + samples >= config.iterations {
            for (d, acc) in theta_sum.iter_mut().enumerate() {
                for (a, t) in acc.iter_mut().zip(sampler.theta(d).0) {
                    *a += t;
                }
            }
        }
    }
    let thetas = if config.iterations == 0 {
        (0..sampler.doc_count()).map(|d| sampler.theta(d)).collect()
    } else {
        theta_sum
            .into_iter()
            .map(|acc| TopicDistribution(acc.into_iter().map(|x| x / samples as f64).collect()))
            .collect()
    };
    Ok(LdaModel {
        k: sampler.k,
        alpha: sampler.alpha,
        beta: sampler.beta,
        vocabulary: sampler.vocabulary,
        topic_word: sampler.topic_word,
        seed: sampler.seed,
        fold_in_sweeps: config.fold_in_sweeps,
        thetas,
        log_likelihood: trace,
    })
}

impl LdaModel {
    /// θ of a training document.
    pub fn theta(&self, doc_index: usize) -> Result<TopicDistribution> {
        self.thetas.get(doc_index).cloned().ok_or_else(|| {
            Error::invalid(format!(
                "document index {doc_index} out of range ({} training documents)",
                self.thetas.len()
            ))
        })
    }

    pub fn log_likelihood_trace(&self) -> &[f64] {
        &self.log_likelihood
    }

    /// θ for an unseen document by folding in: only its own assignments are
    /// resampled while the topic-word counts stay frozen. The RNG stream is
    /// derived from the model seed and `doc_key`. Out-of-vocabulary tokens are
    /// ignored; a document with no known token gets the uniform distribution.
    pub fn infer<S: AsRef<str>>(&self, tokens: &[S], doc_key: &str) -> TopicDistribution {
        let index: HashMap<&str, usize> = self.vocabulary.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let words: Vec<usize> = tokens.iter().filter_map(|t| index.get(t.as_ref()).copied()).collect();
        if words.is_empty() {
            return TopicDistribution::uniform(self.k);
        }
        let totals: Vec<f64> = self.topic_word.iter().map(|row| row.iter().map(|&c| c as f64).sum::<f64>()).collect();
        let vbeta = self.vocabulary.len() as f64 * self.beta;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(doc_key));
        let mut counts = vec![0u32; self.k];
        let mut zs: Vec<usize> = words
            .iter()
            .map(|_| {
                let z = rng.gen_range(0..self.k);
                counts[z] += 1;
                z
            })
            .collect();
        let mut weights = vec![0.0; self.k];
        for _ in 0..self.fold_in_sweeps {
            for (i, &w) in words.iter().enumerate() {
                counts[zs[i]] -= 1;
                let mut total = 0.0;
                for z in 0..self.k {
                    total += (counts[z] as f64 + self.alpha) * (self.topic_word[z][w] as f64 + self.beta)
                        / (totals[z] + vbeta);
                    weights[z] = total;
                }
                let z = sample_cumulative(&weights, total, &mut rng);
                zs[i] = z;
                counts[z] += 1;
            }
        }
        TopicDistribution::from_counts(&counts, self.alpha)
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn planted_docs() -> Vec<Vec<String>> {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        (0..20)
            .map(|d| {
                let base = if d < 10 { 0 } else { 10 };
                (0..15).map(|_| format!("w{}", base + rng.gen_range(0..10))).collect()
            })
            .collect()
    }

    #[test]
    fn thetas_sum_to_one() {
        let cfg = LdaConfig { k: 3, iterations: 30, ..Default::default() };
        let model = train_lda(&planted_docs(), &cfg, 1).unwrap();
        for d in 0..20 {
            let s: f64 = model.theta(d).unwrap().0.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert!(model.theta(20).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = LdaConfig { k: 4, iterations: 20, ..Default::default() };
        let a = train_lda(&planted_docs(), &cfg, 5).unwrap();
        let b = train_lda(&planted_docs(), &cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.thetas, b.thetas);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = LdaConfig { k: 2, iterations: 1, ..Default::default() };
        assert!(train_lda::<String>(&[], &cfg, 0).is_err());
        let docs = vec![vec!["a".to_string()], vec![]];
        assert!(train_lda(&docs, &cfg, 0).is_err());
        let one_topic = LdaConfig { k: 1, ..cfg };
        assert!(train_lda(&planted_docs(), &one_topic, 0).is_err());
    }

    #[test]
    fn theta_limits() {
        let t = TopicDistribution::from_counts(&[0, 0, 7, 0], 1e-12);
        assert_relative_eq!(t.0[2], 1.0, epsilon = 1e-9);
        assert!(t.0[0] < 1e-9);
        let u = TopicDistribution::from_counts(&[1, 1, 1, 1], 1e9);
        for x in u.0 {
            assert_relative_eq!(x, 0.25, epsilon = 1e-9);
        }
    }

    #[test]
    fn similarity_examples() {
        let k = 5;
        assert_relative_eq!(
            lda_similarity(&TopicDistribution::uniform(k), &TopicDistribution::uniform(k)).unwrap(),
            1.0 / k as f64,
            epsilon = 1e-12
        );
        let e0 = TopicDistribution(vec![1.0, 0.0, 0.0]);
        let e1 = TopicDistribution(vec![0.0, 1.0, 0.0]);
        assert_eq!(lda_similarity(&e0, &e0).unwrap(), 1.0);
        assert_eq!(lda_similarity(&e0, &e1).unwrap(), 0.0);
        assert!(lda_similarity(&e0, &TopicDistribution::uniform(2)).is_err());
    }

    #[test]
    fn counts_stay_consistent() {
        let mut s = GibbsSampler::new(&planted_docs(), 3, 0.5, 0.1, 3).unwrap();
        s.check_counts().unwrap();
        for _ in 0..25 {
            s.sweep();
            s.check_counts().unwrap();
        }
    }

    #[test]
    fn fold_in_is_deterministic_and_normalized() {
        let cfg = LdaConfig { k: 2, alpha: Some(0.1), iterations: 100, ..Default::default() };
        let model = train_lda(&planted_docs(), &cfg, 2).unwrap();
        let doc: Vec<String> = vec!["w1".into(), "w3".into(), "w5".into(), "unseen".into()];
        let a = model.infer(&doc, "m1.da1");
        assert_eq!(a, model.infer(&doc, "m1.da1"));
        assert_relative_eq!(a.0.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        let empty: Vec<String> = vec!["nothing".into()];
        assert_eq!(model.infer(&empty, "x"), TopicDistribution::uniform(2));
    }

    #[test]
    fn model_json_round_trip_keeps_parameters() {
        let cfg = LdaConfig { k: 2, iterations: 5, ..Default::default() };
        let model = train_lda(&planted_docs(), &cfg, 2).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        assert!(json.contains("\"K\":2"));
        let back: LdaModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.topic_word, model.topic_word);
        let doc: Vec<String> = vec!["w1".into(), "w12".into()];
        assert_eq!(back.infer(&doc, "d"), model.infer(&doc, "d"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dist(k: usize) -> impl Strategy<Value = TopicDistribution> {
            proptest::collection::vec(0.0f64..1.0, k).prop_map(|v| {
                let s: f64 = v.iter().sum::<f64>() + 1e-9;
                TopicDistribution(v.into_iter().map(|x| (x + 1e-9 / 4.0) / s).collect())
            })
        }

        proptest! {
            #[test]
            fn similarity_symmetric_and_bounded(a in dist(4), b in dist(4)) {
                let s = lda_similarity(&a, &b).unwrap();
                prop_assert_eq!(s, lda_similarity(&b, &a).unwrap());
                prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
            }
        }
    }
}

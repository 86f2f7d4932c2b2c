//! Clustering scorers (B-cubed, pairwise, variation of information) and ROUGE-1.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Clustering;
use crate::error::{Error, Result};
use crate::textproc::stem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// F1 is the harmonic mean, 0 when P + R = 0.
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Prf { precision, recall, f1 }
    }

    pub fn zero() -> Self {
        Prf { precision: 0.0, recall: 0.0, f1: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "e")]
    Natural,
    #[serde(rename = "2")]
    Two,
}

/// Contingency counts between two clusterings over the same universe.
struct Contingency {
    n: usize,
    cells: HashMap<(usize, usize), usize>,
    system_sizes: Vec<usize>,
    gold_sizes: Vec<usize>,
}

impl Contingency {
    fn build(system: &Clustering, gold: &Clustering) -> Result<Self> {
        if system.universe() != gold.universe() {
            return Err(Error::UniverseMismatch);
        }
        let gold_labels = gold.labels();
        let mut cells = HashMap::new();
        for (si, cluster) in system.clusters().iter().enumerate() {
            for id in cluster {
                *cells.entry((si, gold_labels[id.as_str()])).or_insert(0) += 1;
            }
        }
        Ok(Contingency {
            n: system.item_count(),
            cells,
            system_sizes: system.clusters().iter().map(Vec::len).collect(),
            gold_sizes: gold.clusters().iter().map(Vec::len).collect(),
        })
    }
}

/// Per-item precision `|S(i) ∩ G(i)| / |S(i)|` and the symmetric recall,
/// averaged uniformly over items.
pub fn bcubed(system: &Clustering, gold: &Clustering) -> Result<Prf> {
    let t = Contingency::build(system, gold)?;
    if t.n == 0 {
        return Err(Error::invalid("B-cubed needs at least one item"));
    }
    let (mut p, mut r) = (0.0, 0.0);
    for (&(si, gi), &count) in &t.cells {
        let c = count as f64;
        p += c * c / t.system_sizes[si] as f64;
        r += c * c / t.gold_sizes[gi] as f64;
    }
    let n = t.n as f64;
    Ok(Prf::new(p / n, r / n))
}

fn pairs(k: usize) -> f64 {
    (k * k.saturating_sub(1) / 2) as f64
}

/// Precision and recall of "same cluster" decisions over all unordered pairs.
/// With no predicted (or gold) positive pairs there is nothing to get wrong
/// (or to miss), so precision (or recall) is 1.
pub fn pairwise_score(system: &Clustering, gold: &Clustering) -> Result<Prf> {
    let t = Contingency::build(system, gold)?;
    if t.n < 2 {
        return Err(Error::invalid("pairwise scoring needs at least two items"));
    }
    let tp: f64 = t.cells.values().map(|&c| pairs(c)).sum();
    let predicted: f64 = t.system_sizes.iter().map(|&s| pairs(s)).sum();
    let actual: f64 = t.gold_sizes.iter().map(|&s| pairs(s)).sum();
    let p = if predicted > 0.0 { tp / predicted } else { 1.0 };
    let r = if actual > 0.0 { tp / actual } else { 1.0 };
    Ok(Prf::new(p, r))
}

/// Variation of information `H(S|G) + H(G|S)`. Lower is better.
pub fn voi(system: &Clustering, gold: &Clustering, base: LogBase) -> Result<f64> {
    let t = Contingency::build(system, gold)?;
    if t.n == 0 {
        return Ok(0.0);
    }
    let n = t.n as f64;
    let mut vi = 0.0;
    for (&(si, gi), &count) in &t.cells {
        let c = count as f64;
        let p = c / n;
        vi -= p * ((c / t.system_sizes[si] as f64).ln() + (c / t.gold_sizes[gi] as f64).ln());
    }
    let vi = vi.max(0.0);
    Ok(match base {
        LogBase::Natural => vi,
        LogBase::Two => vi / std::f64::consts::LN_2,
    })
}

/// ROUGE-1 with clipped unigram counts, optionally Porter-stemming both sides.
pub fn rouge1<S: AsRef<str>>(system: &[S], reference: &[S], stem_tokens: bool) -> Result<Prf> {
    if reference.is_empty() {
        return Err(Error::invalid("ROUGE reference is empty"));
    }
    let counts = |tokens: &[S]| {
        let mut m: HashMap<String, usize> = HashMap::new();
        for t in tokens {
            let t = t.as_ref().to_lowercase();
            let key = if stem_tokens { stem(&t) } else { t };
            *m.entry(key).or_default() += 1;
        }
        m
    };
    let sys = counts(system);
    let reference_counts = counts(reference);
    let matched: usize = sys.iter().map(|(w, &c)| c.min(reference_counts.get(w).copied().unwrap_or(0))).sum();
    let m = matched as f64;
    let recall = m / reference.len() as f64;
    let precision = if system.is_empty() { 0.0 } else { m / system.len() as f64 };
    Ok(Prf::new(precision, recall))
}

/// Corpus-level scores from per-decision scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Mean precision and recall, F1 recomputed from them.
    #[serde(flatten)]
    pub macro_prf: Prf,
    pub mean_f1: f64,
    pub count: usize,
}

pub fn aggregate(scores: &[Prf]) -> Result<Aggregate> {
    if scores.is_empty() {
        return Err(Error::invalid("nothing to aggregate"));
    }
    let n = scores.len() as f64;
    let p = scores.iter().map(|s| s.precision).sum::<f64>() / n;
    let r = scores.iter().map(|s| s.recall).sum::<f64>() / n;
    let f = scores.iter().map(|s| s.f1).sum::<f64>() / n;
    Ok(Aggregate { macro_prf: Prf::new(p, r), mean_f1: f, count: scores.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cl(groups: &[&[&str]]) -> Clustering {
        Clustering::new(groups.iter().map(|g| g.iter().map(|s| s.to_string()).collect()).collect()).unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn bcubed_examples() {
        let x = cl(&[&["a", "b"], &["c"]]);
        assert_eq!(bcubed(&x, &x).unwrap(), Prf::new(1.0, 1.0));
        let s = bcubed(&cl(&[&["a", "b", "c"]]), &x).unwrap();
        assert_relative_eq!(s.precision, 5.0 / 9.0, epsilon = 1e-12);
        assert_relative_eq!(s.recall, 1.0);
        assert_relative_eq!(s.f1, 5.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn pairwise_examples() {
        let gold = cl(&[&["a", "b"], &["c", "d"]]);
        assert_eq!(pairwise_score(&gold, &gold).unwrap(), Prf::new(1.0, 1.0));
        let s = pairwise_score(&cl(&[&["a", "b", "c", "d"]]), &gold).unwrap();
        assert_relative_eq!(s.precision, 2.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(s.recall, 1.0);
        assert_relative_eq!(s.f1, 0.5, epsilon = 1e-12);
        let singles = cl(&[&["a"], &["b"], &["c"], &["d"]]);
        assert_eq!(pairwise_score(&singles, &gold).unwrap(), Prf::new(1.0, 0.0));
        assert_eq!(pairwise_score(&singles, &singles).unwrap(), Prf::new(1.0, 1.0));
        assert_eq!(pairwise_score(&cl(&[&["a", "b", "c", "d"]]), &singles).unwrap(), Prf::new(0.0, 1.0));
    }

    #[test]
    fn voi_examples() {
        let gold = cl(&[&["a", "b"], &["c", "d"]]);
        assert_eq!(voi(&gold, &gold, LogBase::Natural).unwrap(), 0.0);
        let one = cl(&[&["a", "b", "c", "d"]]);
        assert_relative_eq!(voi(&one, &gold, LogBase::Natural).unwrap(), 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(voi(&one, &gold, LogBase::Two).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(voi(&one, &gold, LogBase::Natural).unwrap(), voi(&gold, &one, LogBase::Natural).unwrap());
    }

    #[test]
    fn universe_mismatch_is_an_error() {
        let a = cl(&[&["a", "b"]]);
        let b = cl(&[&["a", "c"]]);
        assert!(matches!(bcubed(&a, &b), Err(Error::UniverseMismatch)));
        assert!(pairwise_score(&a, &b).is_err());
        assert!(voi(&a, &b, LogBase::Natural).is_err());
    }

    #[test]
    fn rouge_examples() {
        let r = toks("remote will be plastic coated in rubber");
        assert_eq!(rouge1(&r, &r, false).unwrap(), Prf::new(1.0, 1.0));
        let s = rouge1(&toks("plastic rubber remote"), &r, true).unwrap();
        assert_relative_eq!(s.precision, 1.0);
        assert_relative_eq!(s.recall, 3.0 / 7.0, epsilon = 1e-12);
        assert_relative_eq!(s.f1, 0.6, epsilon = 1e-12);
        assert_eq!(rouge1(&[], &r, true).unwrap(), Prf::zero());
        assert!(rouge1(&r, &[], true).is_err());
    }

    #[test]
    fn rouge_stemming_matches_inflections() {
        let r = toks("buttons made of rubber");
        assert_eq!(rouge1(&toks("button"), &r, false).unwrap().recall, 0.0);
        assert_eq!(rouge1(&toks("button"), &r, true).unwrap().recall, 0.25);
    }

    #[test]
    fn aggregate_examples() {
        let one = Prf::new(0.5, 0.25);
        let a = aggregate(&[one]).unwrap();
        assert_eq!(a.macro_prf, one);
        let a = aggregate(&[Prf::new(1.0, 1.0), Prf::zero()]).unwrap();
        assert_eq!(a.macro_prf.precision, 0.5);
        assert_eq!(a.macro_prf.recall, 0.5);
        assert_eq!(a.mean_f1, 0.5);
        let b = aggregate(&[Prf::zero(), Prf::new(1.0, 1.0)]).unwrap();
        assert_eq!(a, b);
        assert!(aggregate(&[]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn partition(n: usize) -> impl Strategy<Value = Clustering> {
            proptest::collection::vec(0..n, n).prop_map(move |labels| {
                let mut groups: Vec<Vec<String>> = vec![Vec::new(); n];
                for (i, l) in labels.into_iter().enumerate() {
                    groups[l].push(format!("i{i}"));
                }
                Clustering::new(groups.into_iter().filter(|g| !g.is_empty()).collect()).unwrap()
            })
        }

        fn triple() -> impl Strategy<Value = (Clustering, Clustering, Clustering)> {
            (2usize..10).prop_flat_map(|n| (partition(n), partition(n), partition(n)))
        }

        proptest! {
            #[test]
            fn self_comparison_is_perfect((x, _, _) in triple()) {
                prop_assert_eq!(bcubed(&x, &x).unwrap(), Prf::new(1.0, 1.0));
                prop_assert_eq!(pairwise_score(&x, &x).unwrap(), Prf::new(1.0, 1.0));
                prop_assert_eq!(voi(&x, &x, LogBase::Natural).unwrap(), 0.0);
            }

            #[test]
            fn voi_is_a_metric((x, y, z) in triple()) {
                let d = |a: &Clustering, b: &Clustering| voi(a, b, LogBase::Natural).unwrap();
                prop_assert!(d(&x, &y) >= 0.0);
                prop_assert!((d(&x, &y) - d(&y, &x)).abs() < 1e-12);
                prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9);
            }

            #[test]
            fn scores_stay_in_unit_range((x, y, _) in triple()) {
                for s in [bcubed(&x, &y).unwrap(), pairwise_score(&x, &y).unwrap()] {
                    for v in [s.precision, s.recall, s.f1] {
                        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
                    }
                }
            }
        }
    }
}

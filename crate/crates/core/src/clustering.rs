//! Agglomerative clustering of decision-related DAs and the two baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Clustering;
use crate::error::{Error, Result};

/// Which pairwise score fills the similarity matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKind {
    Tfidf,
    Lda,
    Svm,
    Maxent,
}

impl SimilarityKind {
    pub const ALL: [SimilarityKind; 4] =
        [SimilarityKind::Tfidf, SimilarityKind::Lda, SimilarityKind::Svm, SimilarityKind::Maxent];

    pub fn name(self) -> &'static str {
        match self {
            SimilarityKind::Tfidf => "tfidf",
            SimilarityKind::Lda => "lda",
            SimilarityKind::Svm => "svm",
            SimilarityKind::Maxent => "maxent",
        }
    }

    /// Stopping thresholds tuned for each score's scale.
    pub fn default_threshold(self) -> f64 {
        match self {
            SimilarityKind::Tfidf => 0.035,
            SimilarityKind::Lda => 0.015,
            SimilarityKind::Svm => 0.0,
            SimilarityKind::Maxent => 0.45,
        }
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimilarityKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown similarity '{s}'")))
    }
}

/// Symmetric pairwise similarities over items kept in meeting order.
/// The diagonal is never read.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Fills the upper triangle with `f(i, j)` for `i < j` and mirrors it.
    pub fn from_fn<F>(ids: Vec<String>, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<f64>,
    {
        let n = ids.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j)?;
                if v.is_nan() {
                    return Err(Error::Invariant(format!("similarity of {} and {} is NaN", ids[i], ids[j])));
                }
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(SimilarityMatrix { ids, values })
    }

    /// Builds from a dense row-major matrix, which must be symmetric off the diagonal.
    pub fn from_dense(ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!("similarity matrix must be {n}x{n}")));
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, other) in rows.iter().enumerate().skip(i + 1) {
                if row[j] != other[i] {
                    return Err(Error::invalid(format!("similarity matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Self::from_fn(ids, |i, j| Ok(rows[i][j]))
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }
}

/// Average-link agglomerative clustering.
///
/// Starting from singletons, repeatedly merges the two clusters with the
/// highest mean cross-pair similarity, and stops as soon as that mean falls
/// strictly below `threshold`. Ties go to the pair whose earliest members come
/// first in meeting order. Output clusters are ordered by earliest member.
pub fn hac_average_link(sim: &SimilarityMatrix, threshold: f64) -> Result<Clustering> {
    if threshold.is_nan() {
        return Err(Error::invalid("threshold is NaN"));
    }
    let n = sim.len();
    if n == 0 {
        return Err(Error::invalid("nothing to cluster"));
    }
    // Slot i holds the cluster whose earliest member is item i; `sums` holds
    // total cross similarity between live slots.
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut sums: Vec<f64> = (0..n * n).map(|k| sim.values[k]).collect();
    let mut live = n;
    while live > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            let Some(ma) = &members[a] else { continue };
            for b in a + 1..n {
                let Some(mb) = &members[b] else { continue };
                let avg = sums[a * n + b] / (ma.len() * mb.len()) as f64;
                if best.is_none_or(|(v, _, _)| avg > v) {
                    best = Some((avg, a, b));
                }
            }
        }
        let (avg, a, b) = best.expect("at least two live clusters");
        if avg < threshold {
            break;
        }
        let absorbed = members[b].take().expect("live slot");
        members[a].as_mut().expect("live slot").extend(absorbed);
        for k in 0..n {
            let merged = sums[a * n + k] + sums[b * n + k];
            sums[a * n + k] = merged;
            sums[k * n + a] = merged;
        }
        live -= 1;
    }
    let clusters = members
        .into_iter()
        .flatten()
        .map(|mut m| {
            m.sort_unstable();
            m.into_iter().map(|i| sim.ids[i].clone()).collect()
        })
        .collect();
    Clustering::new(clusters)
}

/// Every item in one cluster.
pub fn baseline_all_in_one(items: &[String]) -> Result<Clustering> {
    if items.is_empty() {
        return Err(Error::invalid("nothing to cluster"));
    }
    Clustering::new(vec![items.to_vec()])
}

/// Splits items, in meeting order, into `k` contiguous runs whose sizes differ
/// by at most one, larger runs first.
pub fn baseline_contiguous(items: &[String], k: usize) -> Result<Clustering> {
    if k == 0 || k > items.len() {
        return Err(Error::invalid(format!("cannot split {} items into {k} segments", items.len())));
    }
    let base = items.len() / k;
    let extra = items.len() % k;
    let mut clusters = Vec::with_capacity(k);
    let mut start = 0;
    for s in 0..k {
        let size = base + usize::from(s < extra);
        clusters.push(items[start..start + size].to_vec());
        start += size;
    }
    Clustering::new(clusters)
}

/// Default segment count for the contiguous baseline: `ceil(sqrt(n))`.
pub fn default_segments(n: usize) -> usize {
    let mut k = (n as f64).sqrt().ceil() as usize;
    while k * k < n {
        k += 1;
    }
    k.max(1)
}

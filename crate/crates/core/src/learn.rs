//! Linear classifiers over named sparse features: MaxEnt (binary logistic
//! regression) and a linear SVM trained in the primal.
//!
//! Both share [`LinearModel`]. Continuous features are divided by their
//! training standard deviation, kept in the model; 0/1 features pass through
//! untouched. Scaling is not centred, so a zero vector always scores `b`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse map from feature name to value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub BTreeMap<String, f64>);

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn flag(&mut self, name: impl Into<String>, on: bool) {
        self.set(name, if on { 1.0 } else { 0.0 });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for FeatureVector {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        FeatureVector(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "maxent")]
    MaxEnt,
    #[serde(rename = "svm")]
    Svm,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::MaxEnt => "maxent",
            ModelKind::Svm => "svm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// L2 strength for MaxEnt, λ for the SVM.
    pub regularization: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Weight positives by negatives/positives.
    pub balance_classes: bool,
    /// Name of the feature inventory the model is trained on.
    pub feature_space: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { regularization: 0.01, epochs: 200, seed: 0, balance_classes: true, feature_space: String::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: ModelKind,
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardization: BTreeMap<String, Standardization>,
    pub config: TrainConfig,
    /// Objective after each accepted step (MaxEnt) or epoch (SVM).
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

type SparseRow = Vec<(usize, f64)>;

/// Sorted feature names plus standardization, shared by training and prediction.
struct Encoder<'a> {
    names: &'a [String],
    standardization: &'a BTreeMap<String, Standardization>,
    /// (column, mean, std) for every standardized feature.
    standardized: Vec<(usize, f64, f64)>,
}

impl<'a> Encoder<'a> {
    fn new(names: &'a [String], standardization: &'a BTreeMap<String, Standardization>) -> Self {
        let standardized = standardization
            .iter()
            .filter_map(|(name, s)| names.binary_search(name).ok().map(|col| (col, s.mean, s.std)))
            .collect();
        Encoder { names, standardization, standardized }
    }

    fn encode(&self, x: &FeatureVector) -> SparseRow {
        let mut row: SparseRow = x
            .iter()
            .filter(|(name, _)| !self.standardization.contains_key(*name))
            .filter_map(|(name, v)| self.names.binary_search_by(|n| n.as_str().cmp(name)).ok().map(|c| (c, v)))
            .filter(|(_, v)| *v != 0.0)
            .collect();
        for &(col, mean, std) in &self.standardized {
            let raw = x.get(&self.names[col]);
            if raw.is_none() && mean == 0.0 {
                continue;
            }
            row.push((col, (raw.unwrap_or(0.0) - mean) / std));
        }
        row
    }
}

fn check_examples(examples: &[(FeatureVector, bool)]) -> Result<()> {
    let positives = examples.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::invalid("training set needs at least one example of each label"));
    }
    for (x, _) in examples {
        if let Some((name, v)) = x.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("feature {name} has non-finite value {v}")));
        }
    }
    Ok(())
}

/// Builds the feature index and standardization statistics from training data.
fn fit_feature_space(examples: &[(FeatureVector, bool)]) -> (Vec<String>, BTreeMap<String, Standardization>) {
    let names: BTreeSet<&str> = examples.iter().flat_map(|(x, _)| x.iter().map(|(k, _)| k)).collect();
    let names: Vec<String> = names.into_iter().map(String::from).collect();
    let n = examples.len() as f64;
    let mut sums: BTreeMap<&str, (f64, f64, bool)> = BTreeMap::new();
    for (x, _) in examples {
        for (name, v) in x.iter() {
            let e = sums.entry(name).or_insert((0.0, 0.0, false));
            e.0 += v;
            e.1 += v * v;
            e.2 |= v != 0.0 && v != 1.0;
        }
    }
    let standardization = sums
        .into_iter()
        .filter(|(_, (_, _, continuous))| *continuous)
        .map(|(name, (s, sq, _))| {
            let mean = s / n;
            let var = (sq / n - mean * mean).max(0.0);
            let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
            // Scale only: sparse zeros stay zero and a zero vector scores the bias.
            (name.to_string(), Standardization { mean: 0.0, std })
        })
        .collect();
    (names, standardization)
}

fn class_weights(labels: &[bool], balance: bool) -> Vec<f64> {
    let pos = labels.iter().filter(|y| **y).count() as f64;
    let neg = labels.len() as f64 - pos;
    let w_pos = if balance && pos > 0.0 { neg / pos } else { 1.0 };
    labels.iter().map(|&y| if y { w_pos } else { 1.0 }).collect()
}

fn dot(row: &SparseRow, w: &[f64]) -> f64 {
    row.iter().map(|&(c, v)| w[c] * v).sum()
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weighted, L2-regularized negative log-likelihood of a MaxEnt model.
///
/// Parameters are laid out as `[w_0, …, w_{d-1}, b]`; the bias is not regularized.
pub struct MaxEntObjective {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    weights: Vec<f64>,
    total_weight: f64,
    l2: f64,
    dim: usize,
}

impl MaxEntObjective {
    /// Encodes the examples exactly as training does.
    pub fn from_examples(examples: &[(FeatureVector, bool)], l2: f64, balance_classes: bool) -> Self {
        let (names, standardization) = fit_feature_space(examples);
        let encoder = Encoder::new(&names, &standardization);
        let rows = examples.iter().map(|(x, _)| encoder.encode(x)).collect();
        let labels: Vec<bool> = examples.iter().map(|(_, y)| *y).collect();
        Self::from_rows(rows, &labels, l2, balance_classes, names.len())
    }

    fn from_rows(rows: Vec<SparseRow>, labels: &[bool], l2: f64, balance: bool, dim: usize) -> Self {
        let weights = class_weights(labels, balance);
        MaxEntObjective {
            rows,
            labels: labels.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect(),
            total_weight: weights.iter().sum(),
            weights,
            l2,
            dim,
        }
    }

    /// Number of parameters, bias included.
    pub fn dim(&self) -> usize {
        self.dim + 1
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let (w, b) = params.split_at(self.dim);
        let b = b[0];
        let data: f64 = self
            .rows
            .iter()
            .zip(&self.labels)
            .zip(&self.weights)
            .map(|((row, &y), &c)| {
                let z = dot(row, w) + b;
                c * (softplus(z) - y * z)
            })
            .sum();
        data / self.total_weight + 0.5 * self.l2 * w.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let (w, b) = params.split_at(self.dim);
        let b = b[0];
        let mut grad = vec![0.0; self.dim + 1];
        for ((row, &y), &c) in self.rows.iter().zip(&self.labels).zip(&self.weights) {
            let r = c * (sigmoid(dot(row, w) + b) - y) / self.total_weight;
            for &(col, v) in row {
                grad[col] += r * v;
            }
            grad[self.dim] += r;
        }
        for (g, &wi) in grad.iter_mut().zip(w) {
            *g += self.l2 * wi;
        }
        grad
    }
}

const GRAD_TOLERANCE: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;

/// Full-batch gradient descent with backtracking line search.
///
/// Stops when the gradient ∞-norm drops below 1e-6, when `epochs` steps have
/// been taken, or when no step size yields a decrease.
pub fn train_maxent(examples: &[(FeatureVector, bool)], config: &TrainConfig) -> Result<LinearModel> {
    check_examples(examples)?;
    if config.regularization.is_nan() || config.regularization < 0.0 {
        return Err(Error::invalid("l2 must be non-negative"));
    }
    let (names, standardization) = fit_feature_space(examples);
    let encoder = Encoder::new(&names, &standardization);
    let rows = examples.iter().map(|(x, _)| encoder.encode(x)).collect();
    let labels: Vec<bool> = examples.iter().map(|(_, y)| *y).collect();
    let objective =
        MaxEntObjective::from_rows(rows, &labels, config.regularization, config.balance_classes, names.len());

    let mut params = vec![0.0; objective.dim()];
    let mut loss = objective.loss(&params);
    let mut trace = vec![loss];
    let mut step = 1.0;
    for _ in 0..config.epochs {
        let grad = objective.gradient(&params);
        let g_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if g_inf < GRAD_TOLERANCE {
            break;
        }
        let g_sq: f64 = grad.iter().map(|g| g * g).sum();
        let mut accepted = None;
        while step > 1e-20 {
            let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let cand_loss = objective.loss(&candidate);
            if cand_loss < loss && cand_loss <= loss - ARMIJO * step * g_sq {
                accepted = Some((candidate, cand_loss));
                break;
            }
            step *= 0.5;
        }
        let Some((next, next_loss)) = accepted else { break };
        params = next;
        loss = next_loss;
        trace.push(loss);
        step *= 2.0;
    }

    let bias = params.pop().expect("bias slot");
    Ok(LinearModel {
        kind: ModelKind::MaxEnt,
        feature_names: names,
        weights: params,
        bias,
        standardization,
        config: config.clone(),
        objective_trace: trace,
    })
}

/// Primal hinge loss plus `(λ/2)‖w‖²`, minimized by Pegasos-style stochastic
/// subgradient steps over seeded per-epoch shuffles.
///
/// The bias is handled as a weight on a constant feature. The returned model is
/// the running average of the epoch-end iterates.
pub fn train_svm(examples: &[(FeatureVector, bool)], config: &TrainConfig) -> Result<LinearModel> {
    check_examples(examples)?;
    let lambda = config.regularization;
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::invalid("SVM lambda must be positive"));
    }
    let (names, standardization) = fit_feature_space(examples);
    let encoder = Encoder::new(&names, &standardization);
    let bias_col = names.len();
    let rows: Vec<SparseRow> = examples
        .iter()
        .map(|(x, _)| {
            let mut r = encoder.encode(x);
            r.push((bias_col, 1.0));
            r
        })
        .collect();
    let labels: Vec<bool> = examples.iter().map(|(_, y)| *y).collect();
    let signs: Vec<f64> = labels.iter().map(|&y| if y { 1.0 } else { -1.0 }).collect();
    let costs = class_weights(&labels, config.balance_classes);
    let mean_cost = costs.iter().sum::<f64>() / costs.len() as f64;

    let objective = |w: &[f64]| -> f64 {
        let hinge: f64 =
            rows.iter().zip(&signs).zip(&costs).map(|((r, &y), &c)| c * (1.0 - y * dot(r, w)).max(0.0)).sum::<f64>()
                / rows.len() as f64;
        hinge + 0.5 * lambda * w.iter().map(|x| x * x).sum::<f64>()
    };

    let dim = names.len() + 1;
    // w = scale * v keeps the shrink step O(1).
    let mut v = vec![0.0; dim];
    let mut scale = 1.0;
    let mut avg_sum = vec![0.0; dim];
    let mut average = vec![0.0; dim];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut t = 0usize;
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin = signs[i] * scale * dot(&rows[i], &v);
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|x| *x = 0.0);
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                // Costs are normalized so the average step matches unweighted Pegasos.
                let step = eta * costs[i] / mean_cost * signs[i] / scale;
                for &(c, x) in &rows[i] {
                    v[c] += step * x;
                }
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|x| *x *= scale);
                scale = 1.0;
            }
        }
        for (s, x) in avg_sum.iter_mut().zip(&v) {
            *s += scale * x;
        }
        let n = (epoch + 1) as f64;
        average.iter_mut().zip(&avg_sum).for_each(|(a, s)| *a = s / n);
        trace.push(objective(&average));
    }

    let bias = average.pop().expect("bias slot");
    Ok(LinearModel {
        kind: ModelKind::Svm,
        feature_names: names,
        weights: average,
        bias,
        standardization,
        config: config.clone(),
        objective_trace: trace,
    })
}

pub fn train(kind: ModelKind, examples: &[(FeatureVector, bool)], config: &TrainConfig) -> Result<LinearModel> {
    match kind {
        ModelKind::MaxEnt => train_maxent(examples, config),
        ModelKind::Svm => train_svm(examples, config),
    }
}

/// Primal SVM objective of `model` on a data set, in standardized feature space.
pub fn svm_objective(model: &LinearModel, examples: &[(FeatureVector, bool)]) -> f64 {
    let costs = class_weights(&examples.iter().map(|(_, y)| *y).collect::<Vec<_>>(), model.config.balance_classes);
    let hinge: f64 = examples
        .iter()
        .zip(&costs)
        .map(|((x, y), c)| {
            let s = if *y { 1.0 } else { -1.0 };
            c * (1.0 - s * model.linear_score(x)).max(0.0)
        })
        .sum::<f64>()
        / examples.len() as f64;
    let norm_sq = model.weights.iter().map(|w| w * w).sum::<f64>() + model.bias * model.bias;
    hinge + 0.5 * model.config.regularization * norm_sq
}

impl LinearModel {
    fn encoder(&self) -> Encoder<'_> {
        Encoder::new(&self.feature_names, &self.standardization)
    }

    /// The vector the weights actually see: standardized continuous features,
    /// unknown names dropped.
    pub fn standardize(&self, x: &FeatureVector) -> FeatureVector {
        self.encoder().encode(x).into_iter().map(|(c, v)| (self.feature_names[c].clone(), v)).collect()
    }

    /// `w·x + b` after standardization.
    pub fn linear_score(&self, x: &FeatureVector) -> f64 {
        dot(&self.encoder().encode(x), &self.weights) + self.bias
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch { expected: kind.to_string(), found: self.kind.to_string() });
        }
        Ok(())
    }

    /// P(positive | x) = σ(w·x + b). MaxEnt only.
    pub fn predict_prob(&self, x: &FeatureVector) -> Result<f64> {
        self.expect_kind(ModelKind::MaxEnt)?;
        Ok(sigmoid(self.linear_score(x)))
    }

    /// Raw margin `w·x + b`. SVM only.
    pub fn decision_value(&self, x: &FeatureVector) -> Result<f64> {
        self.expect_kind(ModelKind::Svm)?;
        Ok(self.linear_score(x))
    }

    /// Probability for MaxEnt, decision value for SVM.
    pub fn score(&self, x: &FeatureVector) -> f64 {
        match self.kind {
            ModelKind::MaxEnt => sigmoid(self.linear_score(x)),
            ModelKind::Svm => self.linear_score(x),
        }
    }

    /// Score above 0.5 for MaxEnt, above 0 for SVM.
    pub fn is_positive(&self, x: &FeatureVector) -> bool {
        self.is_positive_score(self.score(x))
    }

    pub fn is_positive_score(&self, score: f64) -> bool {
        match self.kind {
            ModelKind::MaxEnt => score > 0.5,
            ModelKind::Svm => score > 0.0,
        }
    }

    pub fn expect_feature_space(&self, space: &str) -> Result<()> {
        if self.config.feature_space != space {
            return Err(Error::FeatureSpaceMismatch {
                model: self.config.feature_space.clone(),
                requested: space.to_string(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let model: LinearModel = serde_json::from_str(json)?;
        if model.feature_names.len() != model.weights.len() {
            return Err(Error::invalid("model has different numbers of feature names and weights"));
        }
        if model.feature_names.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("model feature names must be sorted and unique"));
        }
        if model.weights.iter().any(|w| !w.is_finite()) || !model.bias.is_finite() {
            return Err(Error::invalid("model has non-finite weights"));
        }
        Ok(model)
    }
}

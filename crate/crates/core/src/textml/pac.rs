use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::tfidf::{SparseVector, TfIdfModel};
use super::tokenize::tokenize;
use crate::corpus::{DocumentRecord, Label};
use crate::error::{Error, Result};
use crate::seed;

/// Upper bound on training passes accepted from a grid.
pub const MAX_EPOCHS: u32 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacHyperParams {
    /// Aggressiveness: the cap on each update step.
    pub c: f64,
    pub epochs: u32,
    #[serde(default)]
    pub shuffle_seed: u64,
}

impl PacHyperParams {
    pub fn new(c: f64, epochs: u32) -> Self {
        PacHyperParams {
            c,
            epochs,
            shuffle_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::invalid(format!("C must be finite and > 0, got {}", self.c)));
        }
        if self.epochs == 0 || self.epochs > MAX_EPOCHS {
            return Err(Error::invalid(format!(
                "epochs must be in 1..={MAX_EPOCHS}, got {}",
                self.epochs
            )));
        }
        Ok(())
    }
}

/// Linear passive-aggressive classifier (PA-I) with a bias term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyper: PacHyperParams,
}

impl PacModel {
    pub fn zeros(n_features: usize, hyper: PacHyperParams) -> Self {
        PacModel {
            weights: vec![0.0; n_features],
            bias: 0.0,
            hyper,
        }
    }

    pub fn score(&self, x: &SparseVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    /// One online step on `(x, y)`; returns the step size taken.
    ///
    /// The bias acts as an implicit unit feature, hence the `+ 1` in the
    /// denominator. Features beyond the weight vector are ignored.
    pub fn update(&mut self, x: &SparseVector, y: Label) -> f64 {
        let y = y.sign();
        let loss = (1.0 - y * self.score(x)).max(0.0);
        if loss == 0.0 {
            return 0.0;
        }
        let in_range: f64 = x
            .entries()
            .iter()
            .filter(|&&(i, _)| i < self.weights.len())
            .map(|&(_, w)| w * w)
            .sum();
        let tau = self.hyper.c.min(loss / (in_range + 1.0));
        for &(i, w) in x.entries() {
            if let Some(slot) = self.weights.get_mut(i) {
                *slot += tau * y * w;
            }
        }
        self.bias += tau * y;
        tau
    }
}

/// Example visiting order: `epochs` consecutive passes, each a fresh
/// permutation of `0..n` drawn from a generator keyed by `shuffle_seed`.
pub fn visit_order(n: usize, hyper: &PacHyperParams) -> Vec<usize> {
    let mut rng = seed::rng(hyper.shuffle_seed);
    let mut pass: Vec<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n * hyper.epochs as usize);
    for _ in 0..hyper.epochs {
        pass.shuffle(&mut rng);
        order.extend_from_slice(&pass);
    }
    order
}

pub fn pac_train(
    vectors: &[SparseVector],
    labels: &[Label],
    n_features: usize,
    hyper: PacHyperParams,
) -> Result<PacModel> {
    if vectors.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} vectors but {} labels",
            vectors.len(),
            labels.len()
        )));
    }
    if vectors.is_empty() {
        return Err(Error::invalid("no training examples"));
    }
    hyper.validate()?;
    let mut model = PacModel::zeros(n_features, hyper);
    for i in visit_order(vectors.len(), &hyper) {
        model.update(&vectors[i], labels[i]);
    }
    Ok(model)
}

/// `sign(w·x + b)`, with a zero score mapped to `Real` (+1).
pub fn pac_predict(model: &PacModel, x: &SparseVector) -> Label {
    if model.score(x) >= 0.0 {
        Label::Real
    } else {
        Label::Fake
    }
}

pub fn accuracy(model: &PacModel, vectorizer: &TfIdfModel, docs: &[DocumentRecord]) -> Result<f64> {
    if docs.is_empty() {
        return Err(Error::invalid("accuracy over an empty document set"));
    }
    let correct = docs
        .iter()
        .filter(|d| pac_predict(model, &vectorizer.transform(&tokenize(&d.text))) == d.label)
        .count();
    Ok(correct as f64 / docs.len() as f64)
}

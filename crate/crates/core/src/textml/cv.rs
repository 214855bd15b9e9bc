use std::ops::Range;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::pac::{pac_predict, pac_train, PacHyperParams};
use super::tfidf::{SparseVector, TfIdfModel};
use super::tokenize::tokenize;
use crate::corpus::{DocumentRecord, Label};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub grid: Vec<PacHyperParams>,
    /// Shuffles the records once before they are cut into folds.
    #[serde(default)]
    pub seed: u64,
}

impl Default for CvConfig {
    /// Five folds over `C ∈ {0.01, 0.1, 1.0} × epochs ∈ {5, 20}`.
    fn default() -> Self {
        let grid = [0.01, 0.1, 1.0]
            .iter()
            .flat_map(|&c| [5, 20].map(|epochs| PacHyperParams::new(c, epochs)))
            .collect();
        CvConfig {
            folds: 5,
            grid,
            seed: 0,
        }
    }
}

impl CvConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        CvConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid(format!("folds must be >= 2, got {}", self.folds)));
        }
        if self.grid.is_empty() {
            return Err(Error::invalid("hyperparameter grid is empty"));
        }
        self.grid.iter().try_for_each(PacHyperParams::validate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub params: PacHyperParams,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub per_candidate: Vec<CandidateScore>,
    pub best: PacHyperParams,
    pub best_mean_accuracy: f64,
}

/// Contiguous fold ranges over `0..n`; the first `n % k` folds hold one extra item.
pub fn fold_bounds(n: usize, k: usize) -> Vec<Range<usize>> {
    assert!(k >= 1 && k <= n, "need 1 <= k <= n (k={k}, n={n})");
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

struct Prepared {
    tokens: Vec<Vec<String>>,
    labels: Vec<Label>,
}

/// Grid search scored by k-fold cross-validation.
///
/// The vectorizer is refit on the training folds of every split so the
/// validation fold never contributes vocabulary or document frequencies.
pub fn kfold_cv(train: &[DocumentRecord], config: &CvConfig) -> Result<CvResult> {
    config.validate()?;
    let k = config.folds;
    if k > train.len() {
        return Err(Error::invalid(format!(
            "{k} folds requested for {} records",
            train.len()
        )));
    }

    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut seed::rng(config.seed));
    let data = Prepared {
        tokens: order.iter().map(|&i| tokenize(&train[i].text)).collect(),
        labels: order.iter().map(|&i| train[i].label).collect(),
    };

    let mut accuracies = vec![Vec::with_capacity(k); config.grid.len()];
    for fold in fold_bounds(data.tokens.len(), k) {
        let train_idx: Vec<usize> = (0..data.tokens.len())
            .filter(|i| !fold.contains(i))
            .collect();
        let train_tokens: Vec<&[String]> =
            train_idx.iter().map(|&i| data.tokens[i].as_slice()).collect();
        let vectorizer = TfIdfModel::fit(&train_tokens)?;
        let train_vecs: Vec<SparseVector> = train_tokens
            .iter()
            .map(|t| vectorizer.transform(t))
            .collect();
        let train_labels: Vec<Label> = train_idx.iter().map(|&i| data.labels[i]).collect();
        let val_vecs: Vec<SparseVector> = fold
            .clone()
            .map(|i| vectorizer.transform(&data.tokens[i]))
            .collect();

        for (slot, hyper) in accuracies.iter_mut().zip(&config.grid) {
            let model = pac_train(&train_vecs, &train_labels, vectorizer.len(), *hyper)?;
            let correct = val_vecs
                .iter()
                .zip(fold.clone())
                .filter(|(v, i)| pac_predict(&model, v) == data.labels[*i])
                .count();
            slot.push(correct as f64 / fold.len() as f64);
        }
    }

    let per_candidate: Vec<CandidateScore> = config
        .grid
        .iter()
        .zip(accuracies)
        .map(|(params, fold_accuracies)| CandidateScore {
            params: *params,
            mean_accuracy: fold_accuracies.iter().sum::<f64>() / k as f64,
            fold_accuracies,
        })
        .collect();

    let mut best = 0;
    for (i, cand) in per_candidate.iter().enumerate().skip(1) {
        if cand.mean_accuracy > per_candidate[best].mean_accuracy {
            best = i;
        }
    }
    Ok(CvResult {
        best: per_candidate[best].params,
        best_mean_accuracy: per_candidate[best].mean_accuracy,
        per_candidate,
    })
}

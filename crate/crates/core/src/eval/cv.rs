//! Stratified cross-validation splits and the cross-entropy loss.

use super::dataset::Dataset;
use super::matrix::Matrix;
use super::EvalError;
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct CvSplit {
    assignments: Vec<usize>,
    k: usize,
}

impl CvSplit {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn valid_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }
}

/// Stratified k-fold assignment: each class's samples are shuffled, then
/// dealt round-robin over the folds, so per-class fold sizes differ by at
/// most one. Deterministic in `seed`.
pub fn make_cv_splits(dataset: &Dataset, k: usize, seed: u64) -> Result<CvSplit, EvalError> {
    if k < 2 {
        return Err(EvalError::BadFoldCount {
            k,
            reason: "need at least 2 folds".to_string(),
        });
    }
    if k > dataset.min_class_count() {
        return Err(EvalError::BadFoldCount {
            k,
            reason: format!(
                "smallest class has only {} samples",
                dataset.min_class_count()
            ),
        });
    }
    let mut rng = Rng::seed_from_u64(seed);
    let mut assignments = vec![0usize; dataset.len()];
    for class in 0..dataset.class_count() {
        let mut members: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.labels()[i] == class)
            .collect();
        rng.shuffle(&mut members);
        for (pos, &sample) in members.iter().enumerate() {
            assignments[sample] = pos % k;
        }
    }
    Ok(CvSplit { assignments, k })
}

/// Mean over samples of −log of the probability assigned to the true class,
/// clipped into [ε, 1−ε] with ε = 1e-12. Rows must be distributions.
pub fn cross_entropy(probabilities: &Matrix, labels: &[usize]) -> Result<f64, EvalError> {
    const EPS: f64 = 1e-12;
    if probabilities.rows() != labels.len() {
        return Err(EvalError::Shape(format!(
            "{} probability rows but {} labels",
            probabilities.rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(EvalError::Shape("no samples".to_string()));
    }
    let mut total = 0.0;
    for (row, &label) in probabilities.row_iter().zip(labels) {
        if label >= row.len() {
            return Err(EvalError::Shape(format!(
                "label {label} outside {} classes",
                row.len()
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvalError::Shape(format!(
                "probability row sums to {sum}"
            )));
        }
        total -= row[label].clamp(EPS, 1.0 - EPS).ln();
    }
    Ok(total / labels.len() as f64)
}

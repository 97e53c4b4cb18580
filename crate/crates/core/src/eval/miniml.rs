//! The native mini-ML pipeline evaluator: fit the configured 3-step
//! pipeline per CV fold, score the held-out fold with cross-entropy, and
//! average over folds.

use super::cv::{cross_entropy, make_cv_splits, CvSplit};
use super::dataset::Dataset;
use super::learners::Learner;
use super::matrix::Matrix;
use super::transforms::Transform;
use super::{EvalError, Evaluation};
use crate::rng::fnv1a64;
use crate::space::{ConfigSpace, Configuration};

#[derive(Debug, Clone)]
pub struct MiniMlEvaluator {
    dataset: Dataset,
    split: CvSplit,
    seed: u64,
}

impl MiniMlEvaluator {
    pub fn new(dataset: Dataset, k: usize, seed: u64) -> Result<Self, EvalError> {
        let split = make_cv_splits(&dataset, k, seed)?;
        Ok(Self {
            dataset,
            split,
            seed,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn split(&self) -> &CvSplit {
        &self.split
    }

    pub fn evaluate(
        &self,
        space: &ConfigSpace,
        config: &Configuration,
    ) -> Result<Evaluation, EvalError> {
        let mut fold_losses = Vec::with_capacity(self.split.k());
        for fold in 0..self.split.k() {
            let loss = self.evaluate_fold(space, config, fold).map_err(|e| {
                EvalError::Fold {
                    fold,
                    source: Box::new(e),
                }
            })?;
            fold_losses.push(loss);
        }
        let loss = fold_losses.iter().sum::<f64>() / fold_losses.len() as f64;
        Ok(Evaluation {
            loss,
            fold_losses: Some(fold_losses),
        })
    }

    fn evaluate_fold(
        &self,
        space: &ConfigSpace,
        config: &Configuration,
        fold: usize,
    ) -> Result<f64, EvalError> {
        let (transforms, learner) = self.fit_pipeline(space, config, fold)?;
        let valid_idx = self.split.valid_indices(fold);
        let mut x_valid = select_rows(self.dataset.features(), &valid_idx);
        for t in &transforms {
            x_valid = t.apply(&x_valid);
        }
        let y_valid: Vec<usize> = valid_idx.iter().map(|&i| self.dataset.labels()[i]).collect();
        cross_entropy(&learner.predict_proba(&x_valid), &y_valid)
    }

    /// Fits the configured pipeline on the fold's training rows only; the
    /// held-out rows never reach any fit.
    pub(crate) fn fit_pipeline(
        &self,
        space: &ConfigSpace,
        config: &Configuration,
        fold: usize,
    ) -> Result<(Vec<Transform>, Learner), EvalError> {
        let train_idx = self.split.train_indices(fold);
        let mut x_train = select_rows(self.dataset.features(), &train_idx);
        let y_train: Vec<usize> = train_idx.iter().map(|&i| self.dataset.labels()[i]).collect();

        let steps = space.steps();
        let mut transforms = Vec::with_capacity(steps.len() - 1);
        for (s, step) in steps.iter().enumerate() {
            let algo = &step.algorithms[config.algo_indices()[s]];
            if s + 1 == steps.len() {
                let learner =
                    self.fit_learner(space, config, &step.name, &algo.name, &x_train, &y_train)?;
                return Ok((transforms, learner));
            }
            let transform = self.fit_transform(space, config, &step.name, &algo.name, &x_train)?;
            x_train = transform.apply(&x_train);
            transforms.push(transform);
        }
        unreachable!("spaces have at least one step")
    }

    fn fit_transform(
        &self,
        space: &ConfigSpace,
        config: &Configuration,
        step_name: &str,
        algo_name: &str,
        x_train: &Matrix,
    ) -> Result<Transform, EvalError> {
        let hp_i64 = |hp: &str| hp_i64(space, config, step_name, algo_name, hp);
        match algo_name {
            "raw" => Ok(Transform::fit_raw()),
            "polynomial" => Transform::fit_polynomial(hp_i64("degree")?),
            "random_projection" => {
                let dim = hp_i64("dim")?;
                if dim < 1 {
                    return Err(EvalError::Pipeline(format!(
                        "random_projection dim {dim} must be >= 1"
                    )));
                }
                // Projection matrices depend only on (evaluator seed, step,
                // dim), never on the data, so refits are identical.
                let tag = format!("{step_name}:random_projection:{dim}");
                let seed = self.seed ^ fnv1a64(tag.as_bytes());
                Ok(Transform::fit_random_projection(
                    x_train.cols(),
                    dim as usize,
                    seed,
                ))
            }
            "standardize" => Ok(Transform::fit_standardize(x_train)),
            "pca" => {
                let n_components = hp_i64("n_components")?;
                if n_components < 1 {
                    return Err(EvalError::Pipeline(format!(
                        "pca n_components {n_components} must be >= 1"
                    )));
                }
                let whiten = config
                    .value_of(space, step_name, "whiten")
                    .and_then(|v| v.as_bool())
                    .ok_or_else(|| missing_hp(algo_name, "whiten"))?;
                Ok(Transform::fit_pca(x_train, n_components as usize, whiten))
            }
            "knn" | "decision_tree" => Err(EvalError::Pipeline(format!(
                "learner '{algo_name}' must be the final step"
            ))),
            other => Err(EvalError::UnsupportedAlgorithm {
                step: step_name.to_string(),
                algo: other.to_string(),
            }),
        }
    }

    fn fit_learner(
        &self,
        space: &ConfigSpace,
        config: &Configuration,
        step_name: &str,
        algo_name: &str,
        x_train: &Matrix,
        y_train: &[usize],
    ) -> Result<Learner, EvalError> {
        let hp_i64 = |hp: &str| hp_i64(space, config, step_name, algo_name, hp);
        let classes = self.dataset.class_count();
        match algo_name {
            "knn" => Learner::fit_knn(x_train, y_train, classes, hp_i64("k")? as usize),
            "decision_tree" => Learner::fit_tree(
                x_train,
                y_train,
                classes,
                hp_i64("max_depth")? as usize,
                hp_i64("min_samples_leaf")? as usize,
            ),
            other => Err(EvalError::Pipeline(format!(
                "final step '{step_name}' must be a learner, found '{other}'"
            ))),
        }
    }
}

fn hp_i64(
    space: &ConfigSpace,
    config: &Configuration,
    step_name: &str,
    algo_name: &str,
    hp: &str,
) -> Result<i64, EvalError> {
    config
        .value_of(space, step_name, hp)
        .and_then(|v| v.as_i64())
        .ok_or_else(|| missing_hp(algo_name, hp))
}

fn missing_hp(algo: &str, hp: &str) -> EvalError {
    EvalError::Pipeline(format!("algorithm '{algo}' needs hyperparameter '{hp}'"))
}

fn select_rows(m: &Matrix, indices: &[usize]) -> Matrix {
    Matrix::from_rows(indices.iter().map(|&i| m.row(i).to_vec()).collect())
}

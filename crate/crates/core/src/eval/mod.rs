//! Validation-loss evaluators.
//!
//! Three built-in evaluators cover the benchmark needs: an analytic
//! synthetic surface (exact, instantaneous), a loss-table lookup (exact,
//! for hand-checkable fixtures), and the mini-ML pipeline with k-fold
//! cross-validated cross-entropy. All three are pure functions of
//! (spec, configuration): repeated evaluation returns identical losses.

mod cv;
mod dataset;
mod learners;
mod matrix;
mod miniml;
mod synthetic;
#[cfg(test)]
mod tests;
mod transforms;

pub use cv::{cross_entropy, make_cv_splits, CvSplit};
pub use dataset::{generate_mini150, Dataset};
pub use learners::Learner;
pub use matrix::{symmetric_eigen, Matrix};
pub use miniml::MiniMlEvaluator;
pub use synthetic::SyntheticSurface;
pub use transforms::Transform;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{ConfigSpace, Configuration};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("invalid fold count {k}: {reason}")]
    BadFoldCount { k: usize, reason: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("pipeline: {0}")]
    Pipeline(String),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<EvalError>,
    },
    #[error("step '{step}': algorithm '{algo}' has no implementation")]
    UnsupportedAlgorithm { step: String, algo: String },
    #[error("canonical id '{0}' missing from loss table")]
    MissingFromTable(String),
    #[error("evaluator spec: {0}")]
    Spec(String),
}

/// One evaluated loss; fold losses are present for cross-validated
/// evaluators only.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub fold_losses: Option<Vec<f64>>,
}

/// Declarative evaluator description, JSON-serializable for run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum EvaluatorSpec {
    #[serde(rename = "synthetic")]
    Synthetic {
        #[serde(default)]
        noise_std: f64,
        #[serde(default)]
        seed: u64,
    },
    #[serde(rename = "mini-ml")]
    MiniMl {
        /// Built-in name ("mini150") or path to a headerless CSV.
        dataset: String,
        #[serde(default = "default_folds")]
        k: usize,
        #[serde(default)]
        seed: u64,
    },
    #[serde(rename = "loss-table")]
    LossTable {
        /// Path to a JSON map canonical-id → loss.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
        /// Inline table; takes precedence over `path`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<BTreeMap<String, f64>>,
    },
}

fn default_folds() -> usize {
    5
}

/// A constructed evaluator, ready to score configurations. Stateless after
/// construction; concurrent `evaluate` calls are safe.
#[derive(Debug, Clone)]
pub enum Evaluator {
    Synthetic(SyntheticSurface),
    LossTable(BTreeMap<String, f64>),
    MiniMl(MiniMlEvaluator),
}

impl Evaluator {
    pub fn from_spec(spec: &EvaluatorSpec) -> Result<Self, EvalError> {
        match spec {
            EvaluatorSpec::Synthetic { noise_std, seed } => {
                if !noise_std.is_finite() || *noise_std < 0.0 {
                    return Err(EvalError::Spec(format!("bad noise_std {noise_std}")));
                }
                Ok(Evaluator::Synthetic(SyntheticSurface::new(*noise_std, *seed)))
            }
            EvaluatorSpec::MiniMl { dataset, k, seed } => {
                let data = if dataset == "mini150" {
                    crate::builtin::mini150_dataset()
                } else {
                    let text = std::fs::read_to_string(dataset).map_err(|e| {
                        EvalError::Spec(format!("cannot read dataset '{dataset}': {e}"))
                    })?;
                    Dataset::parse_csv(&text)?
                };
                Ok(Evaluator::MiniMl(MiniMlEvaluator::new(data, *k, *seed)?))
            }
            EvaluatorSpec::LossTable { path, table } => {
                let table = match (table, path) {
                    (Some(t), _) => t.clone(),
                    (None, Some(p)) => {
                        let text = std::fs::read_to_string(p).map_err(|e| {
                            EvalError::Spec(format!("cannot read loss table '{p}': {e}"))
                        })?;
                        parse_loss_table(&text)?
                    }
                    (None, None) => {
                        return Err(EvalError::Spec(
                            "loss-table evaluator needs 'table' or 'path'".to_string(),
                        ))
                    }
                };
                if table.is_empty() {
                    return Err(EvalError::Spec("loss table is empty".to_string()));
                }
                Ok(Evaluator::LossTable(table))
            }
        }
    }

    pub fn evaluate(
        &self,
        space: &ConfigSpace,
        config: &Configuration,
    ) -> Result<Evaluation, EvalError> {
        match self {
            Evaluator::Synthetic(surface) => Ok(Evaluation {
                loss: surface.evaluate(space, config),
                fold_losses: None,
            }),
            Evaluator::LossTable(table) => {
                let id = space.canonical_id(config);
                let loss = *table
                    .get(&id)
                    .ok_or_else(|| EvalError::MissingFromTable(id))?;
                Ok(Evaluation {
                    loss,
                    fold_losses: None,
                })
            }
            Evaluator::MiniMl(evaluator) => evaluator.evaluate(space, config),
        }
    }
}

/// Parses the loss-table interchange format: a JSON object mapping
/// canonical ids to losses.
pub fn parse_loss_table(text: &str) -> Result<BTreeMap<String, f64>, EvalError> {
    serde_json::from_str(text).map_err(|e| EvalError::Spec(format!("bad loss table: {e}")))
}

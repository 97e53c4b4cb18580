//! Datasets: labeled feature matrices, their CSV form, and the built-in
//! mini150 generator.

use super::matrix::Matrix;
use super::EvalError;
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self, EvalError> {
        if features.rows() != labels.len() {
            return Err(EvalError::Dataset(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(EvalError::Dataset("dataset is empty".to_string()));
        }
        let class_count = labels.iter().max().unwrap() + 1;
        if class_count < 2 {
            return Err(EvalError::Dataset("fewer than 2 classes".to_string()));
        }
        for c in 0..class_count {
            if !labels.contains(&c) {
                return Err(EvalError::Dataset(format!("class {c} has no samples")));
            }
        }
        Ok(Self {
            features,
            labels,
            class_count,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn min_class_count(&self) -> usize {
        (0..self.class_count)
            .map(|c| self.labels.iter().filter(|&&l| l == c).count())
            .min()
            .unwrap_or(0)
    }

    /// Parses the headerless CSV form: feature columns then an integer
    /// label column.
    pub fn parse_csv(text: &str) -> Result<Self, EvalError> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut width = None;
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 2 {
                return Err(EvalError::Dataset(format!(
                    "line {}: need at least one feature and a label",
                    lineno + 1
                )));
            }
            match width {
                None => width = Some(fields.len()),
                Some(w) if w != fields.len() => {
                    return Err(EvalError::Dataset(format!(
                        "line {}: expected {} columns, found {}",
                        lineno + 1,
                        w,
                        fields.len()
                    )))
                }
                _ => {}
            }
            let (feature_fields, label_field) = fields.split_at(fields.len() - 1);
            let mut row = Vec::with_capacity(feature_fields.len());
            for f in feature_fields {
                row.push(f.parse::<f64>().map_err(|_| {
                    EvalError::Dataset(format!("line {}: bad number '{f}'", lineno + 1))
                })?);
            }
            let label = label_field[0].parse::<usize>().map_err(|_| {
                EvalError::Dataset(format!(
                    "line {}: bad label '{}'",
                    lineno + 1,
                    label_field[0]
                ))
            })?;
            rows.push(row);
            labels.push(label);
        }
        Dataset::new(Matrix::from_rows(rows), labels)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (row, &label) in self.features.row_iter().zip(&self.labels) {
            for x in row {
                out.push_str(&x.to_string());
                out.push(',');
            }
            out.push_str(&label.to_string());
            out.push('\n');
        }
        out
    }
}

/// Generates the built-in mini150 dataset: 3 classes × 50 samples, 4
/// standard-normal features shifted by per-class means, drawn class-major
/// with two Box-Muller pairs per sample from seed 42.
pub fn generate_mini150() -> Dataset {
    const MEANS: [[f64; 4]; 3] = [
        [0.0, 0.0, 0.0, 0.0],
        [2.5, 2.5, 0.0, 0.0],
        [0.0, 0.0, 2.5, 2.5],
    ];
    let mut rng = Rng::seed_from_u64(42);
    let mut rows = Vec::with_capacity(150);
    let mut labels = Vec::with_capacity(150);
    for (class, mean) in MEANS.iter().enumerate() {
        for _ in 0..50 {
            let (z0, z1) = rng.next_normal_pair();
            let (z2, z3) = rng.next_normal_pair();
            rows.push(vec![
                mean[0] + z0,
                mean[1] + z1,
                mean[2] + z2,
                mean[3] + z3,
            ]);
            labels.push(class);
        }
    }
    Dataset::new(Matrix::from_rows(rows), labels).expect("generator output is valid")
}

//! Feature transforms for the mini pipeline. Each is fitted on training
//! rows only and then applied to training and validation alike.

use super::matrix::{symmetric_eigen, Matrix};
use super::EvalError;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    Raw,
    Polynomial {
        degree: i64,
    },
    RandomProjection {
        // input_dim × dim, entries N(0,1)/√dim.
        matrix: Matrix,
    },
    Standardize {
        means: Vec<f64>,
        stds: Vec<f64>,
    },
    Pca {
        means: Vec<f64>,
        // input_dim × n_components, orthonormal columns.
        components: Matrix,
        // Per-component √eigenvalue when whitening.
        scales: Option<Vec<f64>>,
    },
}

impl Transform {
    pub fn fit_raw() -> Transform {
        Transform::Raw
    }

    pub fn fit_polynomial(degree: i64) -> Result<Transform, EvalError> {
        if !(1..=2).contains(&degree) {
            return Err(EvalError::Pipeline(format!(
                "polynomial degree {degree} not supported"
            )));
        }
        Ok(Transform::Polynomial { degree })
    }

    pub fn fit_random_projection(input_dim: usize, dim: usize, seed: u64) -> Transform {
        let mut rng = Rng::seed_from_u64(seed);
        let mut flat = Vec::with_capacity(input_dim * dim);
        let scale = 1.0 / (dim as f64).sqrt();
        while flat.len() < input_dim * dim {
            let (a, b) = rng.next_normal_pair();
            flat.push(a * scale);
            if flat.len() < input_dim * dim {
                flat.push(b * scale);
            }
        }
        let mut matrix = Matrix::zeros(input_dim, dim);
        for i in 0..input_dim {
            for j in 0..dim {
                matrix.set(i, j, flat[i * dim + j]);
            }
        }
        Transform::RandomProjection { matrix }
    }

    pub fn fit_standardize(train: &Matrix) -> Transform {
        let means = train.column_means();
        let n = train.rows() as f64;
        let mut vars = vec![0.0; train.cols()];
        for row in train.row_iter() {
            for (v, (&x, &m)) in vars.iter_mut().zip(row.iter().zip(&means)) {
                *v += (x - m) * (x - m);
            }
        }
        let stds = vars
            .iter()
            .map(|v| (v / n).sqrt().max(1e-12))
            .collect();
        Transform::Standardize { means, stds }
    }

    /// Components are capped at the input dimensionality.
    pub fn fit_pca(train: &Matrix, n_components: usize, whiten: bool) -> Transform {
        let m = n_components.min(train.cols()).max(1);
        let means = train.column_means();
        let (values, vectors) = symmetric_eigen(&train.covariance());
        let mut components = Matrix::zeros(train.cols(), m);
        for i in 0..train.cols() {
            for j in 0..m {
                components.set(i, j, vectors.get(i, j));
            }
        }
        let scales = whiten.then(|| values[..m].iter().map(|l| l.max(1e-12).sqrt()).collect());
        Transform::Pca {
            means,
            components,
            scales,
        }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        match self {
            Transform::Raw => x.clone(),
            Transform::Polynomial { degree } => {
                if *degree == 1 {
                    return x.clone();
                }
                let d = x.cols();
                let mut rows = Vec::with_capacity(x.rows());
                for row in x.row_iter() {
                    let mut out = row.to_vec();
                    for i in 0..d {
                        for j in i..d {
                            out.push(row[i] * row[j]);
                        }
                    }
                    rows.push(out);
                }
                Matrix::from_rows(rows)
            }
            Transform::RandomProjection { matrix } => x.matmul(matrix),
            Transform::Standardize { means, stds } => {
                let mut out = x.clone();
                for i in 0..x.rows() {
                    for j in 0..x.cols() {
                        out.set(i, j, (x.get(i, j) - means[j]) / stds[j]);
                    }
                }
                out
            }
            Transform::Pca {
                means,
                components,
                scales,
            } => {
                let mut centered = x.clone();
                for i in 0..x.rows() {
                    for j in 0..x.cols() {
                        centered.set(i, j, x.get(i, j) - means[j]);
                    }
                }
                let mut projected = centered.matmul(components);
                if let Some(scales) = scales {
                    for i in 0..projected.rows() {
                        for j in 0..projected.cols() {
                            projected.set(i, j, projected.get(i, j) / scales[j]);
                        }
                    }
                }
                projected
            }
        }
    }

    /// Output dimensionality for a given input dimensionality.
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            Transform::Raw => input_dim,
            Transform::Polynomial { degree } => {
                if *degree == 1 {
                    input_dim
                } else {
                    input_dim + input_dim * (input_dim + 1) / 2
                }
            }
            Transform::RandomProjection { matrix } => matrix.cols(),
            Transform::Standardize { .. } => input_dim,
            Transform::Pca { components, .. } => components.cols(),
        }
    }
}

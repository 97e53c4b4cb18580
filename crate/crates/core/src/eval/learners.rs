//! The two mini-pipeline learners. Both emit add-1-smoothed class
//! probabilities so cross-entropy is always finite.

use super::matrix::Matrix;
use super::EvalError;

#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    Knn {
        k: usize,
        train: Matrix,
        labels: Vec<usize>,
        class_count: usize,
    },
    Tree {
        root: Node,
        class_count: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        probs: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

fn smoothed_probs(counts: &[usize], total: usize) -> Vec<f64> {
    let c = counts.len();
    counts
        .iter()
        .map(|&n| (n + 1) as f64 / (total + c) as f64)
        .collect()
}

impl Learner {
    pub fn fit_knn(
        train: &Matrix,
        labels: &[usize],
        class_count: usize,
        k: usize,
    ) -> Result<Learner, EvalError> {
        if k == 0 || k > train.rows() {
            return Err(EvalError::Pipeline(format!(
                "knn k={k} outside 1..={} training samples",
                train.rows()
            )));
        }
        Ok(Learner::Knn {
            k,
            train: train.clone(),
            labels: labels.to_vec(),
            class_count,
        })
    }

    pub fn fit_tree(
        train: &Matrix,
        labels: &[usize],
        class_count: usize,
        max_depth: usize,
        min_samples_leaf: usize,
    ) -> Result<Learner, EvalError> {
        if max_depth == 0 {
            return Err(EvalError::Pipeline("tree max_depth must be >= 1".to_string()));
        }
        if min_samples_leaf == 0 {
            return Err(EvalError::Pipeline(
                "tree min_samples_leaf must be >= 1".to_string(),
            ));
        }
        let indices: Vec<usize> = (0..train.rows()).collect();
        let root = build_node(
            train,
            labels,
            class_count,
            &indices,
            max_depth,
            min_samples_leaf,
        );
        Ok(Learner::Tree { root, class_count })
    }

    pub fn predict_proba(&self, x: &Matrix) -> Matrix {
        match self {
            Learner::Knn {
                k,
                train,
                labels,
                class_count,
            } => {
                let mut out = Matrix::zeros(x.rows(), *class_count);
                for (qi, query) in x.row_iter().enumerate() {
                    // Nearest neighbors, ties broken by training index.
                    let mut dists: Vec<(f64, usize)> = train
                        .row_iter()
                        .enumerate()
                        .map(|(ti, row)| {
                            let d2: f64 = row
                                .iter()
                                .zip(query)
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum();
                            (d2, ti)
                        })
                        .collect();
                    dists.sort_by(|a, b| {
                        a.0.partial_cmp(&b.0)
                            .expect("distances are finite")
                            .then(a.1.cmp(&b.1))
                    });
                    let mut counts = vec![0usize; *class_count];
                    for &(_, ti) in dists.iter().take(*k) {
                        counts[labels[ti]] += 1;
                    }
                    for (c, p) in smoothed_probs(&counts, *k).into_iter().enumerate() {
                        out.set(qi, c, p);
                    }
                }
                out
            }
            Learner::Tree { root, class_count } => {
                let mut out = Matrix::zeros(x.rows(), *class_count);
                for (qi, query) in x.row_iter().enumerate() {
                    let mut node = root;
                    loop {
                        match node {
                            Node::Leaf { probs } => {
                                for (c, &p) in probs.iter().enumerate() {
                                    out.set(qi, c, p);
                                }
                                break;
                            }
                            Node::Split {
                                feature,
                                threshold,
                                left,
                                right,
                            } => {
                                node = if query[*feature] <= *threshold {
                                    left
                                } else {
                                    right
                                };
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let mut g = 1.0;
    for &n in counts {
        let p = n as f64 / total as f64;
        g -= p * p;
    }
    g
}

fn class_counts(labels: &[usize], class_count: usize, indices: &[usize]) -> Vec<usize> {
    let mut counts = vec![0usize; class_count];
    for &i in indices {
        counts[labels[i]] += 1;
    }
    counts
}

/// Greedy Gini split over midpoints of sorted unique feature values; ties
/// resolved toward the lowest feature index, then the lowest threshold.
fn build_node(
    x: &Matrix,
    labels: &[usize],
    class_count: usize,
    indices: &[usize],
    depth_left: usize,
    min_samples_leaf: usize,
) -> Node {
    let counts = class_counts(labels, class_count, indices);
    let parent_gini = gini(&counts, indices.len());
    let leaf = || Node::Leaf {
        probs: smoothed_probs(&counts, indices.len()),
    };
    if depth_left == 0 || parent_gini == 0.0 || indices.len() < 2 * min_samples_leaf {
        return leaf();
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for feature in 0..x.cols() {
        let mut values: Vec<f64> = indices.iter().map(|&i| x.get(i, feature)).collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("features are finite"));
        values.dedup();
        for pair in values.windows(2) {
            let threshold = 0.5 * (pair[0] + pair[1]);
            let left: Vec<usize> = indices
                .iter()
                .copied()
                .filter(|&i| x.get(i, feature) <= threshold)
                .collect();
            if left.len() < min_samples_leaf || indices.len() - left.len() < min_samples_leaf {
                continue;
            }
            let left_counts = class_counts(labels, class_count, &left);
            let right_counts: Vec<usize> = counts
                .iter()
                .zip(&left_counts)
                .map(|(&t, &l)| t - l)
                .collect();
            let n_left = left.len();
            let n_right = indices.len() - n_left;
            let weighted = (n_left as f64 * gini(&left_counts, n_left)
                + n_right as f64 * gini(&right_counts, n_right))
                / indices.len() as f64;
            let better = match best {
                None => weighted < parent_gini - 1e-12,
                Some((w, _, _)) => weighted < w - 1e-12,
            };
            if better {
                best = Some((weighted, feature, threshold));
            }
        }
    }
    match best {
        None => leaf(),
        Some((_, feature, threshold)) => {
            let left: Vec<usize> = indices
                .iter()
                .copied()
                .filter(|&i| x.get(i, feature) <= threshold)
                .collect();
            let right: Vec<usize> = indices
                .iter()
                .copied()
                .filter(|&i| x.get(i, feature) > threshold)
                .collect();
            Node::Split {
                feature,
                threshold,
                left: Box::new(build_node(
                    x,
                    labels,
                    class_count,
                    &left,
                    depth_left - 1,
                    min_samples_leaf,
                )),
                right: Box::new(build_node(
                    x,
                    labels,
                    class_count,
                    &right,
                    depth_left - 1,
                    min_samples_leaf,
                )),
            }
        }
    }
}

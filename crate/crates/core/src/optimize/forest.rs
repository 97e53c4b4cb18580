//! Bootstrap random-forest regressor over encoded configurations.
//!
//! Encoded features take few distinct values (algorithm indices, scaled
//! domain positions, the inactive sentinel), so fitting buckets each feature
//! by its sorted distinct values and scans bucket statistics instead of
//! sorting samples at every node. Split thresholds are midpoints between
//! adjacent bucket values, so prediction walks plain float comparisons.

use crate::rng::Rng;

use super::OptError;

pub struct SurrogateModel {
    width: usize,
    n_train: usize,
    trees: Vec<Tree>,
}

struct Tree {
    nodes: Vec<Node>,
}

enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

impl SurrogateModel {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn train_count(&self) -> usize {
        self.n_train
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// Mean and population variance of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64), OptError> {
        if x.len() != self.width {
            return Err(OptError::WidthMismatch {
                expected: self.width,
                got: x.len(),
            });
        }
        let n = self.trees.len() as f64;
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        // Agreeing trees mean an exactly degenerate belief; summation noise
        // must not manufacture fake variance or shift the constant.
        if preds.iter().all(|p| *p == preds[0]) {
            return Ok((preds[0], 0.0));
        }
        let mean = preds.iter().sum::<f64>() / n;
        let variance = preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
        Ok((mean, variance))
    }
}

/// Fits a forest of `n_trees` regression trees, each on a bootstrap sample,
/// splitting on random feature subsets of size ceil(sqrt(width)).
pub fn fit_surrogate(
    samples: &[(Vec<f64>, f64)],
    n_trees: usize,
    seed: u64,
) -> Result<SurrogateModel, OptError> {
    if samples.len() < 2 {
        return Err(OptError::TooFewTrials(samples.len()));
    }
    let width = samples[0].0.len();
    for (x, _) in samples {
        if x.len() != width {
            return Err(OptError::WidthMismatch {
                expected: width,
                got: x.len(),
            });
        }
    }
    assert!(n_trees >= 1, "forest needs at least one tree");

    let n = samples.len();
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(width);
    for f in 0..width {
        let mut column: Vec<f64> = samples.iter().map(|(x, _)| x[f]).collect();
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite encoding"));
        column.dedup();
        assert!(column.len() <= u16::MAX as usize, "too many feature levels");
        levels.push(column);
    }
    // Column-major bucket ids: cols[f][i] = rank of sample i's value.
    let cols: Vec<Vec<u16>> = (0..width)
        .map(|f| {
            samples
                .iter()
                .map(|(x, _)| {
                    levels[f]
                        .binary_search_by(|v| v.partial_cmp(&x[f]).expect("finite"))
                        .expect("value came from this column") as u16
                })
                .collect()
        })
        .collect();
    let y: Vec<f64> = samples.iter().map(|(_, loss)| *loss).collect();

    let mtry = ((width as f64).sqrt().ceil() as usize).clamp(1, width);
    let max_levels = levels.iter().map(Vec::len).max().unwrap_or(1);
    let mut rng = Rng::seed_from_u64(seed);
    let mut fitter = Fitter {
        cols: &cols,
        y: &y,
        levels: &levels,
        mtry,
        features: (0..width as u32).collect(),
        bucket_count: vec![0; max_levels],
        bucket_sum: vec![0.0; max_levels],
        nodes: Vec::new(),
    };

    let mut trees = Vec::with_capacity(n_trees);
    let mut idx = vec![0u32; n];
    for _ in 0..n_trees {
        for slot in idx.iter_mut() {
            *slot = rng.next_below(n as u64) as u32;
        }
        fitter.nodes = Vec::new();
        fitter.build(&mut idx, &mut rng);
        trees.push(Tree {
            nodes: std::mem::take(&mut fitter.nodes),
        });
    }

    Ok(SurrogateModel {
        width,
        n_train: n,
        trees,
    })
}

struct Fitter<'a> {
    cols: &'a [Vec<u16>],
    y: &'a [f64],
    levels: &'a [Vec<f64>],
    mtry: usize,
    features: Vec<u32>,
    bucket_count: Vec<u32>,
    bucket_sum: Vec<f64>,
    nodes: Vec<Node>,
}

impl Fitter<'_> {
    /// Builds the subtree over `idx` (in-place partitioned) and returns its
    /// node index.
    fn build(&mut self, idx: &mut [u32], rng: &mut Rng) -> u32 {
        let n = idx.len() as f64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut constant = true;
        for &i in idx.iter() {
            let v = self.y[i as usize];
            sum += v;
            sumsq += v * v;
            constant &= v == self.y[idx[0] as usize];
        }
        let node_id = self.nodes.len() as u32;
        if constant {
            let value = self.y[idx[0] as usize];
            self.nodes.push(Node::Leaf { value });
            return node_id;
        }
        let mean = sum / n;
        if idx.len() < 2 || sumsq - sum * sum / n <= 1e-18 {
            self.nodes.push(Node::Leaf { value: mean });
            return node_id;
        }

        rng.partial_shuffle(&mut self.features, self.mtry);
        let mut chosen: Vec<u32> = self.features[..self.mtry].to_vec();
        chosen.sort_unstable();

        // Minimizing split SSE is maximizing sum_l^2/n_l + sum_r^2/n_r.
        let base = sum * sum / n;
        let mut best: Option<(u32, usize, f64)> = None;
        for &f in &chosen {
            let nlev = self.levels[f as usize].len();
            if nlev < 2 {
                continue;
            }
            self.bucket_count[..nlev].fill(0);
            self.bucket_sum[..nlev].fill(0.0);
            let col = &self.cols[f as usize];
            for &i in idx.iter() {
                let b = col[i as usize] as usize;
                self.bucket_count[b] += 1;
                self.bucket_sum[b] += self.y[i as usize];
            }
            let mut n_left = 0u32;
            let mut sum_left = 0.0;
            for cut in 0..nlev - 1 {
                n_left += self.bucket_count[cut];
                sum_left += self.bucket_sum[cut];
                if n_left == 0 {
                    continue;
                }
                if n_left as usize == idx.len() {
                    break;
                }
                let n_right = idx.len() as f64 - n_left as f64;
                let sum_right = sum - sum_left;
                let score = sum_left * sum_left / n_left as f64 + sum_right * sum_right / n_right;
                let improves = match best {
                    Some((_, _, s)) => score > s,
                    None => score > base + 1e-12,
                };
                if improves {
                    best = Some((f, cut, score));
                }
            }
        }

        let Some((feature, cut, _)) = best else {
            self.nodes.push(Node::Leaf { value: mean });
            return node_id;
        };

        let col = &self.cols[feature as usize];
        let mut split_at = 0usize;
        for i in 0..idx.len() {
            if col[idx[i] as usize] as usize <= cut {
                idx.swap(i, split_at);
                split_at += 1;
            }
        }
        let lv = &self.levels[feature as usize];
        let threshold = (lv[cut] + lv[cut + 1]) / 2.0;

        self.nodes.push(Node::Leaf { value: mean });
        let (left_idx, right_idx) = idx.split_at_mut(split_at);
        let left = self.build(left_idx, rng);
        let right = self.build(right_idx, rng);
        self.nodes[node_id as usize] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        node_id
    }
}

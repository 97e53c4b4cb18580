//! Brute-force oracles used by the test suites.
//!
//! Everything here is a deliberately naive second implementation: the space
//! document is re-parsed with plain `serde_json`, configurations are
//! enumerated with nested loops, and error contributions are exhaustive
//! minimizations over a loss function. Nothing in this crate calls into the
//! engine, so agreement between the two is meaningful evidence.

use std::collections::HashMap;

/// Minimal mirror of a configuration space.
pub struct OracleSpace {
    pub name: String,
    pub steps: Vec<OracleStep>,
}

pub struct OracleStep {
    pub name: String,
    pub algorithms: Vec<OracleAlgorithm>,
}

pub struct OracleAlgorithm {
    pub name: String,
    /// (name, canonical value literals)
    pub hyperparameters: Vec<(String, Vec<String>)>,
}

/// One enumerated configuration: algorithm index per step plus the chosen
/// value literal per active hyperparameter.
#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub algos: Vec<usize>,
    /// (step index, hp name, value literal) in step then declaration order.
    pub assignments: Vec<(usize, String, String)>,
}

impl OracleSpace {
    pub fn parse(text: &str) -> OracleSpace {
        let doc: serde_json::Value = serde_json::from_str(text).expect("oracle: valid JSON");
        let steps = doc["steps"]
            .as_array()
            .expect("oracle: steps array")
            .iter()
            .map(|s| OracleStep {
                name: s["name"].as_str().unwrap().to_string(),
                algorithms: s["algorithms"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|a| OracleAlgorithm {
                        name: a["name"].as_str().unwrap().to_string(),
                        hyperparameters: a
                            .get("hyperparameters")
                            .and_then(|h| h.as_array())
                            .map(|hps| {
                                hps.iter()
                                    .map(|hp| {
                                        (
                                            hp["name"].as_str().unwrap().to_string(),
                                            hp["values"]
                                                .as_array()
                                                .unwrap()
                                                .iter()
                                                .map(literal)
                                                .collect(),
                                        )
                                    })
                                    .collect()
                            })
                            .unwrap_or_default(),
                    })
                    .collect(),
            })
            .collect();
        OracleSpace {
            name: doc["name"].as_str().unwrap_or_default().to_string(),
            steps,
        }
    }

    /// All paths, first step's algorithm varying slowest.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        let mut paths = vec![Vec::new()];
        for step in &self.steps {
            let mut next = Vec::new();
            for prefix in &paths {
                for a in 0..step.algorithms.len() {
                    let mut p = prefix.clone();
                    p.push(a);
                    next.push(p);
                }
            }
            paths = next;
        }
        paths
    }

    /// Every configuration on one path, last hyperparameter varying fastest.
    pub fn configs_on_path(&self, path: &[usize]) -> Vec<OracleConfig> {
        let mut configs = vec![OracleConfig {
            algos: path.to_vec(),
            assignments: Vec::new(),
        }];
        for (s, &a) in path.iter().enumerate() {
            for (hp_name, values) in &self.steps[s].algorithms[a].hyperparameters {
                let mut next = Vec::new();
                for c in &configs {
                    for v in values {
                        let mut c2 = c.clone();
                        c2.assignments.push((s, hp_name.clone(), v.clone()));
                        next.push(c2);
                    }
                }
                configs = next;
            }
        }
        configs
    }

    /// Every configuration of the space in path order.
    pub fn all_configs(&self) -> Vec<OracleConfig> {
        self.paths()
            .iter()
            .flat_map(|p| self.configs_on_path(p))
            .collect()
    }

    pub fn canonical_id(&self, config: &OracleConfig) -> String {
        let mut segments = Vec::new();
        for (s, step) in self.steps.iter().enumerate() {
            let algo = &step.algorithms[config.algos[s]];
            let mut seg = format!("{}={}", step.name, algo.name);
            if !algo.hyperparameters.is_empty() {
                let args: Vec<String> = config
                    .assignments
                    .iter()
                    .filter(|(step_idx, _, _)| *step_idx == s)
                    .map(|(_, name, value)| format!("{name}={value}"))
                    .collect();
                seg.push('(');
                seg.push_str(&args.join(","));
                seg.push(')');
            }
            segments.push(seg);
        }
        segments.join("|")
    }

    pub fn path_id(&self, path: &[usize]) -> String {
        path.iter()
            .enumerate()
            .map(|(s, &a)| self.steps[s].algorithms[a].name.as_str())
            .collect::<Vec<_>>()
            .join("->")
    }
}

fn literal(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Bool(b) => b.to_string(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.to_string()
            } else {
                n.as_f64().unwrap().to_string()
            }
        }
        serde_json::Value::String(s) => s.clone(),
        other => panic!("oracle: unsupported domain value {other}"),
    }
}

/// Loss lookup by canonical configuration id.
pub type LossTable = HashMap<String, f64>;

fn min_loss<'a>(
    space: &OracleSpace,
    configs: impl IntoIterator<Item = &'a OracleConfig>,
    loss: &LossTable,
) -> f64 {
    configs
        .into_iter()
        .map(|c| loss[&space.canonical_id(c)])
        .fold(f64::INFINITY, f64::min)
}

/// Global minimum over the whole space.
pub fn oracle_global_min(space: &OracleSpace, loss: &LossTable) -> f64 {
    min_loss(space, &space.all_configs(), loss)
}

/// Minimum over one path.
pub fn oracle_path_min(space: &OracleSpace, path: &[usize], loss: &LossTable) -> f64 {
    min_loss(space, &space.configs_on_path(path), loss)
}

/// Error contribution of a step: mean over its algorithms of the whole-space
/// minimum with that algorithm pinned, minus the global minimum.
pub fn oracle_ec_step(space: &OracleSpace, step: usize, loss: &LossTable) -> f64 {
    let all = space.all_configs();
    let mut constrained = Vec::new();
    for a in 0..space.steps[step].algorithms.len() {
        let subset: Vec<&OracleConfig> = all.iter().filter(|c| c.algos[step] == a).collect();
        constrained.push(min_loss(space, subset, loss));
    }
    mean(&constrained) - oracle_global_min(space, loss)
}

/// Error contribution of the algorithm at `step` on `path`: mean over its
/// hyperparameter configurations of the path minimum with that configuration
/// pinned, minus the path minimum.
pub fn oracle_ec_algorithm(
    space: &OracleSpace,
    path: &[usize],
    step: usize,
    loss: &LossTable,
) -> f64 {
    let configs = space.configs_on_path(path);
    let algo = &space.steps[step].algorithms[path[step]];
    // Enumerate the algorithm's own hyperparameter configurations.
    let mut own: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (hp_name, values) in &algo.hyperparameters {
        let mut next = Vec::new();
        for prefix in &own {
            for v in values {
                let mut p = prefix.clone();
                p.push((hp_name.clone(), v.clone()));
                next.push(p);
            }
        }
        own = next;
    }
    let mut constrained = Vec::new();
    for pins in &own {
        let subset: Vec<&OracleConfig> = configs
            .iter()
            .filter(|c| {
                pins.iter().all(|(name, value)| {
                    c.assignments
                        .iter()
                        .any(|(s, n, v)| *s == step && n == name && v == value)
                })
            })
            .collect();
        constrained.push(min_loss(space, subset, loss));
    }
    mean(&constrained) - oracle_path_min(space, path, loss)
}

/// Error contribution of one hyperparameter on `path`: mean over its values
/// of the path minimum with that value pinned, minus the path minimum.
pub fn oracle_ec_hyperparameter(
    space: &OracleSpace,
    path: &[usize],
    step: usize,
    hp_name: &str,
    loss: &LossTable,
) -> f64 {
    let configs = space.configs_on_path(path);
    let (_, values) = space.steps[step].algorithms[path[step]]
        .hyperparameters
        .iter()
        .find(|(n, _)| n == hp_name)
        .expect("oracle: hyperparameter exists");
    let mut constrained = Vec::new();
    for value in values {
        let subset: Vec<&OracleConfig> = configs
            .iter()
            .filter(|c| {
                c.assignments
                    .iter()
                    .any(|(s, n, v)| *s == step && n == hp_name && v == value)
            })
            .collect();
        constrained.push(min_loss(space, subset, loss));
    }
    mean(&constrained) - oracle_path_min(space, path, loss)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation, matching the report aggregation.
pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

//! Space-definition document parsing and validation.

use serde::Deserialize;

use super::{AlgorithmSpec, ConfigSpace, DomainKind, Hyperparameter, SpaceError, Step, Value};

#[derive(Deserialize)]
struct RawSpace {
    name: String,
    steps: Vec<RawStep>,
}

#[derive(Deserialize)]
struct RawStep {
    name: String,
    algorithms: Vec<RawAlgorithm>,
}

#[derive(Deserialize)]
struct RawAlgorithm {
    name: String,
    #[serde(default)]
    hyperparameters: Vec<RawHyperparameter>,
}

#[derive(Deserialize)]
struct RawHyperparameter {
    name: String,
    #[serde(rename = "type")]
    kind: String,
    values: Vec<serde_json::Value>,
}

pub(super) fn parse_document(text: &str) -> Result<ConfigSpace, SpaceError> {
    let raw: RawSpace =
        serde_json::from_str(text).map_err(|e| SpaceError::Malformed(e.to_string()))?;
    let mut steps = Vec::with_capacity(raw.steps.len());
    for raw_step in raw.steps {
        let mut algorithms = Vec::with_capacity(raw_step.algorithms.len());
        for raw_algo in raw_step.algorithms {
            let mut hyperparameters = Vec::with_capacity(raw_algo.hyperparameters.len());
            for raw_hp in raw_algo.hyperparameters {
                let location = format!(
                    "step '{}' / algorithm '{}' / hyperparameter '{}'",
                    raw_step.name, raw_algo.name, raw_hp.name
                );
                let kind = match raw_hp.kind.as_str() {
                    "int" => DomainKind::Int,
                    "float" => DomainKind::Float,
                    "bool" => DomainKind::Bool,
                    "categorical" => DomainKind::Categorical,
                    other => {
                        return Err(SpaceError::UnknownDomainKind {
                            location,
                            kind: other.to_string(),
                        })
                    }
                };
                let mut values = Vec::with_capacity(raw_hp.values.len());
                for v in raw_hp.values {
                    values.push(convert_value(&location, kind, v)?);
                }
                hyperparameters.push(Hyperparameter {
                    name: raw_hp.name,
                    kind,
                    values,
                });
            }
            algorithms.push(AlgorithmSpec {
                name: raw_algo.name,
                hyperparameters,
            });
        }
        steps.push(Step {
            name: raw_step.name,
            algorithms,
        });
    }
    ConfigSpace::new(raw.name, steps)
}

fn convert_value(
    location: &str,
    kind: DomainKind,
    v: serde_json::Value,
) -> Result<Value, SpaceError> {
    let bad = |v: &serde_json::Value| SpaceError::BadDomainValue {
        location: location.to_string(),
        value: v.to_string(),
        kind: kind.as_str().to_string(),
    };
    match kind {
        DomainKind::Int => v.as_i64().map(Value::Int).ok_or_else(|| bad(&v)),
        DomainKind::Float => v.as_f64().map(Value::Float).ok_or_else(|| bad(&v)),
        DomainKind::Bool => v.as_bool().map(Value::Bool).ok_or_else(|| bad(&v)),
        DomainKind::Categorical => match v {
            serde_json::Value::String(s) => Ok(Value::Cat(s)),
            other => Err(bad(&other)),
        },
    }
}

/// Names appearing in canonical ids; the grammar's separators are excluded.
fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | '+'))
}

pub(super) fn validate(space: &ConfigSpace) -> Result<(), SpaceError> {
    if !valid_name(space.name()) {
        return Err(SpaceError::InvalidName {
            location: "space".to_string(),
            name: space.name().to_string(),
        });
    }
    if space.steps().is_empty() {
        return Err(SpaceError::NoSteps(space.name().to_string()));
    }
    let mut step_names = Vec::new();
    for step in space.steps() {
        let step_loc = format!("step '{}'", step.name);
        if !valid_name(&step.name) {
            return Err(SpaceError::InvalidName {
                location: "space".to_string(),
                name: step.name.clone(),
            });
        }
        if step_names.contains(&&step.name) {
            return Err(SpaceError::DuplicateName {
                location: "space".to_string(),
                name: step.name.clone(),
            });
        }
        step_names.push(&step.name);
        if step.algorithms.is_empty() {
            return Err(SpaceError::NoAlgorithms(step.name.clone()));
        }
        let mut algo_names = Vec::new();
        for algo in &step.algorithms {
            let algo_loc = format!("{step_loc} / algorithm '{}'", algo.name);
            if !valid_name(&algo.name) {
                return Err(SpaceError::InvalidName {
                    location: step_loc.clone(),
                    name: algo.name.clone(),
                });
            }
            if algo_names.contains(&&algo.name) {
                return Err(SpaceError::DuplicateName {
                    location: step_loc.clone(),
                    name: algo.name.clone(),
                });
            }
            algo_names.push(&algo.name);
            let mut hp_names = Vec::new();
            for hp in &algo.hyperparameters {
                let hp_loc = format!("{algo_loc} / hyperparameter '{}'", hp.name);
                if !valid_name(&hp.name) {
                    return Err(SpaceError::InvalidName {
                        location: algo_loc.clone(),
                        name: hp.name.clone(),
                    });
                }
                if hp_names.contains(&&hp.name) {
                    return Err(SpaceError::DuplicateName {
                        location: algo_loc.clone(),
                        name: hp.name.clone(),
                    });
                }
                hp_names.push(&hp.name);
                if hp.values.is_empty() {
                    return Err(SpaceError::EmptyDomain { location: hp_loc });
                }
                let mut literals = Vec::new();
                for value in &hp.values {
                    if let Value::Cat(s) = value {
                        if !valid_name(s) {
                            return Err(SpaceError::InvalidName {
                                location: hp_loc.clone(),
                                name: s.clone(),
                            });
                        }
                    }
                    let lit = value.to_string();
                    if literals.contains(&lit) {
                        return Err(SpaceError::DuplicateDomainValue {
                            location: hp_loc,
                            value: lit,
                        });
                    }
                    literals.push(lit);
                }
            }
        }
    }
    // Forces the whole-space count through checked arithmetic once so later
    // u64 math cannot overflow.
    let mut total = 1u64;
    for step in space.steps() {
        let mut per_step = 0u64;
        for algo in &step.algorithms {
            let mut count = 1u64;
            for hp in &algo.hyperparameters {
                count = count
                    .checked_mul(hp.domain_size() as u64)
                    .ok_or(SpaceError::TooLarge)?;
            }
            per_step = per_step.checked_add(count).ok_or(SpaceError::TooLarge)?;
        }
        total = total.checked_mul(per_step).ok_or(SpaceError::TooLarge)?;
    }
    Ok(())
}

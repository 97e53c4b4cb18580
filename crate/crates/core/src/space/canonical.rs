//! Canonical configuration ids.
//!
//! Grammar: one `step=algo` segment per step in step order, joined by `|`;
//! an algorithm with hyperparameters appends `(hp=value,...)` in declaration
//! order. Parameterless algorithms take no parentheses. Ids are unique
//! across a space and total-ordered by plain string comparison, which is the
//! tie-break order used everywhere an argmin needs one.

use super::{ConfigSpace, Configuration, Path, SpaceError};

pub(super) fn format_id(space: &ConfigSpace, config: &Configuration) -> String {
    let path = config.path();
    let active = space.active_hps(&path);
    let mut out = String::new();
    let mut pos = 0;
    for (s, step) in space.steps().iter().enumerate() {
        if s > 0 {
            out.push('|');
        }
        let algo = space.algorithm_on(&path, s);
        out.push_str(&step.name);
        out.push('=');
        out.push_str(&algo.name);
        if !algo.hyperparameters.is_empty() {
            out.push('(');
            for (h, hp) in algo.hyperparameters.iter().enumerate() {
                if h > 0 {
                    out.push(',');
                }
                debug_assert_eq!(active[pos].step, s);
                out.push_str(&hp.name);
                out.push('=');
                out.push_str(&hp.values[config.value_indices()[pos]].to_string());
                pos += 1;
            }
            out.push(')');
        }
    }
    out
}

pub(super) fn parse_id(space: &ConfigSpace, id: &str) -> Result<Configuration, SpaceError> {
    let bad = |reason: &str| SpaceError::BadConfigId {
        id: id.to_string(),
        reason: reason.to_string(),
    };
    let segments: Vec<&str> = id.split('|').collect();
    if segments.len() != space.steps().len() {
        return Err(bad("segment count does not match step count"));
    }
    let mut algos = Vec::with_capacity(segments.len());
    let mut values = Vec::new();
    for (s, segment) in segments.iter().enumerate() {
        let step = &space.steps()[s];
        let (head, args) = match segment.find('(') {
            Some(open) => {
                let Some(inner) = segment[open + 1..].strip_suffix(')') else {
                    return Err(bad("unbalanced parentheses"));
                };
                (&segment[..open], Some(inner))
            }
            None => (*segment, None),
        };
        let Some((step_name, algo_name)) = head.split_once('=') else {
            return Err(bad("segment is not step=algo"));
        };
        if step_name != step.name {
            return Err(bad(&format!(
                "expected step '{}', found '{step_name}'",
                step.name
            )));
        }
        let Some((algo_idx, algo)) = step.algorithm(algo_name) else {
            return Err(SpaceError::UnknownAlgorithm {
                step: step.name.clone(),
                algo: algo_name.to_string(),
            });
        };
        algos.push(algo_idx);
        let assignments: Vec<&str> = match args {
            Some("") => return Err(bad("empty parentheses")),
            Some(inner) => inner.split(',').collect(),
            None => Vec::new(),
        };
        if assignments.len() != algo.hyperparameters.len() {
            return Err(bad(&format!(
                "algorithm '{}' takes {} assignments, found {}",
                algo.name,
                algo.hyperparameters.len(),
                assignments.len()
            )));
        }
        for (h, hp) in algo.hyperparameters.iter().enumerate() {
            let Some((hp_name, literal)) = assignments[h].split_once('=') else {
                return Err(bad("assignment is not hp=value"));
            };
            if hp_name != hp.name {
                return Err(bad(&format!(
                    "expected hyperparameter '{}', found '{hp_name}'",
                    hp.name
                )));
            }
            let Some(value_idx) = hp.value_index(literal) else {
                return Err(SpaceError::ValueNotInDomain {
                    hp: hp.name.clone(),
                    value: literal.to_string(),
                });
            };
            values.push(value_idx);
        }
    }
    let path = Path::from_indices(space, algos)?;
    Configuration::new(space, path, values)
}

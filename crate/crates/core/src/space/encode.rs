//! Fixed-width numeric encoding of configurations for surrogate models.
//!
//! Layout: one slot per step holding the algorithm index, then one slot per
//! hyperparameter of every algorithm in declaration order. Active
//! hyperparameters map their domain index to [0,1] (singleton domains to
//! 0.0); hyperparameters of unchosen algorithms hold the sentinel -1. The
//! encoding is injective and [`decode`] inverts it exactly.

use super::{ConfigSpace, Configuration, Path, SpaceError};

pub const INACTIVE: f64 = -1.0;

/// Total slot count for `space`.
pub fn encoding_width(space: &ConfigSpace) -> usize {
    let hp_slots: usize = space
        .steps()
        .iter()
        .flat_map(|s| &s.algorithms)
        .map(|a| a.hyperparameters.len())
        .sum();
    space.steps().len() + hp_slots
}

/// Position of each hyperparameter in [0,1], aligned with the configuration's
/// active slots. Shared by the encoder and the synthetic loss surface.
pub fn unit_positions(space: &ConfigSpace, config: &Configuration) -> Vec<f64> {
    let path = config.path();
    space
        .active_hps(&path)
        .iter()
        .zip(config.value_indices())
        .map(|(slot, &v)| {
            let size = space.hyperparameter_at(&path, *slot).domain_size();
            if size == 1 {
                0.0
            } else {
                v as f64 / (size - 1) as f64
            }
        })
        .collect()
}

pub fn encode(space: &ConfigSpace, config: &Configuration) -> Vec<f64> {
    let mut out = Vec::with_capacity(encoding_width(space));
    for &a in config.algo_indices() {
        out.push(a as f64);
    }
    let path = config.path();
    let units = unit_positions(space, config);
    let mut active = 0usize;
    for (s, step) in space.steps().iter().enumerate() {
        for (a, algo) in step.algorithms.iter().enumerate() {
            for _ in &algo.hyperparameters {
                if path.algo_indices()[s] == a {
                    out.push(units[active]);
                    active += 1;
                } else {
                    out.push(INACTIVE);
                }
            }
        }
    }
    out
}

pub fn decode(space: &ConfigSpace, encoded: &[f64]) -> Result<Configuration, SpaceError> {
    if encoded.len() != encoding_width(space) {
        return Err(SpaceError::BadEncoding(format!(
            "expected {} slots, found {}",
            encoding_width(space),
            encoded.len()
        )));
    }
    let round_exact = |x: f64, limit: usize, what: &str| -> Result<usize, SpaceError> {
        let r = x.round();
        if (x - r).abs() > 1e-9 || r < 0.0 || r >= limit as f64 {
            return Err(SpaceError::BadEncoding(format!("{what} slot holds {x}")));
        }
        Ok(r as usize)
    };
    let n_steps = space.steps().len();
    let mut algos = Vec::with_capacity(n_steps);
    for (s, step) in space.steps().iter().enumerate() {
        algos.push(round_exact(
            encoded[s],
            step.algorithms.len(),
            &step.name,
        )?);
    }
    let path = Path::from_indices(space, algos.clone())?;
    let mut values = Vec::new();
    let mut slot = n_steps;
    for (s, step) in space.steps().iter().enumerate() {
        for (a, algo) in step.algorithms.iter().enumerate() {
            for hp in &algo.hyperparameters {
                let x = encoded[slot];
                slot += 1;
                if path.algo_indices()[s] != a {
                    if x != INACTIVE {
                        return Err(SpaceError::BadEncoding(format!(
                            "inactive slot for '{}' holds {x}",
                            hp.name
                        )));
                    }
                    continue;
                }
                let size = hp.domain_size();
                let idx = if size == 1 {
                    round_exact(x, 1, &hp.name)?
                } else {
                    round_exact(x * (size - 1) as f64, size, &hp.name)?
                };
                values.push(idx);
            }
        }
    }
    Configuration::new(space, path, values)
}

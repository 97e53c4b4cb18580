//! Deterministic synthetic loss surface.
//!
//! The surface is an analytic function of the configuration alone, so grid
//! search is an exact oracle for it. Per-step weights halve with step index,
//! making the first step dominate error contributions by construction. The
//! constants below are frozen; the README documents them as the surface's
//! definition.

use crate::rng::{fnv1a64, Rng};
use crate::space::{unit_positions, ConfigSpace, Configuration};

pub const BASE_LOSS: f64 = 0.1;

/// Per-(step, algorithm) bias, indexed by (7·step + 3·algo) mod 8.
pub const OFFSETS: [f64; 8] = [0.00, 0.55, 0.20, 0.85, 0.40, 0.70, 0.10, 0.95];

/// Ideal normalized hyperparameter positions, indexed by
/// (step + algo + hp) mod 4.
pub const TARGETS: [f64; 4] = [0.25, 0.75, 0.5, 0.0];

/// Spread term for algorithms without hyperparameters.
pub const NO_HP_SPREAD: f64 = 0.35;

#[derive(Debug, Clone)]
pub struct SyntheticSurface {
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticSurface {
    pub fn new(noise_std: f64, seed: u64) -> Self {
        Self { noise_std, seed }
    }

    /// loss = 0.1 + Σ_s 2^−(s+1) · (offset(s, algo) + spread(s, algo, hps)).
    pub fn evaluate(&self, space: &ConfigSpace, config: &Configuration) -> f64 {
        let path = config.path();
        let active = space.active_hps(&path);
        let units = unit_positions(space, config);
        let mut loss = BASE_LOSS;
        for (s, &j) in config.algo_indices().iter().enumerate() {
            let weight = 0.5f64.powi(s as i32 + 1);
            let offset = OFFSETS[(7 * s + 3 * j) % 8];
            let step_units: Vec<(usize, f64)> = active
                .iter()
                .zip(&units)
                .filter(|(slot, _)| slot.step == s)
                .map(|(slot, &u)| (slot.hp, u))
                .collect();
            let spread = if step_units.is_empty() {
                NO_HP_SPREAD
            } else {
                step_units
                    .iter()
                    .map(|&(h, u)| {
                        let target = TARGETS[(s + j + h) % 4];
                        (u - target) * (u - target)
                    })
                    .sum::<f64>()
                    / step_units.len() as f64
            };
            loss += weight * (offset + spread);
        }
        if self.noise_std > 0.0 {
            let id = space.canonical_id(config);
            let mut rng = Rng::seed_from_u64(self.seed ^ fnv1a64(id.as_bytes()));
            loss += self.noise_std * rng.next_normal_pair().0;
        }
        loss
    }
}

//! Search scopes: the region of a space an optimizer runs over or an
//! attribution constrains to.

use super::{ActiveHp, ConfigSpace, Configuration, Path, SpaceError};
use crate::rng::Rng;

/// A constrained region of a configuration space.
///
/// Scopes double as trial predicates: an optimizer enumerates or samples a
/// scope, and attribution asks a trial store for the best loss among trials
/// whose configuration the scope [`contains`](Scope::contains).
#[derive(Debug, Clone, PartialEq)]
pub enum Scope {
    /// Every configuration of the space.
    WholeSpace,
    /// Configurations whose path uses algorithm `algo` at step `step`;
    /// everything else varies.
    StepAlgorithm { step: usize, algo: usize },
    /// Every configuration on one path.
    OnPath(Path),
    /// Configurations on `path` with some active hyperparameters pinned.
    /// `fixed` aligns with [`ConfigSpace::active_hps`]; `None` slots vary.
    Constrained {
        path: Path,
        fixed: Vec<Option<usize>>,
    },
}

impl Scope {
    pub fn step_algorithm(
        space: &ConfigSpace,
        step_name: &str,
        algo_name: &str,
    ) -> Result<Self, SpaceError> {
        let (step, step_spec) = space
            .step(step_name)
            .ok_or_else(|| SpaceError::UnknownStep(step_name.to_string()))?;
        let (algo, _) =
            step_spec
                .algorithm(algo_name)
                .ok_or_else(|| SpaceError::UnknownAlgorithm {
                    step: step_name.to_string(),
                    algo: algo_name.to_string(),
                })?;
        Ok(Scope::StepAlgorithm { step, algo })
    }

    /// Varies the hyperparameters of the algorithm at `step` while pinning
    /// every other hyperparameter to `base`'s values. Counts |θ_ij|
    /// configurations: one per hyperparameter configuration of the
    /// algorithm.
    pub fn vary_algorithm(space: &ConfigSpace, base: &Configuration, step: usize) -> Self {
        let path = base.path();
        let fixed = space
            .active_hps(&path)
            .iter()
            .zip(base.value_indices())
            .map(|(slot, &v)| if slot.step == step { None } else { Some(v) })
            .collect();
        Scope::Constrained { path, fixed }
    }

    /// Varies a single hyperparameter while pinning everything else to
    /// `base`'s values. Counts |θ_ijk| configurations: the domain size.
    pub fn vary_hyperparameter(
        space: &ConfigSpace,
        base: &Configuration,
        target: ActiveHp,
    ) -> Self {
        let path = base.path();
        let fixed = space
            .active_hps(&path)
            .iter()
            .zip(base.value_indices())
            .map(|(slot, &v)| if *slot == target { None } else { Some(v) })
            .collect();
        Scope::Constrained { path, fixed }
    }

    /// Pins the hyperparameters of the algorithm at `step` to the domain
    /// indices in `values` (declaration order); the rest of the path varies.
    pub fn pin_algorithm(
        space: &ConfigSpace,
        path: Path,
        step: usize,
        values: &[usize],
    ) -> Self {
        let fixed = space
            .active_hps(&path)
            .iter()
            .map(|slot| {
                if slot.step == step {
                    Some(values[slot.hp])
                } else {
                    None
                }
            })
            .collect();
        Scope::Constrained { path, fixed }
    }

    /// Pins a single hyperparameter to one domain value; all other
    /// hyperparameters on the path vary.
    pub fn pin_hyperparameter(
        space: &ConfigSpace,
        path: Path,
        target: ActiveHp,
        value: usize,
    ) -> Self {
        let fixed = space
            .active_hps(&path)
            .iter()
            .map(|slot| if *slot == target { Some(value) } else { None })
            .collect();
        Scope::Constrained { path, fixed }
    }

    /// Pins the named hyperparameters on `path` to literal values; the rest
    /// vary.
    pub fn with_assignments(
        space: &ConfigSpace,
        path: Path,
        assignments: &[(&str, &str, &str)],
    ) -> Result<Self, SpaceError> {
        let active = space.active_hps(&path);
        let mut fixed: Vec<Option<usize>> = vec![None; active.len()];
        for &(step_name, hp_name, literal) in assignments {
            let (step_idx, _) = space
                .step(step_name)
                .ok_or_else(|| SpaceError::UnknownStep(step_name.to_string()))?;
            let algo = space.algorithm_on(&path, step_idx);
            let (hp_idx, hp) =
                algo.hyperparameter(hp_name)
                    .ok_or_else(|| SpaceError::UnknownHyperparameter {
                        algo: algo.name.clone(),
                        hp: hp_name.to_string(),
                    })?;
            let pos = active
                .iter()
                .position(|slot| slot.step == step_idx && slot.hp == hp_idx)
                .expect("active slot exists for path algorithm");
            let value_idx = hp
                .value_index(literal)
                .ok_or_else(|| SpaceError::ValueNotInDomain {
                    hp: hp.name.clone(),
                    value: literal.to_string(),
                })?;
            fixed[pos] = Some(value_idx);
        }
        Ok(Scope::Constrained { path, fixed })
    }

    /// Whether `config` lies inside this scope.
    pub fn contains(&self, config: &Configuration) -> bool {
        match self {
            Scope::WholeSpace => true,
            Scope::StepAlgorithm { step, algo } => config.algo_indices()[*step] == *algo,
            Scope::OnPath(path) => config.algo_indices() == path.algo_indices(),
            Scope::Constrained { path, fixed } => {
                config.algo_indices() == path.algo_indices()
                    && fixed
                        .iter()
                        .zip(config.value_indices())
                        .all(|(f, &v)| f.is_none() || *f == Some(v))
            }
        }
    }

    pub fn count(&self, space: &ConfigSpace) -> u64 {
        ScopeIndex::new(space, self).count()
    }

    /// All configurations in scope order: paths lexicographic, then the
    /// free-hyperparameter odometer with the last hyperparameter fastest.
    pub fn enumerate(&self, space: &ConfigSpace) -> Vec<Configuration> {
        let index = ScopeIndex::new(space, self);
        (0..index.count()).map(|i| index.config_at(i)).collect()
    }

    /// Human-readable label for logs.
    pub fn describe(&self, space: &ConfigSpace) -> String {
        match self {
            Scope::WholeSpace => "whole-space".to_string(),
            Scope::StepAlgorithm { step, algo } => {
                let step_spec = &space.steps()[*step];
                format!("{}={}", step_spec.name, step_spec.algorithms[*algo].name)
            }
            Scope::OnPath(path) => format!("path:{}", space.path_id(path)),
            Scope::Constrained { path, fixed } => {
                let active = space.active_hps(path);
                let pins: Vec<String> = active
                    .iter()
                    .zip(fixed)
                    .filter_map(|(slot, f)| {
                        f.map(|v| {
                            let hp = space.hyperparameter_at(path, *slot);
                            format!("{}={}", hp.name, hp.values[v])
                        })
                    })
                    .collect();
                format!("path:{}[{}]", space.path_id(path), pins.join(","))
            }
        }
    }
}

/// Random-access view of a scope: counting, unranking, uniform sampling.
pub struct ScopeIndex<'a> {
    space: &'a ConfigSpace,
    entries: Vec<Entry>,
    total: u64,
}

struct Entry {
    path: Path,
    fixed: Vec<Option<usize>>,
    count: u64,
    cum_before: u64,
}

impl<'a> ScopeIndex<'a> {
    pub fn new(space: &'a ConfigSpace, scope: &Scope) -> Self {
        let mut entries = Vec::new();
        let mut total = 0u64;
        let mut push = |path: Path, fixed: Vec<Option<usize>>| {
            let count = space
                .active_hps(&path)
                .iter()
                .zip(&fixed)
                .map(|(slot, f)| match f {
                    Some(_) => 1u64,
                    None => space.hyperparameter_at(&path, *slot).domain_size() as u64,
                })
                .product();
            entries.push(Entry {
                path,
                fixed,
                count,
                cum_before: total,
            });
            total += count;
        };
        match scope {
            Scope::WholeSpace => {
                for path in space.enumerate_paths() {
                    let free = vec![None; space.active_hps(&path).len()];
                    push(path, free);
                }
            }
            Scope::StepAlgorithm { step, algo } => {
                for path in space.enumerate_paths() {
                    if path.algo_indices()[*step] == *algo {
                        let free = vec![None; space.active_hps(&path).len()];
                        push(path, free);
                    }
                }
            }
            Scope::OnPath(path) => {
                let free = vec![None; space.active_hps(path).len()];
                push(path.clone(), free);
            }
            Scope::Constrained { path, fixed } => {
                push(path.clone(), fixed.clone());
            }
        }
        Self {
            space,
            entries,
            total,
        }
    }

    pub fn count(&self) -> u64 {
        self.total
    }

    /// The `index`th configuration in scope order.
    pub fn config_at(&self, index: u64) -> Configuration {
        assert!(index < self.total, "scope index out of range");
        let pos = self
            .entries
            .partition_point(|e| e.cum_before + e.count <= index);
        let entry = &self.entries[pos];
        let mut offset = index - entry.cum_before;
        let active = self.space.active_hps(&entry.path);
        let mut values = vec![0usize; active.len()];
        for i in (0..active.len()).rev() {
            match entry.fixed[i] {
                Some(v) => values[i] = v,
                None => {
                    let size = self.space.hyperparameter_at(&entry.path, active[i]).domain_size()
                        as u64;
                    values[i] = (offset % size) as usize;
                    offset /= size;
                }
            }
        }
        Configuration::from_parts_unchecked(entry.path.algo_indices().to_vec(), values)
    }

    /// Draws uniformly from the scope.
    pub fn sample(&self, rng: &mut Rng) -> Configuration {
        self.config_at(rng.next_below(self.total))
    }
}

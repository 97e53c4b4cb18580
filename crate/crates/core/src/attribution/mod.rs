//! Agnostic error-contribution attribution from trial stores.
//!
//! Every estimate has the same shape: a set of constrained minima (one per
//! algorithm of a step, per hyperparameter configuration of an algorithm,
//! or per domain value of a hyperparameter), averaged and compared against
//! a reference minimum. Filter mode answers each constrained minimum by
//! filtering recorded trials and treats missing coverage as an error that
//! names the gap; reopt mode launches one dedicated constrained optimizer
//! run per constraint and re-bases the reference to the minimum across the
//! unconstrained and constrained runs, which keeps estimates non-negative
//! under fresh sampling noise.


use std::fmt;
use std::str::FromStr;

use crate::eval::Evaluator;
use crate::optimize::{run_scoped, OptError, RunMode, RunSpec, SmboParams};
use crate::rng::fnv1a64;
use crate::space::{ConfigSpace, Path, Scope, SpaceError};
use crate::store::{OptimizerKind, RunSet, StoreError, TrialStore};

#[derive(Debug, thiserror::Error)]
pub enum AttrError {
    #[error("insufficient coverage for {target}: {detail}")]
    Coverage { target: String, detail: String },
    #[error("unknown step '{0}'")]
    UnknownStep(String),
    #[error("'{name}' is not on path {path}")]
    NotOnPath { name: String, path: String },
    #[error("'{name}' matches more than one target on path {path}")]
    Ambiguous { name: String, path: String },
    #[error("aggregate needs at least one estimate")]
    EmptyAggregate,
    #[error("aggregate inputs must share target and mode")]
    MixedAggregate,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Opt(#[from] OptError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ECMode {
    Filter,
    Reopt,
}

impl fmt::Display for ECMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ECMode::Filter => "filter",
            ECMode::Reopt => "reopt",
        })
    }
}

impl FromStr for ECMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "filter" => Ok(ECMode::Filter),
            "reopt" => Ok(ECMode::Reopt),
            other => Err(format!("unknown mode '{other}' (expected filter or reopt)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ECTarget {
    Step {
        step: String,
    },
    Algorithm {
        path: String,
        step: String,
        algo: String,
    },
    Hyperparameter {
        path: String,
        step: String,
        algo: String,
        hp: String,
    },
}

impl ECTarget {
    pub fn level(&self) -> &'static str {
        match self {
            ECTarget::Step { .. } => "step",
            ECTarget::Algorithm { .. } => "algorithm",
            ECTarget::Hyperparameter { .. } => "hyperparameter",
        }
    }

    /// Compact id: `S1`, `S1=A`, or `S1=A.a`.
    pub fn label(&self) -> String {
        match self {
            ECTarget::Step { step } => step.clone(),
            ECTarget::Algorithm { step, algo, .. } => format!("{step}={algo}"),
            ECTarget::Hyperparameter { step, algo, hp, .. } => format!("{step}={algo}.{hp}"),
        }
    }

    pub fn path_id(&self) -> Option<&str> {
        match self {
            ECTarget::Step { .. } => None,
            ECTarget::Algorithm { path, .. } | ECTarget::Hyperparameter { path, .. } => {
                Some(path)
            }
        }
    }
}

/// One error-contribution estimate from one run set.
#[derive(Debug, Clone, PartialEq)]
pub struct ECEstimate {
    pub target: ECTarget,
    /// Mean of the constrained minima minus the reference minimum.
    pub value: f64,
    pub constrained_minima: Vec<(String, f64)>,
    pub reference_min: f64,
    pub mode: ECMode,
    pub runs: RunSet,
}

/// How reopt mode runs its dedicated constrained searches.
#[derive(Debug, Clone, PartialEq)]
pub struct ReoptPlan {
    pub optimizer: OptimizerKind,
    pub budget: u64,
    pub patience: u64,
    pub seed: u64,
    /// Prepended to derived run ids so they cannot collide with main runs.
    pub run_prefix: String,
    pub smbo: SmboParams,
}

impl ReoptPlan {
    pub fn new(
        optimizer: OptimizerKind,
        budget: u64,
        patience: u64,
        seed: u64,
        run_prefix: impl Into<String>,
    ) -> Self {
        ReoptPlan {
            optimizer,
            budget,
            patience,
            seed,
            run_prefix: run_prefix.into(),
            smbo: SmboParams::default(),
        }
    }
}

/// Error contribution of a step: constrained minima fix one algorithm of
/// the step and minimize over the rest of the whole space; the reference
/// is the unconstrained minimum.
pub fn ec_step(
    store: &TrialStore,
    space: &ConfigSpace,
    step_name: &str,
    runs: &RunSet,
) -> Result<ECEstimate, AttrError> {
    filter_ec(store, space, step_constraints(space, step_name)?, runs)
}

/// Error contribution of one algorithm on a path: constrained minima pin
/// each of the algorithm's hyperparameter configurations and optimize the
/// rest of the path; the reference is the path minimum.
pub fn ec_algorithm(
    store: &TrialStore,
    space: &ConfigSpace,
    path: &Path,
    algo_name: &str,
    runs: &RunSet,
) -> Result<ECEstimate, AttrError> {
    filter_ec(
        store,
        space,
        algorithm_constraints(space, path, algo_name)?,
        runs,
    )
}

/// Error contribution of one hyperparameter on a path: constrained minima
/// pin each domain value and optimize all other path hyperparameters; the
/// reference is the path minimum.
pub fn ec_hyperparameter(
    store: &TrialStore,
    space: &ConfigSpace,
    path: &Path,
    hp_name: &str,
    runs: &RunSet,
) -> Result<ECEstimate, AttrError> {
    filter_ec(
        store,
        space,
        hyperparameter_constraints(space, path, hp_name)?,
        runs,
    )
}

pub fn ec_step_reopt(
    store: &mut TrialStore,
    space: &ConfigSpace,
    evaluator: &Evaluator,
    step_name: &str,
    runs: &RunSet,
    plan: &ReoptPlan,
) -> Result<ECEstimate, AttrError> {
    reopt_ec(
        store,
        space,
        evaluator,
        step_constraints(space, step_name)?,
        runs,
        plan,
    )
}

pub fn ec_algorithm_reopt(
    store: &mut TrialStore,
    space: &ConfigSpace,
    evaluator: &Evaluator,
    path: &Path,
    algo_name: &str,
    runs: &RunSet,
    plan: &ReoptPlan,
) -> Result<ECEstimate, AttrError> {
    reopt_ec(
        store,
        space,
        evaluator,
        algorithm_constraints(space, path, algo_name)?,
        runs,
        plan,
    )
}

pub fn ec_hyperparameter_reopt(
    store: &mut TrialStore,
    space: &ConfigSpace,
    evaluator: &Evaluator,
    path: &Path,
    hp_name: &str,
    runs: &RunSet,
    plan: &ReoptPlan,
) -> Result<ECEstimate, AttrError> {
    reopt_ec(
        store,
        space,
        evaluator,
        hyperparameter_constraints(space, path, hp_name)?,
        runs,
        plan,
    )
}

/// Mean and population std of estimates of one target across repeated runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedEC {
    pub target: ECTarget,
    pub optimizer: OptimizerKind,
    pub mode: ECMode,
    pub mean: f64,
    pub std: f64,
    /// Best reference minimum seen across the aggregated run sets.
    pub reference_min: f64,
    pub run_count: usize,
}

pub fn aggregate(
    estimates: &[ECEstimate],
    optimizer: OptimizerKind,
) -> Result<AggregatedEC, AttrError> {
    let first = estimates.first().ok_or(AttrError::EmptyAggregate)?;
    if estimates
        .iter()
        .any(|e| e.target != first.target || e.mode != first.mode)
    {
        return Err(AttrError::MixedAggregate);
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().map(|e| e.value).sum::<f64>() / n;
    let std = if estimates.len() == 1 {
        0.0
    } else {
        let var = estimates
            .iter()
            .map(|e| (e.value - mean) * (e.value - mean))
            .sum::<f64>()
            / n;
        var.sqrt()
    };
    let reference_min = estimates
        .iter()
        .map(|e| e.reference_min)
        .fold(f64::INFINITY, f64::min);
    Ok(AggregatedEC {
        target: first.target.clone(),
        optimizer,
        mode: first.mode,
        mean,
        std,
        reference_min,
        run_count: estimates.len(),
    })
}

/// The shared shape of all three EC levels: labeled constrained scopes plus
/// a reference scope, with the run mode dedicated reopt runs should carry.
struct ConstraintSet {
    target: ECTarget,
    reference_scope: Scope,
    constraints: Vec<(String, Scope)>,
    run_mode: RunMode,
}

fn step_constraints(space: &ConfigSpace, step_name: &str) -> Result<ConstraintSet, AttrError> {
    let (_, step) = space
        .step(step_name)
        .ok_or_else(|| AttrError::UnknownStep(step_name.to_owned()))?;
    let constraints = step
        .algorithms
        .iter()
        .map(|algo| {
            let scope = Scope::step_algorithm(space, step_name, &algo.name)?;
            Ok((format!("{step_name}={}", algo.name), scope))
        })
        .collect::<Result<Vec<_>, SpaceError>>()?;
    Ok(ConstraintSet {
        target: ECTarget::Step {
            step: step_name.to_owned(),
        },
        reference_scope: Scope::WholeSpace,
        constraints,
        run_mode: RunMode::Cash,
    })
}

fn algorithm_constraints(
    space: &ConfigSpace,
    path: &Path,
    algo_name: &str,
) -> Result<ConstraintSet, AttrError> {
    let hits: Vec<usize> = (0..space.steps().len())
        .filter(|&s| space.algorithm_on(path, s).name == algo_name)
        .collect();
    let step = sole(&hits, algo_name, space.path_id(path))?;
    let algo = space.algorithm_on(path, step);
    let domains: Vec<usize> = algo
        .hyperparameters
        .iter()
        .map(|h| h.domain_size())
        .collect();
    let constraints = odometer(&domains)
        .into_iter()
        .map(|values| {
            let label = if values.is_empty() {
                algo.name.clone()
            } else {
                let pins: Vec<String> = values
                    .iter()
                    .zip(&algo.hyperparameters)
                    .map(|(&v, h)| format!("{}={}", h.name, h.values[v]))
                    .collect();
                format!("{}({})", algo.name, pins.join(","))
            };
            let scope = Scope::pin_algorithm(space, path.clone(), step, &values);
            (label, scope)
        })
        .collect();
    Ok(ConstraintSet {
        target: ECTarget::Algorithm {
            path: space.path_id(path),
            step: space.steps()[step].name.clone(),
            algo: algo.name.clone(),
        },
        reference_scope: Scope::OnPath(path.clone()),
        constraints,
        run_mode: RunMode::Hpo(path.clone()),
    })
}

fn hyperparameter_constraints(
    space: &ConfigSpace,
    path: &Path,
    hp_name: &str,
) -> Result<ConstraintSet, AttrError> {
    let hits: Vec<_> = space
        .active_hps(path)
        .into_iter()
        .filter(|slot| space.hyperparameter_at(path, *slot).name == hp_name)
        .collect();
    let slot = sole(&hits, hp_name, space.path_id(path))?;
    let hp = space.hyperparameter_at(path, slot);
    let algo = space.algorithm_on(path, slot.step);
    let constraints = (0..hp.domain_size())
        .map(|v| {
            let label = format!("{}={}", hp.name, hp.values[v]);
            let scope = Scope::pin_hyperparameter(space, path.clone(), slot, v);
            (label, scope)
        })
        .collect();
    Ok(ConstraintSet {
        target: ECTarget::Hyperparameter {
            path: space.path_id(path),
            step: space.steps()[slot.step].name.clone(),
            algo: algo.name.clone(),
            hp: hp.name.clone(),
        },
        reference_scope: Scope::OnPath(path.clone()),
        constraints,
        run_mode: RunMode::Hpo(path.clone()),
    })
}

fn sole<T: Copy>(hits: &[T], name: &str, path: String) -> Result<T, AttrError> {
    match hits {
        [one] => Ok(*one),
        [] => Err(AttrError::NotOnPath {
            name: name.to_owned(),
            path,
        }),
        _ => Err(AttrError::Ambiguous {
            name: name.to_owned(),
            path,
        }),
    }
}

/// Cartesian product of domain index ranges, last domain fastest; a single
/// empty tuple when there are no domains.
fn odometer(domains: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &size in domains {
        let mut next = Vec::with_capacity(out.len() * size);
        for prefix in &out {
            for v in 0..size {
                let mut row = prefix.clone();
                row.push(v);
                next.push(row);
            }
        }
        out = next;
    }
    out
}

fn min_scope(
    store: &TrialStore,
    space: &ConfigSpace,
    runs: &RunSet,
    scope: &Scope,
    target: &str,
    what: &str,
) -> Result<f64, AttrError> {
    match store.min_over(space, runs, scope) {
        Ok((loss, _)) => Ok(loss),
        Err(StoreError::InsufficientCoverage { predicate }) => Err(AttrError::Coverage {
            target: target.to_owned(),
            detail: format!("{what} has no ok trial ({predicate})"),
        }),
        Err(other) => Err(other.into()),
    }
}

fn filter_ec(
    store: &TrialStore,
    space: &ConfigSpace,
    cs: ConstraintSet,
    runs: &RunSet,
) -> Result<ECEstimate, AttrError> {
    let label = cs.target.label();
    let reference_min = min_scope(store, space, runs, &cs.reference_scope, &label, "reference")?;
    let mut constrained_minima = Vec::with_capacity(cs.constraints.len());
    for (name, scope) in &cs.constraints {
        let min = min_scope(store, space, runs, scope, &label, name)?;
        constrained_minima.push((name.clone(), min));
    }
    let value = mean(&constrained_minima) - reference_min;
    Ok(ECEstimate {
        target: cs.target,
        value,
        constrained_minima,
        reference_min,
        mode: ECMode::Filter,
        runs: runs.clone(),
    })
}

fn reopt_ec(
    store: &mut TrialStore,
    space: &ConfigSpace,
    evaluator: &Evaluator,
    cs: ConstraintSet,
    runs: &RunSet,
    plan: &ReoptPlan,
) -> Result<ECEstimate, AttrError> {
    let label = cs.target.label();
    let mut constrained_minima = Vec::with_capacity(cs.constraints.len());
    let mut created = Vec::new();
    for (name, scope) in &cs.constraints {
        let run_id = format!("{}{}/{}", plan.run_prefix, label, name);
        let seed = plan.seed ^ fnv1a64(run_id.as_bytes());
        let mut spec = RunSpec::new(
            run_id.clone(),
            plan.optimizer,
            cs.run_mode.clone(),
            plan.budget,
            plan.patience,
            seed,
        )?;
        spec.smbo = plan.smbo.clone();
        let result = run_scoped(space, scope, evaluator, store, &spec)?;
        let best = result
            .best
            .and_then(|t| t.loss)
            .ok_or_else(|| AttrError::Coverage {
                target: label.clone(),
                detail: format!("constrained run for {name} recorded no ok trial"),
            })?;
        constrained_minima.push((name.clone(), best));
        created.push(run_id);
    }
    // Re-base the reference on everything seen, so estimates stay
    // non-negative even when a constrained search out-performs the main run.
    let unconstrained = match store.min_over(space, runs, &cs.reference_scope) {
        Ok((loss, _)) => Some(loss),
        Err(StoreError::InsufficientCoverage { .. }) => None,
        Err(other) => return Err(other.into()),
    };
    let reference_min = constrained_minima
        .iter()
        .map(|(_, m)| *m)
        .chain(unconstrained)
        .fold(f64::INFINITY, f64::min);
    let value = mean(&constrained_minima) - reference_min;
    Ok(ECEstimate {
        target: cs.target,
        value,
        constrained_minima,
        reference_min,
        mode: ECMode::Reopt,
        runs: union(runs, created),
    })
}

fn mean(minima: &[(String, f64)]) -> f64 {
    minima.iter().map(|(_, m)| *m).sum::<f64>() / minima.len() as f64
}

fn union(runs: &RunSet, extra: Vec<String>) -> RunSet {
    match runs {
        RunSet::All => RunSet::All,
        RunSet::Runs(ids) => {
            let mut all = ids.clone();
            all.extend(extra);
            RunSet::Runs(all)
        }
    }
}

//! Grid, random, and SMBO search over a scoped configuration set.
//!
//! All three drivers share the same commit path: every evaluation becomes a
//! [`Trial`] in the [`TrialStore`], committed in draw order, so logs are
//! seed-deterministic regardless of how evaluations were scheduled. Grid and
//! random may evaluate chunks in parallel (results are committed in draw
//! order afterwards); SMBO is strictly sequential because each proposal
//! depends on all previous losses.
//!
//! Stop reasons are checked in a fixed priority when several trigger at
//! once: exhausted-space, then budget, then patience.

mod ei;
mod forest;

pub use ei::expected_improvement;
pub use forest::{fit_surrogate, SurrogateModel};

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::{EvalError, Evaluation, Evaluator};
use crate::rng::Rng;
use crate::space::{encode, ConfigSpace, Configuration, Path, Scope, ScopeIndex, SpaceError};
use crate::store::{ModeKind, OptimizerKind, StoreError, Trial, TrialStatus, TrialStore};

/// Default trials-without-improvement stop.
pub const DEFAULT_PATIENCE: u64 = 50;
/// Patience value that never triggers (used for "inf").
pub const UNLIMITED: u64 = u64::MAX;

const EVAL_CHUNK: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum OptError {
    #[error("run spec invalid: {0}")]
    BadSpec(String),
    #[error("scope contains no configurations")]
    EmptyScope,
    #[error("surrogate needs at least 2 trials, got {0}")]
    TooFewTrials(usize),
    #[error("encoding width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Optimization scope selector: the whole space or a single path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunMode {
    Cash,
    Hpo(Path),
}

impl RunMode {
    pub fn kind(&self) -> ModeKind {
        match self {
            RunMode::Cash => ModeKind::Cash,
            RunMode::Hpo(_) => ModeKind::Hpo,
        }
    }

    pub fn scope(&self) -> Scope {
        match self {
            RunMode::Cash => Scope::WholeSpace,
            RunMode::Hpo(path) => Scope::OnPath(path.clone()),
        }
    }
}

/// SMBO internals, exposed so runs can pin non-default behavior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmboParams {
    /// Trees in the surrogate forest.
    pub n_trees: usize,
    /// Random initial design size (capped at scope size).
    pub n_init: u64,
    /// Candidate pool size per proposal.
    pub pool: usize,
    /// Every nth proposal is a pure random unseen draw.
    pub random_interleave: u64,
}

impl Default for SmboParams {
    fn default() -> Self {
        SmboParams {
            n_trees: 10,
            n_init: 10,
            pool: 500,
            random_interleave: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub run_id: String,
    pub optimizer: OptimizerKind,
    pub mode: RunMode,
    /// Maximum number of evaluated trials. Grid ignores this.
    pub budget: u64,
    /// Consecutive evaluated trials without strict improvement before
    /// stopping. Grid ignores this.
    pub patience: u64,
    pub seed: u64,
    pub smbo: SmboParams,
}

impl RunSpec {
    pub fn new(
        run_id: impl Into<String>,
        optimizer: OptimizerKind,
        mode: RunMode,
        budget: u64,
        patience: u64,
        seed: u64,
    ) -> Result<RunSpec, OptError> {
        let spec = RunSpec {
            run_id: run_id.into(),
            optimizer,
            mode,
            budget,
            patience,
            seed,
            smbo: SmboParams::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), OptError> {
        if self.run_id.is_empty() {
            return Err(OptError::BadSpec("run_id must be non-empty".into()));
        }
        if self.budget == 0 {
            return Err(OptError::BadSpec("budget must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(OptError::BadSpec("patience must be at least 1".into()));
        }
        let s = &self.smbo;
        if s.n_trees == 0 || s.n_init == 0 || s.pool == 0 || s.random_interleave == 0 {
            return Err(OptError::BadSpec(
                "smbo parameters must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ExhaustedSpace,
    Budget,
    Patience,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::ExhaustedSpace => "exhausted-space",
            StopReason::Budget => "budget",
            StopReason::Patience => "patience",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Lowest-loss ok trial, absent when every evaluation failed.
    pub best: Option<Trial>,
    pub trial_count: u64,
    pub stop_reason: StopReason,
}

/// Runs the spec's optimizer over the scope implied by its mode.
pub fn run(
    space: &ConfigSpace,
    evaluator: &Evaluator,
    store: &mut TrialStore,
    spec: &RunSpec,
) -> Result<RunResult, OptError> {
    let scope = spec.mode.scope();
    run_scoped(space, &scope, evaluator, store, spec)
}

/// Runs the spec's optimizer over an explicit scope (attribution uses this
/// for constrained re-optimization runs).
pub fn run_scoped(
    space: &ConfigSpace,
    scope: &Scope,
    evaluator: &Evaluator,
    store: &mut TrialStore,
    spec: &RunSpec,
) -> Result<RunResult, OptError> {
    match spec.optimizer {
        OptimizerKind::Grid => grid_search(space, scope, evaluator, store, spec),
        OptimizerKind::Random => random_search(space, scope, evaluator, store, spec),
        OptimizerKind::Smbo => smbo_search(space, scope, evaluator, store, spec),
    }
}

/// Evaluates every scoped configuration exactly once, in enumeration order.
/// Budget and patience do not apply; the stop reason is always
/// exhausted-space.
pub fn grid_search(
    space: &ConfigSpace,
    scope: &Scope,
    evaluator: &Evaluator,
    store: &mut TrialStore,
    spec: &RunSpec,
) -> Result<RunResult, OptError> {
    let index = check_entry(space, scope, spec, OptimizerKind::Grid)?;
    let total = index.count();
    let mut committer = Committer::new(space, store, spec);
    let mut ord = 0u64;
    while ord < total {
        let end = (ord + EVAL_CHUNK as u64).min(total);
        let configs: Vec<Configuration> = (ord..end).map(|i| index.config_at(i)).collect();
        for (config, (outcome, ms)) in configs
            .iter()
            .zip(evaluate_batch(space, evaluator, &configs))
        {
            committer.commit(config, outcome, ms)?;
        }
        ord = end;
    }
    Ok(committer.finish(StopReason::ExhaustedSpace))
}

/// Draws uniform unseen configurations until budget, patience, or
/// exhaustion. After 100 consecutive collisions with already-seen draws the
/// sampler switches to consuming the unseen remainder in shuffled order.
pub fn random_search(
    space: &ConfigSpace,
    scope: &Scope,
    evaluator: &Evaluator,
    store: &mut TrialStore,
    spec: &RunSpec,
) -> Result<RunResult, OptError> {
    let index = check_entry(space, scope, spec, OptimizerKind::Random)?;
    let total = index.count();
    let mut rng = Rng::seed_from_u64(spec.seed);
    let mut sampler = UnseenSampler::new(total);
    let mut committer = Committer::new(space, store, spec);
    loop {
        if let Some(reason) = committer.stop_reason(total) {
            return Ok(committer.finish(reason));
        }
        let want = EVAL_CHUNK.min((spec.budget - committer.evaluated) as usize);
        let mut configs = Vec::with_capacity(want);
        for _ in 0..want {
            match sampler.draw(&mut rng) {
                Some(ord) => configs.push(index.config_at(ord)),
                None => break,
            }
        }
        for (config, (outcome, ms)) in configs
            .iter()
            .zip(evaluate_batch(space, evaluator, &configs))
        {
            committer.commit(config, outcome, ms)?;
            if let Some(reason) = committer.stop_reason(total) {
                return Ok(committer.finish(reason));
            }
        }
    }
}

/// SMAC-style sequential model-based optimization: random init, then a loop
/// of surrogate fit, candidate pool, and EI-argmax proposals with a pure
/// random draw interleaved every nth proposal.
pub fn smbo_search(
    space: &ConfigSpace,
    scope: &Scope,
    evaluator: &Evaluator,
    store: &mut TrialStore,
    spec: &RunSpec,
) -> Result<RunResult, OptError> {
    let index = check_entry(space, scope, spec, OptimizerKind::Smbo)?;
    let total = index.count();
    let mut rng = Rng::seed_from_u64(spec.seed);
    let mut committer = Committer::new(space, store, spec);
    let mut unseen: Vec<u64> = (0..total).collect();
    let mut train: Vec<(Vec<f64>, f64)> = Vec::new();

    let eval_at = |pos: usize,
                   unseen: &mut Vec<u64>,
                   train: &mut Vec<(Vec<f64>, f64)>,
                   committer: &mut Committer|
     -> Result<(), OptError> {
        let ord = unseen.swap_remove(pos);
        let config = index.config_at(ord);
        let start = Instant::now();
        let outcome = evaluator.evaluate(space, &config);
        let ms = start.elapsed().as_millis() as u64;
        if let Ok(ev) = &outcome {
            train.push((encode(space, &config), ev.loss));
        }
        committer.commit(&config, outcome, ms)
    };

    let n_init = spec.smbo.n_init.min(total);
    for _ in 0..n_init {
        if let Some(reason) = committer.stop_reason(total) {
            return Ok(committer.finish(reason));
        }
        let pos = rng.next_below(unseen.len() as u64) as usize;
        eval_at(pos, &mut unseen, &mut train, &mut committer)?;
    }

    let mut proposal = 0u64;
    loop {
        if let Some(reason) = committer.stop_reason(total) {
            return Ok(committer.finish(reason));
        }
        proposal += 1;
        // Too few ok trials to fit a surrogate also falls back to random.
        let interleave = proposal % spec.smbo.random_interleave == 0;
        let pos = if interleave || train.len() < 2 {
            rng.next_below(unseen.len() as u64) as usize
        } else {
            let fit_seed = rng.next_u64();
            let model = fit_surrogate(&train, spec.smbo.n_trees, fit_seed)?;
            let k = spec.smbo.pool.min(unseen.len());
            rng.partial_shuffle(&mut unseen, k);
            argmax_ei(space, &index, &model, &unseen[..k], committer.best_loss)?
        };
        eval_at(pos, &mut unseen, &mut train, &mut committer)?;
    }
}

/// Index of the EI-argmax candidate within the pool slice; exact EI ties
/// resolve to the lowest canonical id.
fn argmax_ei(
    space: &ConfigSpace,
    index: &ScopeIndex<'_>,
    model: &SurrogateModel,
    pool: &[u64],
    best_loss: f64,
) -> Result<usize, OptError> {
    let mut best_ei = f64::NEG_INFINITY;
    let mut ties: Vec<usize> = Vec::new();
    for (i, &ord) in pool.iter().enumerate() {
        let config = index.config_at(ord);
        let (mean, variance) = model.predict(&encode(space, &config))?;
        let ei = expected_improvement(mean, variance, best_loss);
        if ei > best_ei {
            best_ei = ei;
            ties.clear();
            ties.push(i);
        } else if ei == best_ei {
            ties.push(i);
        }
    }
    Ok(ties
        .into_iter()
        .min_by_key(|&i| space.canonical_id(&index.config_at(pool[i])))
        .expect("pool is non-empty"))
}

fn check_entry<'a>(
    space: &'a ConfigSpace,
    scope: &Scope,
    spec: &RunSpec,
    expected: OptimizerKind,
) -> Result<ScopeIndex<'a>, OptError> {
    spec.validate()?;
    if spec.optimizer != expected {
        return Err(OptError::BadSpec(format!(
            "spec names optimizer {} but {} was invoked",
            spec.optimizer, expected
        )));
    }
    let index = ScopeIndex::new(space, scope);
    if index.count() == 0 {
        return Err(OptError::EmptyScope);
    }
    Ok(index)
}

fn evaluate_batch(
    space: &ConfigSpace,
    evaluator: &Evaluator,
    configs: &[Configuration],
) -> Vec<(Result<Evaluation, EvalError>, u64)> {
    configs
        .par_iter()
        .map(|config| {
            let start = Instant::now();
            let outcome = evaluator.evaluate(space, config);
            (outcome, start.elapsed().as_millis() as u64)
        })
        .collect()
}

/// Commits evaluations to the store in draw order and tracks the incumbent,
/// the patience counter, and the budget.
struct Committer<'a> {
    space: &'a ConfigSpace,
    store: &'a mut TrialStore,
    spec: &'a RunSpec,
    best_loss: f64,
    best_trial: Option<Trial>,
    since_improve: u64,
    evaluated: u64,
}

impl<'a> Committer<'a> {
    fn new(space: &'a ConfigSpace, store: &'a mut TrialStore, spec: &'a RunSpec) -> Self {
        Committer {
            space,
            store,
            spec,
            best_loss: f64::INFINITY,
            best_trial: None,
            since_improve: 0,
            evaluated: 0,
        }
    }

    fn commit(
        &mut self,
        config: &Configuration,
        outcome: Result<Evaluation, EvalError>,
        elapsed_ms: u64,
    ) -> Result<(), OptError> {
        let (status, loss, fold_losses) = match outcome {
            Ok(ev) => (TrialStatus::Ok, Some(ev.loss), ev.fold_losses),
            Err(_) => (TrialStatus::Failed, None, None),
        };
        let trial = Trial {
            trial_id: 0,
            run_id: self.spec.run_id.clone(),
            draw_index: self.evaluated,
            config: self.space.canonical_id(config),
            path: self.space.path_id(&config.path()),
            loss,
            fold_losses,
            status,
            optimizer: self.spec.optimizer,
            mode: self.spec.mode.kind(),
            seed: self.spec.seed,
            elapsed_ms: Some(elapsed_ms),
        };
        self.store.record(trial)?;
        self.evaluated += 1;
        match loss {
            Some(l) if l < self.best_loss => {
                self.best_loss = l;
                self.best_trial = Some(self.store.trials().last().expect("just recorded").clone());
                self.since_improve = 0;
            }
            _ => self.since_improve += 1,
        }
        Ok(())
    }

    fn stop_reason(&self, scope_size: u64) -> Option<StopReason> {
        if self.evaluated >= scope_size {
            Some(StopReason::ExhaustedSpace)
        } else if self.evaluated >= self.spec.budget {
            Some(StopReason::Budget)
        } else if self.since_improve >= self.spec.patience {
            Some(StopReason::Patience)
        } else {
            None
        }
    }

    fn finish(self, stop_reason: StopReason) -> RunResult {
        RunResult {
            best: self.best_trial,
            trial_count: self.evaluated,
            stop_reason,
        }
    }
}

/// Uniform sampler over scope ordinals that never repeats a draw. Rejection
/// sampling at first; after 100 consecutive collisions it materializes the
/// unseen remainder, shuffles it once, and consumes it in order.
struct UnseenSampler {
    total: u64,
    seen: HashSet<u64>,
    fallback: Option<Vec<u64>>,
    cursor: usize,
    threshold: u32,
}

impl UnseenSampler {
    fn new(total: u64) -> Self {
        UnseenSampler {
            total,
            seen: HashSet::new(),
            fallback: None,
            cursor: 0,
            threshold: 100,
        }
    }

    #[cfg(test)]
    fn with_threshold(total: u64, threshold: u32) -> Self {
        UnseenSampler {
            threshold,
            ..UnseenSampler::new(total)
        }
    }

    fn draw(&mut self, rng: &mut Rng) -> Option<u64> {
        if self.seen.len() as u64 == self.total {
            return None;
        }
        if let Some(rest) = &self.fallback {
            let ord = rest[self.cursor];
            self.cursor += 1;
            self.seen.insert(ord);
            return Some(ord);
        }
        let mut collisions = 0u32;
        loop {
            if collisions >= self.threshold {
                let mut rest: Vec<u64> =
                    (0..self.total).filter(|o| !self.seen.contains(o)).collect();
                rng.shuffle(&mut rest);
                let ord = rest[0];
                self.cursor = 1;
                self.fallback = Some(rest);
                self.seen.insert(ord);
                return Some(ord);
            }
            let ord = rng.next_below(self.total);
            if self.seen.insert(ord) {
                return Some(ord);
            }
            collisions += 1;
        }
    }
}

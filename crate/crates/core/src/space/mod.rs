//! Pipeline configuration spaces.
//!
//! A space is an ordered chain of steps; each step offers alternative
//! algorithms; each algorithm carries hyperparameters with finite, ordered
//! value domains. A [`Path`] picks one algorithm per step, and a
//! [`Configuration`] is a path plus one value for every hyperparameter that
//! is active on it. Spaces are immutable after construction and cheap to
//! share across worker threads.

mod canonical;
mod encode;
mod parse;
mod scope;

pub use encode::{decode, encode, encoding_width, unit_positions, INACTIVE};
pub use scope::{Scope, ScopeIndex};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("malformed space document: {0}")]
    Malformed(String),
    #[error("{location}: duplicate name '{name}'")]
    DuplicateName { location: String, name: String },
    #[error("{location}: invalid identifier '{name}'")]
    InvalidName { location: String, name: String },
    #[error("{location}: empty domain")]
    EmptyDomain { location: String },
    #[error("{location}: unknown domain kind '{kind}'")]
    UnknownDomainKind { location: String, kind: String },
    #[error("{location}: value {value} does not fit domain kind {kind}")]
    BadDomainValue {
        location: String,
        value: String,
        kind: String,
    },
    #[error("{location}: duplicate domain value {value}")]
    DuplicateDomainValue { location: String, value: String },
    #[error("space '{0}' has no steps")]
    NoSteps(String),
    #[error("step '{0}' has no algorithms")]
    NoAlgorithms(String),
    #[error("space too large: configuration count overflows")]
    TooLarge,
    #[error("unknown step '{0}'")]
    UnknownStep(String),
    #[error("unknown algorithm '{algo}' in step '{step}'")]
    UnknownAlgorithm { step: String, algo: String },
    #[error("unknown hyperparameter '{hp}' of algorithm '{algo}'")]
    UnknownHyperparameter { algo: String, hp: String },
    #[error("value '{value}' not in domain of hyperparameter '{hp}'")]
    ValueNotInDomain { hp: String, value: String },
    #[error("invalid path '{0}'")]
    InvalidPath(String),
    #[error("invalid configuration id '{id}': {reason}")]
    BadConfigId { id: String, reason: String },
    #[error("invalid encoding: {0}")]
    BadEncoding(String),
    #[error("scope is empty")]
    EmptyScope,
}

/// One hyperparameter value. Domains are finite ordered lists of these.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Cat(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Cat(v) => write!(f, "{v}"),
        }
    }
}

impl Value {
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }
}

/// Domain kind tag from the space document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Int,
    Float,
    Bool,
    Categorical,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::Int => "int",
            DomainKind::Float => "float",
            DomainKind::Bool => "bool",
            DomainKind::Categorical => "categorical",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Hyperparameter {
    pub name: String,
    pub kind: DomainKind,
    pub values: Vec<Value>,
}

impl Hyperparameter {
    pub fn domain_size(&self) -> usize {
        self.values.len()
    }

    /// Index of `literal` in the domain, comparing canonical literals.
    pub fn value_index(&self, literal: &str) -> Option<usize> {
        self.values.iter().position(|v| v.to_string() == literal)
    }
}

#[derive(Debug, Clone)]
pub struct AlgorithmSpec {
    pub name: String,
    pub hyperparameters: Vec<Hyperparameter>,
}

impl AlgorithmSpec {
    /// Number of hyperparameter configurations (1 for a parameterless
    /// algorithm: the empty assignment).
    pub fn config_count(&self) -> u64 {
        self.hyperparameters
            .iter()
            .fold(1u64, |acc, hp| acc * hp.domain_size() as u64)
    }

    pub fn hyperparameter(&self, name: &str) -> Option<(usize, &Hyperparameter)> {
        self.hyperparameters
            .iter()
            .enumerate()
            .find(|(_, hp)| hp.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct Step {
    pub name: String,
    pub algorithms: Vec<AlgorithmSpec>,
}

impl Step {
    pub fn algorithm(&self, name: &str) -> Option<(usize, &AlgorithmSpec)> {
        self.algorithms
            .iter()
            .enumerate()
            .find(|(_, a)| a.name == name)
    }
}

/// A validated configuration space.
#[derive(Debug, Clone)]
pub struct ConfigSpace {
    name: String,
    steps: Vec<Step>,
}

/// One active hyperparameter on a path: (step index, hyperparameter index
/// within the chosen algorithm).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveHp {
    pub step: usize,
    pub hp: usize,
}

impl ConfigSpace {
    /// Builds and validates a space from parts. Prefer [`ConfigSpace::parse`]
    /// for document input.
    pub fn new(name: impl Into<String>, steps: Vec<Step>) -> Result<Self, SpaceError> {
        let space = Self {
            name: name.into(),
            steps,
        };
        parse::validate(&space)?;
        Ok(space)
    }

    /// Parses and validates a JSON space-definition document.
    pub fn parse(text: &str) -> Result<Self, SpaceError> {
        parse::parse_document(text)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn step(&self, name: &str) -> Option<(usize, &Step)> {
        self.steps.iter().enumerate().find(|(_, s)| s.name == name)
    }

    /// Number of paths through the space (product of per-step algorithm
    /// counts).
    pub fn path_count(&self) -> u64 {
        self.steps
            .iter()
            .fold(1u64, |acc, s| acc * s.algorithms.len() as u64)
    }

    /// Paths in lexicographic order: step order outermost, algorithm
    /// declaration order within a step.
    pub fn enumerate_paths(&self) -> Vec<Path> {
        (0..self.path_count()).map(|i| self.path_at(i)).collect()
    }

    /// Unranks a path index (mixed radix, first step most significant).
    pub fn path_at(&self, mut index: u64) -> Path {
        let mut algos = vec![0usize; self.steps.len()];
        for (i, step) in self.steps.iter().enumerate().rev() {
            let m = step.algorithms.len() as u64;
            algos[i] = (index % m) as usize;
            index /= m;
        }
        Path { algos }
    }

    pub fn path_index(&self, path: &Path) -> u64 {
        let mut index = 0u64;
        for (i, step) in self.steps.iter().enumerate() {
            index = index * step.algorithms.len() as u64 + path.algos[i] as u64;
        }
        index
    }

    /// Total configuration count of the whole space.
    pub fn total_configurations(&self) -> u64 {
        self.steps
            .iter()
            .map(|s| s.algorithms.iter().map(AlgorithmSpec::config_count).sum::<u64>())
            .fold(1u64, |acc, per_step| acc * per_step)
    }

    /// Configuration count of a single path.
    pub fn path_configurations(&self, path: &Path) -> u64 {
        path.algos
            .iter()
            .enumerate()
            .map(|(s, &a)| self.steps[s].algorithms[a].config_count())
            .product()
    }

    /// The hyperparameters active on a path, in step order then declaration
    /// order.
    pub fn active_hps(&self, path: &Path) -> Vec<ActiveHp> {
        let mut out = Vec::new();
        for (s, &a) in path.algos.iter().enumerate() {
            for h in 0..self.steps[s].algorithms[a].hyperparameters.len() {
                out.push(ActiveHp { step: s, hp: h });
            }
        }
        out
    }

    pub fn algorithm_on(&self, path: &Path, step: usize) -> &AlgorithmSpec {
        &self.steps[step].algorithms[path.algos[step]]
    }

    pub fn hyperparameter_at(&self, path: &Path, slot: ActiveHp) -> &Hyperparameter {
        &self.algorithm_on(path, slot.step).hyperparameters[slot.hp]
    }

    /// Canonical string id for a configuration.
    pub fn canonical_id(&self, config: &Configuration) -> String {
        canonical::format_id(self, config)
    }

    /// Parses a canonical id back into a validated configuration.
    pub fn parse_canonical_id(&self, id: &str) -> Result<Configuration, SpaceError> {
        canonical::parse_id(self, id)
    }

    /// Canonical id for a path, e.g. `"A->C"`.
    pub fn path_id(&self, path: &Path) -> String {
        path.algos
            .iter()
            .enumerate()
            .map(|(s, &a)| self.steps[s].algorithms[a].name.as_str())
            .collect::<Vec<_>>()
            .join("->")
    }

    /// Resolves a path id of the form `"algo1->algo2->..."`.
    pub fn parse_path_id(&self, id: &str) -> Result<Path, SpaceError> {
        let names: Vec<&str> = id.split("->").collect();
        Path::from_names(self, &names).map_err(|_| SpaceError::InvalidPath(id.to_string()))
    }

    /// Checks that a configuration's indices are in range for this space.
    pub fn contains(&self, config: &Configuration) -> bool {
        if config.algos.len() != self.steps.len() {
            return false;
        }
        for (s, &a) in config.algos.iter().enumerate() {
            if a >= self.steps[s].algorithms.len() {
                return false;
            }
        }
        let path = config.path();
        let active = self.active_hps(&path);
        if config.values.len() != active.len() {
            return false;
        }
        active
            .iter()
            .zip(&config.values)
            .all(|(slot, &v)| v < self.hyperparameter_at(&path, *slot).domain_size())
    }
}

/// One algorithm chosen per step.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    algos: Vec<usize>,
}

impl Path {
    pub fn from_indices(space: &ConfigSpace, algos: Vec<usize>) -> Result<Self, SpaceError> {
        if algos.len() != space.steps().len()
            || algos
                .iter()
                .zip(space.steps())
                .any(|(&a, s)| a >= s.algorithms.len())
        {
            return Err(SpaceError::InvalidPath(format!("{algos:?}")));
        }
        Ok(Self { algos })
    }

    pub fn from_names(space: &ConfigSpace, names: &[&str]) -> Result<Self, SpaceError> {
        if names.len() != space.steps().len() {
            return Err(SpaceError::InvalidPath(names.join("->")));
        }
        let mut algos = Vec::with_capacity(names.len());
        for (step, name) in space.steps().iter().zip(names) {
            let (idx, _) = step
                .algorithm(name)
                .ok_or_else(|| SpaceError::UnknownAlgorithm {
                    step: step.name.clone(),
                    algo: (*name).to_string(),
                })?;
            algos.push(idx);
        }
        Ok(Self { algos })
    }

    pub fn algo_indices(&self) -> &[usize] {
        &self.algos
    }
}

/// A full assignment: path plus one domain index per active hyperparameter
/// (in step order, declaration order). Indices are resolved against the
/// space that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    algos: Vec<usize>,
    values: Vec<usize>,
}

impl Configuration {
    pub fn new(space: &ConfigSpace, path: Path, values: Vec<usize>) -> Result<Self, SpaceError> {
        let config = Self {
            algos: path.algos,
            values,
        };
        if space.contains(&config) {
            Ok(config)
        } else {
            Err(SpaceError::InvalidPath(format!("{config:?}")))
        }
    }

    pub(crate) fn from_parts_unchecked(algos: Vec<usize>, values: Vec<usize>) -> Self {
        Self { algos, values }
    }

    pub fn path(&self) -> Path {
        Path {
            algos: self.algos.clone(),
        }
    }

    pub fn algo_indices(&self) -> &[usize] {
        &self.algos
    }

    /// Domain indices for the active hyperparameters, aligned with
    /// [`ConfigSpace::active_hps`].
    pub fn value_indices(&self) -> &[usize] {
        &self.values
    }

    /// The value assigned to hyperparameter `hp_name` of the algorithm at
    /// `step_name`, if that algorithm is on the configuration's path.
    pub fn value_of<'s>(
        &self,
        space: &'s ConfigSpace,
        step_name: &str,
        hp_name: &str,
    ) -> Option<&'s Value> {
        let (step_idx, _) = space.step(step_name)?;
        let path = self.path();
        let algo = space.algorithm_on(&path, step_idx);
        let (hp_idx, hp) = algo.hyperparameter(hp_name)?;
        let active = space.active_hps(&path);
        let pos = active
            .iter()
            .position(|slot| slot.step == step_idx && slot.hp == hp_idx)?;
        Some(&hp.values[self.values[pos]])
    }
}

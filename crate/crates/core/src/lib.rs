//! Pipeline configuration-space optimization and error attribution.
//!
//! The crate models machine-learning pipelines as step/algorithm/
//! hyperparameter spaces, optimizes over them with grid, random, and
//! model-based search, stores every evaluated trial, and attributes
//! validation error to individual steps, algorithms, and hyperparameters.

pub mod attribution;
pub mod builtin;
pub mod eval;
pub mod optimize;
pub mod report;
pub mod rng;
pub mod space;
pub mod store;

pub use attribution::{
    aggregate, ec_algorithm, ec_algorithm_reopt, ec_hyperparameter, ec_hyperparameter_reopt,
    ec_step, ec_step_reopt, AggregatedEC, AttrError, ECEstimate, ECMode, ECTarget, ReoptPlan,
};
pub use optimize::{
    expected_improvement, fit_surrogate, run, run_scoped, OptError, RunMode, RunResult, RunSpec,
    SmboParams, StopReason, SurrogateModel, DEFAULT_PATIENCE, UNLIMITED,
};
pub use report::{
    ec_chart_svg, optimizer_color, parse_ec_csv, timing_chart_svg, write_ec_csv, ReportError,
    ReportRow, TimingRow, OPTIMIZER_ORDER,
};
pub use rng::Rng;
pub use store::{
    ModeKind, OptimizerKind, RunMeta, RunSet, StoreError, Trial, TrialStatus, TrialStore,
};
pub use space::{
    decode, encode, encoding_width, ActiveHp, AlgorithmSpec, ConfigSpace, Configuration,
    DomainKind, Hyperparameter, Path, Scope, ScopeIndex, SpaceError, Step, Value,
};

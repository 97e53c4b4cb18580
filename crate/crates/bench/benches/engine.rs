use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use pipeattrib_core::eval::{Evaluator, EvaluatorSpec, SyntheticSurface};
use pipeattrib_core::space::Scope;
use pipeattrib_core::store::{OptimizerKind, RunSet, TrialStore};
use pipeattrib_core::{builtin, ec_step, run, RunMode, RunSpec, UNLIMITED};

fn spec(optimizer: OptimizerKind, budget: u64, seed: u64) -> RunSpec {
    RunSpec::new(
        format!("{optimizer}-bench"),
        optimizer,
        RunMode::Cash,
        budget,
        UNLIMITED,
        seed,
    )
    .unwrap()
}

fn bench_evaluators(c: &mut Criterion) {
    let imgcls = builtin::imgcls_space();
    let surface = SyntheticSurface::new(0.0, 0);
    let configs = Scope::WholeSpace.enumerate(&imgcls);
    c.bench_function("synthetic_evaluate_3060", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for config in &configs {
                acc += surface.evaluate(&imgcls, black_box(config));
            }
            acc
        })
    });

    let miniml = builtin::miniml_space();
    let evaluator = Evaluator::from_spec(&EvaluatorSpec::MiniMl {
        dataset: "mini150".to_owned(),
        k: 5,
        seed: 0,
    })
    .unwrap();
    let config = &Scope::WholeSpace.enumerate(&miniml)[0];
    c.bench_function("miniml_cv_evaluate_one", |b| {
        b.iter(|| evaluator.evaluate(&miniml, black_box(config)).unwrap())
    });
}

fn bench_optimizers(c: &mut Criterion) {
    let space = builtin::imgcls_space();
    let evaluator = Evaluator::Synthetic(SyntheticSurface::new(0.0, 0));

    c.bench_function("grid_3060", |b| {
        b.iter_batched(
            TrialStore::new,
            |mut store| run(&space, &evaluator, &mut store, &spec(OptimizerKind::Grid, 3060, 0)),
            BatchSize::SmallInput,
        )
    });
    c.bench_function("random_918", |b| {
        b.iter_batched(
            TrialStore::new,
            |mut store| run(&space, &evaluator, &mut store, &spec(OptimizerKind::Random, 918, 0)),
            BatchSize::SmallInput,
        )
    });
    let mut slow = c.benchmark_group("smbo");
    slow.sample_size(10);
    slow.bench_function("smbo_120", |b| {
        b.iter_batched(
            TrialStore::new,
            |mut store| run(&space, &evaluator, &mut store, &spec(OptimizerKind::Smbo, 120, 0)),
            BatchSize::SmallInput,
        )
    });
    slow.finish();
}

fn bench_attribution(c: &mut Criterion) {
    let space = builtin::imgcls_space();
    let evaluator = Evaluator::Synthetic(SyntheticSurface::new(0.0, 0));
    let mut store = TrialStore::new();
    run(&space, &evaluator, &mut store, &spec(OptimizerKind::Grid, 3060, 0)).unwrap();

    c.bench_function("ec_step_filter_3060", |b| {
        b.iter(|| {
            for step in space.steps() {
                ec_step(&store, &space, black_box(&step.name), &RunSet::All).unwrap();
            }
        })
    });
}

criterion_group!(benches, bench_evaluators, bench_optimizers, bench_attribution);
criterion_main!(benches);

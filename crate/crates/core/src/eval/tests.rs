use std::collections::BTreeMap;

use pipeattrib_testkit::{oracle_ec_step, oracle_global_min, OracleSpace};

use super::learners::Node;
use super::*;
use crate::builtin::{self, FIX6_SPACE_JSON, IMGCLS_SPACE_JSON, MINI150_CSV, MINIML_SPACE_JSON};
use crate::space::{ConfigSpace, Scope};

#[test]
fn mini150_fixture_matches_generator() {
    assert_eq!(generate_mini150().to_csv(), MINI150_CSV);
    let data = builtin::mini150_dataset();
    assert_eq!(data.len(), 150);
    assert_eq!(data.class_count(), 3);
    assert_eq!(data.features().cols(), 4);
    for c in 0..3 {
        assert_eq!(data.labels().iter().filter(|&&l| l == c).count(), 50);
    }
    // Class means come out near the generating means.
    let mean_of = |class: usize, col: usize| -> f64 {
        let rows: Vec<f64> = (0..data.len())
            .filter(|&i| data.labels()[i] == class)
            .map(|i| data.features().get(i, col))
            .collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    };
    assert!((mean_of(1, 0) - 2.5).abs() < 0.5);
    assert!((mean_of(2, 3) - 2.5).abs() < 0.5);
    assert!(mean_of(0, 0).abs() < 0.5);
}

#[test]
fn csv_roundtrip_and_errors() {
    let data = builtin::mini150_dataset();
    let reparsed = Dataset::parse_csv(&data.to_csv()).unwrap();
    assert_eq!(reparsed.features(), data.features());
    assert_eq!(reparsed.labels(), data.labels());

    assert!(Dataset::parse_csv("").is_err());
    assert!(Dataset::parse_csv("1.0,x,0\n").is_err());
    assert!(Dataset::parse_csv("1.0,2.0,zero\n").is_err());
    assert!(Dataset::parse_csv("1.0,2.0,0\n1.0,1\n").is_err());
    // Single class.
    assert!(Dataset::parse_csv("1.0,0\n2.0,0\n").is_err());
    // Class 1 missing while class 2 present.
    assert!(Dataset::parse_csv("1.0,0\n2.0,2\n").is_err());
}

#[test]
fn stratified_folds_balance_classes() {
    let data = builtin::mini150_dataset();
    let split = make_cv_splits(&data, 5, 7).unwrap();
    for fold in 0..5 {
        for class in 0..3 {
            let n = (0..data.len())
                .filter(|&i| split.assignments()[i] == fold && data.labels()[i] == class)
                .count();
            assert_eq!(n, 10, "fold {fold} class {class}");
        }
    }
    // Train/valid partition the samples.
    for fold in 0..5 {
        let train = split.train_indices(fold);
        let valid = split.valid_indices(fold);
        assert_eq!(train.len() + valid.len(), data.len());
        assert!(train.iter().all(|i| !valid.contains(i)));
    }

    assert_eq!(
        make_cv_splits(&data, 5, 7).unwrap().assignments(),
        split.assignments()
    );
    assert_ne!(
        make_cv_splits(&data, 5, 8).unwrap().assignments(),
        split.assignments()
    );
    assert!(make_cv_splits(&data, 1, 7).is_err());
    assert!(make_cv_splits(&data, 51, 7).is_err());
}

#[test]
fn uneven_stratification_differs_by_at_most_one() {
    // 5 samples of class 0 and 4 of class 1 over 3 folds.
    let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
    let labels = vec![0, 0, 0, 0, 0, 1, 1, 1, 1];
    let data = Dataset::new(Matrix::from_rows(rows), labels).unwrap();
    let split = make_cv_splits(&data, 3, 1).unwrap();
    for class in 0..2 {
        let mut per_fold = vec![0usize; 3];
        for i in 0..data.len() {
            if data.labels()[i] == class {
                per_fold[split.assignments()[i]] += 1;
            }
        }
        let max = per_fold.iter().max().unwrap();
        let min = per_fold.iter().min().unwrap();
        assert!(max - min <= 1, "class {class}: {per_fold:?}");
    }
}

#[test]
fn cross_entropy_values_and_errors() {
    // Hand value: (−ln 0.5 − ln 0.75) / 2.
    let probs = Matrix::from_rows(vec![vec![0.5, 0.5], vec![0.25, 0.75]]);
    let loss = cross_entropy(&probs, &[0, 1]).unwrap();
    assert!((loss - 0.49041462650586315).abs() < 1e-15);

    // Exact one-hots cost −ln(1−ε) ≈ 1e-12, not 0.
    let onehot = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let loss = cross_entropy(&onehot, &[0, 1]).unwrap();
    assert!(loss > 0.0 && loss < 1e-10);

    let bad_sum = Matrix::from_rows(vec![vec![0.5, 0.6]]);
    assert!(cross_entropy(&bad_sum, &[0]).is_err());
    assert!(cross_entropy(&probs, &[0]).is_err());
    assert!(cross_entropy(&probs, &[0, 2]).is_err());
}

#[test]
fn polynomial_expansion() {
    let t = Transform::fit_polynomial(2).unwrap();
    let x = Matrix::from_rows(vec![vec![1.0, 2.0]]);
    assert_eq!(t.apply(&x).row(0), &[1.0, 2.0, 1.0, 2.0, 4.0]);
    assert_eq!(t.output_dim(2), 5);

    let t1 = Transform::fit_polynomial(1).unwrap();
    assert_eq!(t1.apply(&x), x);
    assert!(Transform::fit_polynomial(3).is_err());
}

#[test]
fn standardize_normalizes_train_columns() {
    let train = Matrix::from_rows(vec![vec![1.0, 10.0], vec![3.0, 30.0], vec![5.0, 20.0]]);
    let t = Transform::fit_standardize(&train);
    let out = t.apply(&train);
    for j in 0..2 {
        let col: Vec<f64> = (0..3).map(|i| out.get(i, j)).collect();
        let mean = col.iter().sum::<f64>() / 3.0;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }
    // Constant column: the std floor keeps outputs finite.
    let constant = Matrix::from_rows(vec![vec![2.0], vec![2.0]]);
    let t = Transform::fit_standardize(&constant);
    assert!(t.apply(&constant).get(0, 0).abs() < 1e-6);
}

#[test]
fn random_projection_is_seed_deterministic() {
    let a = Transform::fit_random_projection(4, 3, 99);
    let b = Transform::fit_random_projection(4, 3, 99);
    let c = Transform::fit_random_projection(4, 3, 100);
    assert_eq!(a, b);
    assert_ne!(a, c);
    let x = Matrix::from_rows(vec![vec![1.0, 0.0, 0.0, 0.0]]);
    assert_eq!(a.apply(&x).cols(), 3);
}

#[test]
fn pca_components_are_orthonormal() {
    let data = builtin::mini150_dataset();
    for n in 2..=4 {
        for whiten in [false, true] {
            let t = Transform::fit_pca(data.features(), n, whiten);
            let Transform::Pca { components, .. } = &t else {
                panic!("expected pca transform");
            };
            // ‖WᵀW − I‖∞ < 1e-8.
            for i in 0..n {
                for j in 0..n {
                    let mut dot = 0.0;
                    for k in 0..components.rows() {
                        dot += components.get(k, i) * components.get(k, j);
                    }
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-8, "({i},{j}) dot {dot}");
                }
            }
            assert_eq!(t.apply(data.features()).cols(), n);
        }
    }
    // Component count is capped at the input dimensionality.
    let t = Transform::fit_pca(data.features(), 10, false);
    assert_eq!(t.output_dim(4), 4);
}

#[test]
fn whitened_pca_has_unit_variance_components() {
    let data = builtin::mini150_dataset();
    let t = Transform::fit_pca(data.features(), 3, true);
    let out = t.apply(data.features());
    for j in 0..3 {
        let col: Vec<f64> = (0..out.rows()).map(|i| out.get(i, j)).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var =
            col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (col.len() - 1) as f64;
        assert!((var - 1.0).abs() < 1e-6, "component {j} variance {var}");
    }
}

#[test]
fn knn_probabilities_are_smoothed() {
    // 3 classes; querying a training point with k=1 finds the point itself,
    // and add-1 smoothing turns the single vote into probability 0.5.
    let train = Matrix::from_rows(vec![vec![0.0], vec![10.0], vec![20.0]]);
    let learner = Learner::fit_knn(&train, &[0, 1, 2], 3, 1).unwrap();
    let probs = learner.predict_proba(&train);
    for i in 0..3 {
        assert!((probs.get(i, i) - 0.5).abs() < 1e-15);
        let sum: f64 = probs.row(i).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
    assert!(Learner::fit_knn(&train, &[0, 1, 2], 3, 0).is_err());
    assert!(Learner::fit_knn(&train, &[0, 1, 2], 3, 4).is_err());
}

#[test]
fn knn_breaks_distance_ties_by_index() {
    // Query is equidistant from both training points; index 0 must win.
    let train = Matrix::from_rows(vec![vec![1.0], vec![-1.0]]);
    let learner = Learner::fit_knn(&train, &[0, 1], 2, 1).unwrap();
    let probs = learner.predict_proba(&Matrix::from_rows(vec![vec![0.0]]));
    assert!(probs.get(0, 0) > probs.get(0, 1));
}

#[test]
fn tree_splits_where_gini_says() {
    let train = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
    let labels = [0, 0, 1, 1];
    let learner = Learner::fit_tree(&train, &labels, 2, 1, 1).unwrap();
    let Learner::Tree { root, .. } = &learner else {
        panic!("expected tree");
    };
    let Node::Split { feature, threshold, .. } = root else {
        panic!("expected split at root");
    };
    assert_eq!(*feature, 0);
    assert!((threshold - 1.5).abs() < 1e-15);
    // Pure leaves of 2 samples with add-1 smoothing: (2+1)/(2+2).
    let probs = learner.predict_proba(&Matrix::from_rows(vec![vec![0.5], vec![2.5]]));
    assert!((probs.get(0, 0) - 0.75).abs() < 1e-15);
    assert!((probs.get(1, 1) - 0.75).abs() < 1e-15);
}

#[test]
fn tree_respects_min_samples_leaf() {
    let train = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
    let labels = [0, 0, 1, 1];
    // Any split would leave a child with fewer than 3 samples.
    let learner = Learner::fit_tree(&train, &labels, 2, 4, 3).unwrap();
    let Learner::Tree { root, .. } = &learner else {
        panic!("expected tree");
    };
    assert!(matches!(root, Node::Leaf { .. }));
    let probs = learner.predict_proba(&Matrix::from_rows(vec![vec![0.0]]));
    assert!((probs.get(0, 0) - 0.5).abs() < 1e-15);
}

#[test]
fn tree_tie_breaks_toward_lowest_feature() {
    // Feature 1 duplicates feature 0, so every split quality ties.
    let train = Matrix::from_rows(vec![
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        vec![2.0, 2.0],
        vec![3.0, 3.0],
    ]);
    let labels = [0, 0, 1, 1];
    let learner = Learner::fit_tree(&train, &labels, 2, 1, 1).unwrap();
    let Learner::Tree { root, .. } = &learner else {
        panic!("expected tree");
    };
    let Node::Split { feature, .. } = root else {
        panic!("expected split");
    };
    assert_eq!(*feature, 0);
    assert!(Learner::fit_tree(&train, &labels, 2, 0, 1).is_err());
    assert!(Learner::fit_tree(&train, &labels, 2, 1, 0).is_err());
}

#[test]
fn synthetic_matches_hand_computed_values() {
    let space = ConfigSpace::parse(FIX6_SPACE_JSON).unwrap();
    let surface = SyntheticSurface::new(0.0, 0);
    // Step 0, A(a=1): offset 0.00, spread (0 − 0.25)². Step 1, C(c=1):
    // offset 0.95, spread (0 − 0.75)².
    let c = space.parse_canonical_id("S1=A(a=1)|S2=C(c=1)").unwrap();
    assert!((surface.evaluate(&space, &c) - 0.509375).abs() < 1e-15);
    // Step 0, B: offset 0.85, no-hp spread 0.35. Step 1, C(c=2): offset
    // 0.95, spread (1 − 0.75)².
    let c = space.parse_canonical_id("S1=B|S2=C(c=2)").unwrap();
    assert!((surface.evaluate(&space, &c) - 0.953125).abs() < 1e-15);
}

#[test]
fn synthetic_noise_is_seeded_per_configuration() {
    let space = ConfigSpace::parse(FIX6_SPACE_JSON).unwrap();
    let configs = Scope::WholeSpace.enumerate(&space);
    let clean = SyntheticSurface::new(0.0, 0);
    let noisy = SyntheticSurface::new(0.1, 5);
    for c in &configs {
        // Deterministic under repetition, including with noise.
        assert_eq!(clean.evaluate(&space, c), clean.evaluate(&space, c));
        assert_eq!(noisy.evaluate(&space, c), noisy.evaluate(&space, c));
        assert_ne!(clean.evaluate(&space, c), noisy.evaluate(&space, c));
    }
    let other_seed = SyntheticSurface::new(0.1, 6);
    assert_ne!(
        noisy.evaluate(&space, &configs[0]),
        other_seed.evaluate(&space, &configs[0])
    );
}

#[test]
fn synthetic_surface_step_contributions_are_ordered() {
    // The step weights halve by design, so on the image-classification
    // space the first step must dominate attribution. Verified against the
    // brute-force oracle over all 3060 configurations.
    let space = ConfigSpace::parse(IMGCLS_SPACE_JSON).unwrap();
    let oracle = OracleSpace::parse(IMGCLS_SPACE_JSON);
    let surface = SyntheticSurface::new(0.0, 0);
    let mut table = pipeattrib_testkit::LossTable::new();
    for config in Scope::WholeSpace.enumerate(&space) {
        table.insert(
            space.canonical_id(&config),
            surface.evaluate(&space, &config),
        );
    }
    let ec: Vec<f64> = (0..3).map(|s| oracle_ec_step(&oracle, s, &table)).collect();
    assert!(ec[0] > ec[1] && ec[1] > ec[2], "step ECs {ec:?}");
    assert!(ec[2] > 0.0);
    let global = oracle_global_min(&oracle, &table);
    assert!(global > 0.1, "global min {global}");
}

#[test]
fn loss_table_evaluator_looks_up_exactly() {
    let space = ConfigSpace::parse(FIX6_SPACE_JSON).unwrap();
    let spec = EvaluatorSpec::LossTable {
        path: None,
        table: Some(parse_loss_table(builtin::FIX6_LOSSES_JSON).unwrap()),
    };
    let evaluator = Evaluator::from_spec(&spec).unwrap();
    let c = space.parse_canonical_id("S1=A(a=1)|S2=C(c=2)").unwrap();
    let out = evaluator.evaluate(&space, &c).unwrap();
    assert_eq!(out.loss, 0.20);
    assert_eq!(out.fold_losses, None);

    // A table that misses one id reports that id.
    let mut partial: BTreeMap<String, f64> = parse_loss_table(builtin::FIX6_LOSSES_JSON).unwrap();
    partial.remove("S1=B|S2=C(c=1)");
    let evaluator = Evaluator::from_spec(&EvaluatorSpec::LossTable {
        path: None,
        table: Some(partial),
    })
    .unwrap();
    let missing = space.parse_canonical_id("S1=B|S2=C(c=1)").unwrap();
    let err = evaluator.evaluate(&space, &missing).unwrap_err();
    assert!(err.to_string().contains("S1=B|S2=C(c=1)"));

    assert!(Evaluator::from_spec(&EvaluatorSpec::LossTable {
        path: None,
        table: Some(BTreeMap::new()),
    })
    .is_err());
    assert!(Evaluator::from_spec(&EvaluatorSpec::LossTable {
        path: None,
        table: None,
    })
    .is_err());
}

#[test]
fn miniml_evaluator_is_deterministic_and_bounded() {
    let space = ConfigSpace::parse(MINIML_SPACE_JSON).unwrap();
    let spec = EvaluatorSpec::MiniMl {
        dataset: "mini150".to_string(),
        k: 5,
        seed: 42,
    };
    let evaluator = Evaluator::from_spec(&spec).unwrap();
    let max_loss = -(1e-12f64.ln());
    for id in [
        "transform=raw|reduction=standardize|learner=knn(k=3)",
        "transform=polynomial(degree=2)|reduction=pca(whiten=true,n_components=3)|learner=decision_tree(max_depth=4,min_samples_leaf=1)",
        "transform=random_projection(dim=2)|reduction=standardize|learner=knn(k=7)",
    ] {
        let config = space.parse_canonical_id(id).unwrap();
        let out = evaluator.evaluate(&space, &config).unwrap();
        assert!(out.loss > 0.0 && out.loss <= max_loss, "{id}: {}", out.loss);
        let folds = out.fold_losses.as_ref().unwrap();
        assert_eq!(folds.len(), 5);
        let mean = folds.iter().sum::<f64>() / 5.0;
        assert!((mean - out.loss).abs() < 1e-15);
        let again = evaluator.evaluate(&space, &config).unwrap();
        assert_eq!(out, again);
    }
}

#[test]
fn miniml_rejects_unknown_algorithms() {
    let space = ConfigSpace::parse(IMGCLS_SPACE_JSON).unwrap();
    let evaluator = Evaluator::from_spec(&EvaluatorSpec::MiniMl {
        dataset: "mini150".to_string(),
        k: 5,
        seed: 42,
    })
    .unwrap();
    let config = Scope::WholeSpace.enumerate(&space)[0].clone();
    let err = evaluator.evaluate(&space, &config).unwrap_err();
    assert!(err.to_string().contains("haralick"));
}

#[test]
fn held_out_rows_never_reach_fits() {
    let space = ConfigSpace::parse(MINIML_SPACE_JSON).unwrap();
    let config = space
        .parse_canonical_id(
            "transform=raw|reduction=pca(whiten=true,n_components=3)|learner=decision_tree(max_depth=4,min_samples_leaf=1)",
        )
        .unwrap();
    let original = builtin::mini150_dataset();
    let a = MiniMlEvaluator::new(original.clone(), 5, 42).unwrap();

    // Corrupt every validation row of fold 0; labels (hence the split) are
    // unchanged.
    let valid = a.split().valid_indices(0);
    let mut rows: Vec<Vec<f64>> = original.features().row_iter().map(<[f64]>::to_vec).collect();
    for &i in &valid {
        rows[i] = vec![1e6, -1e6, 1e6, -1e6];
    }
    let mutated = Dataset::new(Matrix::from_rows(rows), original.labels().to_vec()).unwrap();
    let b = MiniMlEvaluator::new(mutated, 5, 42).unwrap();
    assert_eq!(a.split().assignments(), b.split().assignments());

    let (ta, la) = a.fit_pipeline(&space, &config, 0).unwrap();
    let (tb, lb) = b.fit_pipeline(&space, &config, 0).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(la, lb);
}

#[test]
fn evaluator_spec_json_roundtrip() {
    let specs = [
        r#"{"kind":"synthetic","noise_std":0.05,"seed":3}"#,
        r#"{"kind":"synthetic"}"#,
        r#"{"kind":"mini-ml","dataset":"mini150","k":5,"seed":42}"#,
        r#"{"kind":"mini-ml","dataset":"mini150"}"#,
        r#"{"kind":"loss-table","table":{"s=a":0.5}}"#,
    ];
    for text in specs {
        let spec: EvaluatorSpec = serde_json::from_str(text).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let again: EvaluatorSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, again);
    }
    if let EvaluatorSpec::MiniMl { k, .. } =
        serde_json::from_str::<EvaluatorSpec>(r#"{"kind":"mini-ml","dataset":"mini150"}"#).unwrap()
    {
        assert_eq!(k, 5);
    } else {
        panic!("wrong kind");
    }
    assert!(serde_json::from_str::<EvaluatorSpec>(r#"{"kind":"other"}"#).is_err());

    // k below 2 is rejected at construction.
    assert!(Evaluator::from_spec(&EvaluatorSpec::MiniMl {
        dataset: "mini150".to_string(),
        k: 1,
        seed: 42,
    })
    .is_err());
    assert!(Evaluator::from_spec(&EvaluatorSpec::Synthetic {
        noise_std: -0.1,
        seed: 0,
    })
    .is_err());
}

use proptest::prelude::*;
use qoekit_core::learner::{
    evaluate, fit_forest, fit_linear, load_model, save_model, LearnError, Model, Tree, TreeNode,
};
use qoekit_core::seed::rng_for;
use qoekit_core::{FeatureMatrix, ForestModel, ForestParams, LinearModel};
use rand::Rng;

fn matrix(names: &[&str], rows: Vec<Vec<f64>>, y: Vec<f64>) -> FeatureMatrix {
    FeatureMatrix::new(names.iter().map(|s| s.to_string()).collect(), rows, y)
}

/// A smooth monotone MOS-like target over four inputs in [0, 1].
fn synthetic(n: usize, seed: u64, noise: f64) -> FeatureMatrix {
    let mut rng = rng_for(seed, "synthetic", 0);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let t = 1.0 + 4.0 * (0.4 * x[0] + 0.3 * x[1].sqrt() + 0.2 * x[2] * x[2] + 0.1 * x[3]);
        y.push(t + noise * (rng.random::<f64>() - 0.5));
        rows.push(x);
    }
    matrix(&["a", "b", "c", "d"], rows, y)
}

#[test]
fn micro_split() {
    let x = matrix(&["x"], vec![vec![1.0], vec![2.0], vec![8.0], vec![9.0]], vec![0.0, 0.0, 10.0, 10.0]);
    let params = ForestParams {
        n_estimators: 1,
        max_depth: 1,
        max_features_fraction: 1.0,
        bootstrap: false,
        ..Default::default()
    };
    let f = fit_forest(&x, &params).unwrap();
    match f.trees[0].nodes.as_slice() {
        [TreeNode::Split { threshold, left, right, .. }, ..] => {
            assert!(*threshold > 2.0 && *threshold < 8.0);
            let leaf = |i: u32| match f.trees[0].nodes[i as usize] {
                TreeNode::Leaf { value, .. } => value,
                _ => panic!("expected a leaf"),
            };
            assert_eq!(leaf(*left), 0.0);
            assert_eq!(leaf(*right), 10.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn constant_target_forest() {
    let data = synthetic(200, 1, 0.0);
    let x = FeatureMatrix {
        target: vec![3.7; 200],
        ..data
    };
    let f = Model::Forest(fit_forest(&x, &ForestParams { n_estimators: 50, ..Default::default() }).unwrap());
    let p = f.predict(&x).unwrap();
    assert!(p.values.iter().all(|v| *v == 3.7));
}

#[test]
fn identical_leaves_predict_their_value() {
    let f = Model::Forest(ForestModel {
        feature_names: vec!["x".into()],
        params: ForestParams::default(),
        trees: vec![Tree::leaf(3.0, 1); 600],
    });
    let x = matrix(&["x"], vec![vec![-4.0], vec![0.0], vec![1e9]], vec![0.0; 3]);
    assert_eq!(f.predict(&x).unwrap().values, vec![3.0; 3]);
}

#[test]
fn unbootstrapped_deep_tree_memorizes() {
    let data = synthetic(300, 2, 0.3);
    let params = ForestParams {
        n_estimators: 1,
        max_depth: usize::MAX,
        max_features_fraction: 1.0,
        bootstrap: false,
        ..Default::default()
    };
    let f = fit_forest(&data, &params).unwrap();
    for (row, y) in data.rows.iter().zip(&data.target) {
        assert_eq!(f.predict_row_raw(row), *y);
    }
}

#[test]
fn defaults_fit_monotone_data() {
    let data = synthetic(1_000, 3, 0.0);
    let f = Model::Forest(fit_forest(&data, &ForestParams::default()).unwrap());
    let p = f.predict(&data).unwrap();
    let m = evaluate(&p.values, &data.target).unwrap();
    assert!(m.r2.unwrap() >= 0.99, "train R2 {:?}", m.r2);
}

#[test]
fn forest_is_deterministic_and_depth_bounded() {
    let data = synthetic(300, 4, 0.5);
    let params = ForestParams {
        n_estimators: 40,
        max_depth: 6,
        seed: 77,
        ..Default::default()
    };
    let a = fit_forest(&data, &params).unwrap();
    let b = fit_forest(&data, &params).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trees.len(), 40);
    assert!(a.max_depth() <= 6);
    let c = fit_forest(&data, &ForestParams { seed: 78, ..params }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn leaves_respect_min_samples() {
    let data = synthetic(200, 5, 0.5);
    let f = fit_forest(
        &data,
        &ForestParams {
            n_estimators: 10,
            min_samples_leaf: 5,
            ..Default::default()
        },
    )
    .unwrap();
    for t in &f.trees {
        for node in &t.nodes {
            if let TreeNode::Leaf { n, .. } = node {
                assert!(*n >= 5);
            }
        }
    }
}

#[test]
fn bagging_beats_single_trees() {
    for seed in 0..20 {
        let data = synthetic(240, 100 + seed, 0.8);
        let (train, test) = qoekit_core::features::split(&data, 0.25, seed).unwrap();
        let params = ForestParams {
            n_estimators: 30,
            seed,
            ..Default::default()
        };
        let forest = fit_forest(&train, &params).unwrap();
        let forest_mse = evaluate(
            &test.rows.iter().map(|r| forest.predict_row_raw(r)).collect::<Vec<_>>(),
            &test.target,
        )
        .unwrap()
        .mse;
        let mut tree_mse: Vec<f64> = forest
            .trees
            .iter()
            .map(|t| {
                let p: Vec<f64> = test.rows.iter().map(|r| t.predict(r)).collect();
                evaluate(&p, &test.target).unwrap().mse
            })
            .collect();
        tree_mse.sort_by(f64::total_cmp);
        let median = tree_mse[tree_mse.len() / 2];
        assert!(forest_mse <= 1.1 * median, "seed {seed}: {forest_mse} vs {median}");
    }
}

#[test]
fn shuffled_rows_give_similar_r2() {
    let data = synthetic(600, 6, 0.4);
    let (train, test) = qoekit_core::features::split(&data, 0.2, 1).unwrap();
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.reverse();
    let shuffled = FeatureMatrix::new(
        train.feature_names.clone(),
        order.iter().map(|&i| train.rows[i].clone()).collect(),
        order.iter().map(|&i| train.target[i]).collect(),
    );
    let params = ForestParams {
        n_estimators: 60,
        ..Default::default()
    };
    let r2 = |m: &ForestModel| {
        let p: Vec<f64> = test.rows.iter().map(|r| m.predict_row_raw(r)).collect();
        evaluate(&p, &test.target).unwrap().r2.unwrap()
    };
    let a = r2(&fit_forest(&train, &params).unwrap());
    let b = r2(&fit_forest(&shuffled, &ForestParams { seed: 9, ..params }).unwrap());
    assert!((a - b).abs() <= 0.02, "{a} vs {b}");
}

#[test]
fn ols_recovers_known_weights() {
    let mut rng = rng_for(42, "ols", 0);
    let w = [0.7, -1.3, 2.2, 0.05, -0.4];
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..5).map(|_| rng.random::<f64>() * 10.0).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| 1.5 + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()).collect();
    let m = fit_linear(&matrix(&["a", "b", "c", "d", "e"], rows, y), None).unwrap();
    for (got, want) in m.coefficients.iter().zip(&w) {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
    assert!((m.intercept - 1.5).abs() < 1e-6);
}

#[test]
fn linear_predictions_are_clamped_and_counted() {
    let m = Model::Linear(LinearModel {
        feature_names: vec!["x".into()],
        coefficients: vec![1.0],
        intercept: 0.0,
    });
    let x = matrix(&["x"], vec![vec![6.3], vec![3.0], vec![-2.0]], vec![0.0; 3]);
    let p = m.predict(&x).unwrap();
    assert_eq!(p.values, vec![5.0, 3.0, 1.0]);
    assert_eq!(p.clamped, 2);
}

#[test]
fn feature_mismatch() {
    let m = Model::Linear(LinearModel {
        feature_names: vec!["delay".into()],
        coefficients: vec![1.0],
        intercept: 0.0,
    });
    let x = matrix(&["jitter"], vec![vec![1.0]], vec![0.0]);
    assert!(matches!(m.predict(&x), Err(LearnError::FeatureMismatch { .. })));
}

#[test]
fn empty_training_set() {
    let x = matrix(&["x"], vec![], vec![]);
    assert!(matches!(
        fit_forest(&x, &ForestParams::default()),
        Err(LearnError::EmptyTrain)
    ));
}

#[test]
fn saved_forest_predicts_identically() {
    let data = synthetic(150, 7, 0.5);
    let f = Model::Forest(fit_forest(&data, &ForestParams { n_estimators: 20, ..Default::default() }).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("forest.bin");
    save_model(&path, &f).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back.predict(&data).unwrap(), f.predict(&data).unwrap());
}

#[test]
fn reported_rmse_pairs() {
    assert!((2.8306e-05f64.sqrt() - 0.0053).abs() <= 5e-5);
    assert!((3.1047e-06f64.sqrt() - 0.0018).abs() <= 5e-5);
}

proptest! {
    #[test]
    fn metric_identities(pairs in prop::collection::vec((1.0f64..5.0, 1.0f64..5.0), 2..100)) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m = evaluate(&p, &t).unwrap();
        prop_assert!((m.rmse * m.rmse - m.mse).abs() <= 1e-12 * m.mse.max(1e-300));
        let n = t.len() as f64;
        let mean = t.iter().sum::<f64>() / n;
        let ss_res: f64 = p.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum();
        let ss_tot: f64 = t.iter().map(|b| (b - mean).powi(2)).sum();
        if let Some(r2) = m.r2 {
            prop_assert!((r2 - (1.0 - ss_res / ss_tot)).abs() <= 1e-9);
            prop_assert!(r2 <= 1.0);
        }
        let mae = p.iter().zip(&t).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
        prop_assert!((m.mae - mae).abs() <= 1e-9);
    }
}

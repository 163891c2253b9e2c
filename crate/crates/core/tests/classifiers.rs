mod common;

use botflow::classifiers::{fit, ModelKind, ModelSpec};
use botflow::dataset::train_test_split;
use botflow::evaluation::{compute_metrics, confusion};
use common::*;
use proptest::prelude::*;

fn accuracy(kind: ModelKind, table: &botflow::dataset::FeatureTable, seed: u64) -> f64 {
    let (train, test) = train_test_split(table, 0.8, seed).unwrap();
    let model = fit(&ModelSpec::default_for(kind, seed), &train.rows, train.labels().unwrap()).unwrap();
    let pred = model.predict(&test.rows).unwrap();
    let cm = confusion(test.labels().unwrap(), &pred).unwrap();
    compute_metrics("t", kind, cm).unwrap().accuracy
}

#[test]
fn separable_data_is_learned() {
    let t = separable_table(600, 6, 21);
    for kind in [ModelKind::LR, ModelKind::KNN, ModelKind::RF] {
        let acc = accuracy(kind, &t, 21);
        assert!(acc >= 99.0, "{kind}: {acc}");
    }
}

#[test]
fn forest_beats_naive_bayes_on_correlated_features() {
    let t = correlated_table(600, 4, 8);
    let nb = accuracy(ModelKind::NB, &t, 8);
    let rf = accuracy(ModelKind::RF, &t, 8);
    assert!(rf >= nb, "rf {rf} nb {nb}");
    assert!(nb < 75.0, "nb {nb}");
}

#[test]
fn knn_ignores_training_row_order_without_ties() {
    let t = separable_table(200, 3, 4);
    let y = t.labels().unwrap();
    let a = fit(&ModelSpec::default_for(ModelKind::KNN, 0), &t.rows, y).unwrap();
    let rev: Vec<usize> = (0..t.n_rows()).rev().collect();
    let r = t.take_rows(&rev);
    let b = fit(&ModelSpec::default_for(ModelKind::KNN, 0), &r.rows, r.labels().unwrap()).unwrap();
    let q = separable_table(100, 3, 99);
    assert_eq!(a.predict(&q.rows).unwrap(), b.predict(&q.rows).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn lr_gradient_matches_finite_differences(seed in any::<u64>()) {
        prop_assert!(gradient_agrees(seed).is_ok(), "{:?}", gradient_agrees(seed));
    }

    #[test]
    fn fitting_is_reproducible(seed in 0u64..1000) {
        let t = separable_table(80, 3, seed);
        for kind in ModelKind::ALL {
            let spec = ModelSpec::default_for(kind, seed);
            let a = fit(&spec, &t.rows, t.labels().unwrap()).unwrap();
            let b = fit(&spec, &t.rows, t.labels().unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

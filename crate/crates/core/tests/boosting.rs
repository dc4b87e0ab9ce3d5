mod common;

use monotree::boosting::{
    deserialize_model, serialize_model, train, train_with_eval, DataSplit, Metric, MODEL_FORMAT,
};
use monotree::dataset::{bin_features, load_adult, one_hot_encode, preprocess_adult, Cell};
use monotree::objective::{sigmoid, ObjectiveKind};
use monotree::{BinnedDataset, BoosterConfig, ConstraintMode, Error, Execution, RawTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config(objective: ObjectiveKind, mode: ConstraintMode, iterations: usize) -> BoosterConfig {
    BoosterConfig {
        objective,
        iterations,
        num_leaves: 8,
        max_depth: 4,
        min_data_in_leaf: 10,
        monotone_method: mode,
        ..BoosterConfig::default()
    }
}

fn binary_data(seed: u64, rows: usize, dirs: &[i8]) -> BinnedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::synthetic(&mut rng, rows, 4, dirs, ObjectiveKind::BinaryLogloss, 32)
}

#[test]
fn zero_iterations_predicts_the_base_rate() {
    let data = binary_data(1, 300, &[1]);
    let (model, table) = train(&data, &small_config(ObjectiveKind::BinaryLogloss, ConstraintMode::Fast, 0)).unwrap();
    assert!(model.trees.is_empty());
    assert!(table.records.is_empty());
    let mean = data.labels().iter().sum::<f64>() / data.row_count() as f64;
    for p in model.predict_binned(&data).unwrap() {
        assert!((p - mean).abs() < 1e-12);
    }
}

#[test]
fn single_l2_tree_fits_four_points_exactly() {
    let data = BinnedDataset::from_columns(
        vec!["x".into()],
        &[vec![1.0, 1.0, 2.0, 2.0]],
        vec![1.0, 1.0, -1.0, -1.0],
        vec![0],
        255,
    )
    .unwrap();
    let cfg = BoosterConfig {
        objective: ObjectiveKind::L2,
        iterations: 1,
        learning_rate: 1.0,
        min_data_in_leaf: 1,
        monotone_method: ConstraintMode::None,
        ..BoosterConfig::default()
    };
    let (model, table) = train(&data, &cfg).unwrap();
    assert_eq!(table.get(1, Metric::Mse, DataSplit::Train), Some(0.0));
    assert_eq!(model.predict_binned(&data).unwrap(), vec![1.0, 1.0, -1.0, -1.0]);
}

#[test]
fn constraint_engines_are_inert_without_directions() {
    let data = binary_data(2, 500, &[]);
    let none = train(&data, &small_config(ObjectiveKind::BinaryLogloss, ConstraintMode::None, 10)).unwrap();
    for mode in [ConstraintMode::Basic, ConstraintMode::Fast, ConstraintMode::Slow] {
        let other = train(&data, &small_config(ObjectiveKind::BinaryLogloss, mode, 10)).unwrap();
        assert_eq!(none.0.trees, other.0.trees);
        assert_eq!(none.1, other.1);
    }
}

#[test]
fn staged_metrics_match_truncated_ensembles() {
    let data = binary_data(3, 600, &[1, -1]);
    let eval = binary_data(4, 300, &[1, -1]);
    let metrics = [Metric::Logloss, Metric::Accuracy, Metric::Auc];
    let cfg = small_config(ObjectiveKind::BinaryLogloss, ConstraintMode::Slow, 12);
    let (model, table) = train_with_eval(&data, &cfg, Some(&eval), &metrics).unwrap();
    assert_eq!(table.records.len(), 12 * 3 * 2);
    for k in [1, 5, 12] {
        let mut truncated = model.clone();
        truncated.trees.truncate(k);
        for (split, set) in [(DataSplit::Train, &data), (DataSplit::Test, &eval)] {
            let margins = truncated.predict_margins_binned(set).unwrap();
            for m in metrics {
                let v = m.evaluate(ObjectiveKind::BinaryLogloss, &margins, set.labels()).unwrap();
                assert_eq!(table.get(k, m, split), Some(v), "{m} {split:?} at {k}");
            }
        }
    }
}

#[test]
fn ensemble_sum_reproduces_margins() {
    let data = binary_data(5, 400, &[1]);
    let (model, _) = train(&data, &small_config(ObjectiveKind::BinaryLogloss, ConstraintMode::Fast, 8)).unwrap();
    let margins = model.predict_margins_binned(&data).unwrap();
    for (r, m) in margins.iter().enumerate() {
        let direct: f64 = model.base_margin
            + model.trees.iter().map(|t| model.learning_rate * t.predict_row(&data, r)).sum::<f64>();
        assert!((m - direct).abs() < 1e-12);
    }
    let probs = model.predict_binned(&data).unwrap();
    assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0));
    assert!(probs.iter().zip(&margins).all(|(p, m)| *p == sigmoid(*m)));
}

#[test]
fn round_trip_keeps_predictions_bit_identical() {
    let data = binary_data(6, 500, &[1, -1]);
    let (model, _) = train(&data, &small_config(ObjectiveKind::BinaryLogloss, ConstraintMode::Slow, 10)).unwrap();
    assert_eq!(model.trees.len(), 10);
    let text = serialize_model(&model).unwrap();
    let back = deserialize_model(&text).unwrap();
    assert_eq!(back, model);
    let a = model.predict_margins_binned(&data).unwrap();
    let b = back.predict_margins_binned(&data).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(serialize_model(&back).unwrap(), text);
}

#[test]
fn empty_model_document() {
    let data = binary_data(7, 200, &[1]);
    let (model, _) = train(&data, &small_config(ObjectiveKind::BinaryLogloss, ConstraintMode::Basic, 0)).unwrap();
    let text = serialize_model(&model).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["format"], MODEL_FORMAT);
    assert_eq!(doc["trees"].as_array().unwrap().len(), 0);
    assert_eq!(deserialize_model(&text).unwrap(), model);
}

#[test]
fn malformed_documents_rejected() {
    let data = binary_data(8, 200, &[1]);
    let (model, _) = train(&data, &small_config(ObjectiveKind::BinaryLogloss, ConstraintMode::Fast, 2)).unwrap();
    let text = serialize_model(&model).unwrap();
    assert!(matches!(deserialize_model(&text[..text.len() / 2]), Err(Error::Model(_))));
    let wrong = text.replacen(MODEL_FORMAT, "other/9", 1);
    assert!(matches!(deserialize_model(&wrong), Err(Error::Model(_))));
}

#[test]
fn training_is_deterministic() {
    let data = binary_data(9, 800, &[1, -1]);
    for mode in ConstraintMode::ALL {
        let mut cfg = small_config(ObjectiveKind::BinaryLogloss, mode, 6);
        let a = serialize_model(&train(&data, &cfg).unwrap().0).unwrap();
        let b = serialize_model(&train(&data, &cfg).unwrap().0).unwrap();
        assert_eq!(a, b);
        cfg.execution = Execution::Sequential;
        let c = train(&data, &cfg).unwrap().0;
        assert_eq!(deserialize_model(&a).unwrap().trees, c.trees);
    }
}

#[test]
fn training_errors() {
    let data = binary_data(10, 100, &[1]);
    let mut one_class = BinnedDataset::from_columns(
        vec!["x".into()],
        &[vec![0.0, 1.0, 2.0]],
        vec![1.0; 3],
        vec![0],
        255,
    )
    .unwrap();
    let cfg = small_config(ObjectiveKind::BinaryLogloss, ConstraintMode::Fast, 1);
    assert!(matches!(train(&one_class, &cfg), Err(Error::DegenerateBaseMargin(_))));
    one_class.set_directions(vec![1]).unwrap();
    let empty = data.select_rows(&[]);
    assert!(matches!(train(&empty, &cfg), Err(Error::EmptyDataset)));
    let bad_lr = BoosterConfig {
        learning_rate: 0.0,
        ..cfg.clone()
    };
    assert!(matches!(train(&data, &bad_lr), Err(Error::Parameter(_))));
    let bad_dirs = BoosterConfig {
        monotone_constraints: Some(vec![1]),
        ..cfg
    };
    assert!(train(&data, &bad_dirs).is_err());
}

/// Preprocessed table, its one-hot encoding and the encoded schema.
fn adult_sample(rows: usize) -> (RawTable, RawTable, monotree::FeatureSchema) {
    let raw = load_adult(&[common::adult_dir().join("adult.data")]).unwrap();
    let idx: Vec<u32> = (0..rows as u32).collect();
    let (table, schema) = preprocess_adult(&raw.select_rows(&idx)).unwrap();
    let (encoded, enc_schema) = one_hot_encode(&table, &schema).unwrap();
    (table, encoded, enc_schema)
}

#[test]
fn raw_prediction_matches_binned_prediction() {
    let (table, encoded, schema) = adult_sample(3000);
    let data = bin_features(&encoded, &schema, 64).unwrap();
    let (model, _) = train(&data, &small_config(ObjectiveKind::BinaryLogloss, ConstraintMode::Fast, 5)).unwrap();
    let model = model.with_schema(schema);
    let binned = model.predict_binned(&data).unwrap();
    assert_eq!(model.predict(&encoded).unwrap(), binned);
    assert_eq!(model.predict(&table).unwrap(), binned);

    let n = encoded.row_count();
    let bogus = RawTable::new(
        encoded.column_names().iter().cloned().chain(["bogus".to_string()]).collect(),
        encoded
            .column_names()
            .iter()
            .map(|c| encoded.column(c).unwrap().to_vec())
            .chain([vec![Cell::Number(0.0); n]])
            .collect(),
    )
    .unwrap();
    assert!(matches!(model.predict(&bogus), Err(Error::Schema(_))));
}

#[test]
fn unconstrained_train_logloss_decreases_on_adult() {
    let data = monotree::experiments::adult_dataset(common::adult_dir(), 255).unwrap();
    let cfg = BoosterConfig {
        iterations: 100,
        monotone_method: ConstraintMode::None,
        ..BoosterConfig::default()
    };
    let (_, table) = train_with_eval(&data, &cfg, None, &[Metric::Logloss]).unwrap();
    let curve = table.series(Metric::Logloss, DataSplit::Train);
    let pairs = curve.windows(2).filter(|w| w[1].1 <= w[0].1).count();
    assert!(pairs as f64 >= 0.95 * (curve.len() - 1) as f64);
}

#[test]
fn ensembles_stay_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let dirs = common::random_directions(&mut rng, 3);
        let data = common::synthetic(&mut rng, 600, 3, &dirs, ObjectiveKind::BinaryLogloss, 32);
        for mode in [ConstraintMode::Basic, ConstraintMode::Fast, ConstraintMode::Slow] {
            let (model, _) = train(&data, &small_config(ObjectiveKind::BinaryLogloss, mode, 15)).unwrap();
            let bad = monotree::constraints::verify::sampled_violations(
                &model.trees,
                &data.bin_counts(),
                &dirs,
                2000,
                rng.gen(),
            );
            assert_eq!(bad, 0, "{mode}");
        }
    }
}

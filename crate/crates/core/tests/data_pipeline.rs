use std::collections::BTreeSet;

use cardiodx_core::data::{
    binarize, fit_minmax, load_and_clean, parse_dataset, records_to_csv, split_train_test,
    PatientRecord, DEFAULT_SPLIT_SEED, DEFAULT_TRAIN_COUNT, N_FEATURES,
};
use cardiodx_core::{Error, Matrix};
use proptest::prelude::*;

const CLEVELAND: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/cleveland.csv");

fn cleveland() -> Vec<PatientRecord> {
    load_and_clean(CLEVELAND).unwrap().records
}

#[test]
fn cleveland_counts() {
    let loaded = load_and_clean(CLEVELAND).unwrap();
    assert_eq!(loaded.raw_rows, 303);
    assert_eq!(loaded.records.len(), 297);
    assert_eq!(loaded.dropped, 6);
    let split = split_train_test(&loaded.records, DEFAULT_SPLIT_SEED, DEFAULT_TRAIN_COUNT).unwrap();
    assert_eq!(split.y_train.len(), 236);
    assert_eq!(split.y_test.len(), 61);
}

#[test]
fn cleaning_is_idempotent() {
    let records = cleveland();
    let again = parse_dataset(&records_to_csv(&records)).unwrap();
    assert_eq!(again.dropped, 0);
    assert_eq!(again.records, records);
}

#[test]
fn binarization_exhaustive() {
    let mapped: Vec<u8> = (0..=4).map(binarize).collect();
    assert_eq!(mapped, vec![0, 1, 1, 1, 1]);
}

#[test]
fn categorical_out_of_range_names_row() {
    let text = "63,1,7,145,233,1,2,150,0,2.3,3,0,6,0\n";
    match parse_dataset(text) {
        Err(Error::InvalidCode { row, field, .. }) => {
            assert_eq!(row, 1);
            assert_eq!(field, "cp");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn wrong_column_count_rejected() {
    assert!(matches!(
        parse_dataset("63,1,1,145,233,1,2,150,0,2.3,3,0\n"),
        Err(Error::ColumnCount { .. })
    ));
}

#[test]
fn non_numeric_token_rejected() {
    assert!(matches!(
        parse_dataset("63,1,1,145,233,1,2,150,0,2.3,3,0,6,0\n63,1,1,145,abc,1,2,150,0,2.3,3,0,6,0\n"),
        Err(Error::NotNumeric { row: 2, .. })
    ));
}

#[test]
fn header_with_id_column() {
    let text = "id,age,sex,cp,trestbps,chol,fbs,restecg,thalach,exang,oldpeak,slope,ca,thal,num\n\
                p-1,63,1,1,145,233,1,2,150,0,2.3,3,0,6,3\n\
                p-2,67,1,4,160,286,0,2,108,1,1.5,2,?,3,2\n";
    let loaded = parse_dataset(text).unwrap();
    assert_eq!(loaded.records.len(), 1);
    assert_eq!(loaded.dropped, 1);
    assert_eq!(loaded.records[0].patient_id.as_deref(), Some("p-1"));
    assert_eq!(loaded.records[0].label(), Some(1));
}

#[test]
fn two_records_split_one_each() {
    let records = cleveland()[..2].to_vec();
    let s = split_train_test(&records, 0, 1).unwrap();
    assert_eq!((s.train_index.len(), s.test_index.len()), (1, 1));
    assert_ne!(s.train_index[0], s.test_index[0]);
    assert!(split_train_test(&records, 0, 2).is_err());
    assert!(split_train_test(&records, 0, 0).is_err());
}

#[test]
fn minmax_examples() {
    let train = Matrix::from_rows(&[[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]]).unwrap();
    let s = fit_minmax(&train).unwrap();
    assert_eq!((s.mins.clone(), s.maxs.clone()), (vec![2.0, 5.0], vec![6.0, 5.0]));
    let t = s.transform(&train).unwrap();
    assert_eq!(t.column(0).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
    assert_eq!(t.column(1).collect::<Vec<_>>(), vec![0.0; 3]);
    assert_eq!(s.transform_value(0, 8.0), 1.5);
    assert!(s.transform(&Matrix::zeros(1, 3)).is_err());
    assert!(fit_minmax(&Matrix::zeros(0, 2)).is_err());
}

#[test]
fn cleveland_scaler_shape() {
    let records = cleveland();
    let s = split_train_test(&records, 1, 236).unwrap();
    let scaler = fit_minmax(&s.x_train).unwrap();
    assert_eq!(scaler.n_features(), N_FEATURES);
    assert!(scaler.mins.iter().zip(&scaler.maxs).all(|(a, b)| b >= a));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_a_partition(seed in any::<u64>(), train in 1usize..297) {
        let records = cleveland();
        let s = split_train_test(&records, seed, train).unwrap();
        let all: BTreeSet<usize> = s.train_index.iter().chain(&s.test_index).copied().collect();
        prop_assert_eq!(all.len(), records.len());
        prop_assert_eq!(all.into_iter().collect::<Vec<_>>(), (0..records.len()).collect::<Vec<_>>());
        prop_assert_eq!(s.x_train.n_rows() + s.x_test.n_rows(), records.len());
        let again = split_train_test(&records, seed, train).unwrap();
        prop_assert_eq!(again.train_index, s.train_index);
    }

    #[test]
    fn scaled_training_data_in_unit_box(
        rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 4), 1..30)
    ) {
        let x = Matrix::from_rows(&rows).unwrap();
        let s = fit_minmax(&x).unwrap();
        let t = s.transform(&x).unwrap();
        for j in 0..4 {
            for v in t.column(j) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

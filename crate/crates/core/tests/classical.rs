use cardiodx_core::classical::{train_gaussian_nb, train_linear_svm, KnnModel, LinearSvmModel};
use cardiodx_core::rng::SplitMix64;
use cardiodx_core::Matrix;
use proptest::prelude::*;

fn random_labelled(seed: u64, n: usize, d: usize) -> (Matrix, Vec<u8>) {
    let mut rng = SplitMix64::new(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.next_f64() * 4.0 - 2.0).collect()).collect();
    let mut y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] > 0.0)).collect();
    y[0] = 0;
    y[1] = 1;
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn knn_examples() {
    let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [10.0]]).unwrap();
    let y = [1, 1, 0, 0];
    let m1 = KnnModel::fit(&x, &y, 1).unwrap();
    assert_eq!(m1.classify(&[2.0]).unwrap(), (0, 0.0));
    let m3 = KnnModel::fit(&x, &y, 3).unwrap();
    let (label, frac) = m3.classify(&[0.5]).unwrap();
    assert_eq!(label, 1);
    assert!((frac - 2.0 / 3.0).abs() < 1e-15);
    assert!(m3.classify(&[0.5, 1.0]).is_err());
    assert!(KnnModel::fit(&x, &y, 5).is_err());
    assert!(KnnModel::fit(&x, &y, 0).is_err());
}

#[test]
fn knn_tie_takes_lower_index() {
    // Rows 1 and 2 are both at distance 1 from the query; k = 2 keeps row 0 and row 1.
    let x = Matrix::from_rows(&[[0.0], [1.0], [-1.0]]).unwrap();
    let m = KnnModel::fit(&x, &[0, 1, 0], 2).unwrap();
    assert_eq!(m.classify(&[0.0]).unwrap(), (1, 0.5));
    let m = KnnModel::fit(&x, &[0, 0, 1], 2).unwrap();
    assert_eq!(m.classify(&[0.0]).unwrap(), (0, 0.0));
}

#[test]
fn nb_separated_classes() {
    let x = Matrix::from_rows(&[[-1.0], [0.0], [1.0], [9.0], [10.0], [11.0]]).unwrap();
    let m = train_gaussian_nb(&x, &[0, 0, 0, 1, 1, 1]).unwrap();
    assert!(m.posteriors(&[0.0]).unwrap()[0] > 0.999);
    // Midway with equal priors and spreads.
    let p = m.posteriors(&[5.0]).unwrap();
    assert!((p[0] - 0.5).abs() < 1e-12);
}

#[test]
fn nb_single_class_rejected() {
    let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
    assert!(train_gaussian_nb(&x, &[1, 1]).is_err());
}

#[test]
fn nb_constant_feature_is_floored() {
    let x = Matrix::from_rows(&[[1.0, 3.0], [2.0, 3.0], [5.0, 3.0], [6.0, 3.0]]).unwrap();
    let m = train_gaussian_nb(&x, &[0, 0, 1, 1]).unwrap();
    assert!(m.variances.iter().flatten().all(|&v| v >= m.var_floor && v > 0.0));
    let p = m.posteriors(&[1.5, 3.0]).unwrap();
    assert!(p.iter().all(|v| v.is_finite()));
}

#[test]
fn svm_separable_toy() {
    let mut rng = SplitMix64::new(2);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..20 {
        let centre = if i % 2 == 0 { 0.0 } else { 10.0 };
        rows.push((0..3).map(|_| centre + rng.next_f64() - 0.5).collect::<Vec<f64>>());
        y.push((i % 2) as u8);
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let m = train_linear_svm(&x, &y, 0.01, 200, 7).unwrap();
    let hits = x.rows().zip(&y).filter(|(r, &l)| m.classify(r).unwrap() == l).count();
    assert_eq!(hits, 20);
    assert_eq!(m, train_linear_svm(&x, &y, 0.01, 200, 7).unwrap());
}

#[test]
fn svm_boundary_is_positive() {
    let m = LinearSvmModel { weights: vec![1.0, -1.0], bias: 0.0, lambda: 0.1, epochs: 1, seed: 0 };
    assert_eq!(m.decision(&[2.0, 2.0]).unwrap(), 0.0);
    assert_eq!(m.classify(&[2.0, 2.0]).unwrap(), 1);
}

#[test]
fn svm_rejects_bad_lambda() {
    let (x, y) = random_labelled(1, 10, 2);
    assert!(train_linear_svm(&x, &y, 0.0, 10, 0).is_err());
    assert!(train_linear_svm(&x, &[1; 10], 0.1, 10, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn knn_full_k_predicts_majority(seed in any::<u64>(), n in 3usize..25) {
        let (x, y) = random_labelled(seed, n, 3);
        let m = KnnModel::fit(&x, &y, n).unwrap();
        let ones = y.iter().filter(|&&v| v == 1).count();
        let majority = u8::from(2 * ones >= n);
        let mut rng = SplitMix64::new(seed ^ 1);
        for _ in 0..5 {
            let q: Vec<f64> = (0..3).map(|_| rng.next_f64() * 8.0 - 4.0).collect();
            prop_assert_eq!(m.classify(&q).unwrap().0, majority);
        }
    }

    #[test]
    fn nb_posteriors_normalised_and_duplication_invariant(seed in any::<u64>(), n in 4usize..30) {
        let (x, y) = random_labelled(seed, n, 3);
        let m = train_gaussian_nb(&x, &y).unwrap();
        let idx: Vec<usize> = (0..n).chain(0..n).collect();
        let y2: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
        let m2 = train_gaussian_nb(&x.select_rows(&idx), &y2).unwrap();
        prop_assert!((m.priors[0] + m.priors[1] - 1.0).abs() < 1e-12);
        for row in x.rows() {
            let p = m.posteriors(row).unwrap();
            let p2 = m2.posteriors(row).unwrap();
            prop_assert!((p[0] + p[1] - 1.0).abs() <= 1e-12);
            prop_assert!((p[1] - p2[1]).abs() <= 1e-9);
        }
    }

    #[test]
    fn svm_label_invariant_under_positive_scaling(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let (x, y) = random_labelled(seed, 20, 3);
        let m = train_linear_svm(&x, &y, 0.05, 20, seed).unwrap();
        let scaled = LinearSvmModel {
            weights: m.weights.iter().map(|w| w * scale).collect(),
            bias: m.bias * scale,
            ..m.clone()
        };
        for row in x.rows() {
            prop_assert_eq!(m.classify(row).unwrap(), scaled.classify(row).unwrap());
        }
    }
}

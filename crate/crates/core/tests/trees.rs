use std::collections::BTreeSet;

use cardiodx_core::rng::SplitMix64;
use cardiodx_core::tree::{
    bootstrap_indices, grow_tree, impurity, train_adaboost, train_bagging, train_extra_trees,
    train_gradient_boosting, train_random_forest, Criterion, MaxFeatures, Node, Tree, TreeConfig,
};
use cardiodx_core::Matrix;
use proptest::prelude::*;

fn step() -> (Matrix, Vec<u8>) {
    let xs: Vec<[f64; 1]> = (0..10).map(|i| [i as f64]).collect();
    (Matrix::from_rows(&xs).unwrap(), (0..10).map(|i| u8::from(i >= 5)).collect())
}

fn xor() -> (Matrix, Vec<u8>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            for _ in 0..3 {
                rows.push([a as f64, b as f64]);
                y.push(u8::from(a != b));
            }
        }
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn random_data(seed: u64, n: usize, d: usize) -> (Matrix, Vec<u8>) {
    let mut rng = SplitMix64::new(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| (rng.below(12) as f64) / 2.0).collect())
        .collect();
    let y = rows
        .iter()
        .map(|r| u8::from(r[0] + r[d - 1] > 5.0 || rng.next_f64() < 0.15))
        .collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn train_accuracy(predict: impl Fn(&[f64]) -> u8, x: &Matrix, y: &[u8]) -> f64 {
    x.rows().zip(y).filter(|(r, &l)| predict(r) == l).count() as f64 / y.len() as f64
}

#[test]
fn impurity_examples() {
    for c in [Criterion::Gini, Criterion::Entropy] {
        assert_eq!(impurity(&[1, 1, 1], c).unwrap(), 0.0);
    }
    assert_eq!(impurity(&[1, 1, 0, 0], Criterion::Gini).unwrap(), 0.5);
    assert_eq!(impurity(&[1, 1, 0, 0], Criterion::Entropy).unwrap(), 1.0);
    assert!(impurity(&[], Criterion::Gini).is_err());
}

#[test]
fn pure_input_is_a_leaf() {
    let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
    let t = grow_tree(&x, &[1, 1, 1], &TreeConfig::default(), &mut SplitMix64::new(0)).unwrap();
    assert_eq!(t.nodes().len(), 1);
    let f = train_extra_trees(&x, &[0, 0, 0], &TreeConfig::default(), 3, 9, false).unwrap();
    assert!(f.trees.iter().all(|t| t.nodes().len() == 1));
}

#[test]
fn step_split_at_midpoint() {
    let (x, y) = step();
    let t = grow_tree(&x, &y, &TreeConfig::default(), &mut SplitMix64::new(0)).unwrap();
    match t.nodes()[0] {
        Node::Split { feature, threshold, .. } => assert_eq!((feature, threshold), (0, 4.5)),
        ref other => panic!("root is {other:?}"),
    }
    assert_eq!(train_accuracy(|r| t.classify(r), &x, &y), 1.0);
}

#[test]
fn stump_cannot_fit_xor() {
    let (x, y) = xor();
    let cfg = TreeConfig { max_depth: 1, ..Default::default() };
    let t = grow_tree(&x, &y, &cfg, &mut SplitMix64::new(0)).unwrap();
    assert!(train_accuracy(|r| t.classify(r), &x, &y) <= 0.75);
    let deep = grow_tree(&x, &y, &TreeConfig::default(), &mut SplitMix64::new(0)).unwrap();
    assert_eq!(train_accuracy(|r| deep.classify(r), &x, &y), 1.0);
}

#[test]
fn max_features_counts() {
    assert_eq!(MaxFeatures::Sqrt.count(13), 4);
    assert_eq!(MaxFeatures::Log2.count(13), 4);
    assert_eq!(MaxFeatures::All.count(13), 13);
    assert_eq!("auto".parse::<MaxFeatures>().unwrap(), MaxFeatures::Sqrt);
}

#[test]
fn single_leaf_score() {
    let t = Tree::leaf(2, [3.0, 1.0], 0.25, 4);
    assert_eq!(t.value(&[7.0, -1.0]), 0.25);
    assert_eq!(t.classify(&[0.0, 0.0]), 0);
}

#[test]
fn extra_trees_fit_step() {
    let (x, y) = step();
    let f = train_extra_trees(&x, &y, &TreeConfig::default(), 25, 3, false).unwrap();
    assert_eq!(train_accuracy(|r| u8::from(f.score(r) >= 0.5), &x, &y), 1.0);
}

#[test]
fn bootstrap_unique_fraction() {
    let n = 200;
    let mut total = 0.0;
    for seed in 0..1000 {
        let idx = bootstrap_indices(n, &mut SplitMix64::new(seed));
        assert_eq!(idx.len(), n);
        total += idx.iter().collect::<BTreeSet<_>>().len() as f64 / n as f64;
    }
    let expected = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32);
    assert!((total / 1000.0 - expected).abs() < 0.005);
    assert!((expected - (1.0 - (-1.0f64).exp())).abs() < 0.002);
}

#[test]
fn forest_identical_across_thread_counts() {
    let (x, y) = random_data(3, 80, 5);
    let cfg = TreeConfig { max_features: MaxFeatures::Sqrt, ..Default::default() };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train_random_forest(&x, &y, &cfg, 12, 99, true).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(7));
}

#[test]
fn adaboost_error_non_increasing_on_step() {
    let (x, y) = step();
    let (_, trace) = train_adaboost(&x, &y, 10, 0).unwrap();
    assert!(!trace.train_errors.is_empty());
    for w in trace.train_errors.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn adaboost_on_noisy_data_error_non_increasing() {
    let xs: Vec<[f64; 1]> = (0..20).map(|i| [i as f64]).collect();
    let x = Matrix::from_rows(&xs).unwrap();
    let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10) ^ u8::from(i == 3 || i == 15)).collect();
    let (model, trace) = train_adaboost(&x, &y, 8, 0).unwrap();
    assert!(!model.stumps.is_empty());
    assert!(trace.train_errors.last().unwrap() <= &trace.train_errors[0]);
}

fn check_tree(t: &Tree, cfg: &TreeConfig) -> Result<(), TestCaseError> {
    prop_assert!(t.depth() <= cfg.max_depth);
    for n in t.nodes() {
        match n {
            Node::Leaf { samples, .. } => prop_assert!(*samples >= cfg.min_samples_leaf),
            Node::Split { samples, .. } => prop_assert!(*samples >= cfg.min_samples_split),
        }
    }
    Ok(())
}

fn tree_config() -> impl Strategy<Value = TreeConfig> {
    (
        prop_oneof![Just(Criterion::Gini), Just(Criterion::Entropy)],
        1usize..8,
        2usize..10,
        1usize..6,
        prop_oneof![Just(MaxFeatures::Sqrt), Just(MaxFeatures::Log2), Just(MaxFeatures::All)],
    )
        .prop_map(|(criterion, max_depth, min_samples_split, min_samples_leaf, max_features)| TreeConfig {
            criterion,
            max_depth,
            min_samples_split,
            min_samples_leaf,
            max_features,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grown_trees_respect_config(seed in any::<u64>(), cfg in tree_config(), n in 5usize..60) {
        let (x, y) = random_data(seed, n, 4);
        let t = grow_tree(&x, &y, &cfg, &mut SplitMix64::new(seed)).unwrap();
        check_tree(&t, &cfg)?;
        let f = train_extra_trees(&x, &y, &cfg, 3, seed, false).unwrap();
        for t in &f.trees {
            check_tree(t, &cfg)?;
        }
    }

    #[test]
    fn unbounded_trees_fit_consistent_data(seed in any::<u64>(), n in 2usize..50) {
        let (x, y) = random_data(seed, n, 3);
        // Keep the first label seen for each distinct row so the data is consistent.
        let mut seen: Vec<(Vec<f64>, u8)> = Vec::new();
        let y: Vec<u8> = x.rows().zip(&y).map(|(r, &l)| {
            match seen.iter().find(|(v, _)| v.as_slice() == r) {
                Some((_, first)) => *first,
                None => { seen.push((r.to_vec(), l)); l }
            }
        }).collect();
        for criterion in [Criterion::Gini, Criterion::Entropy] {
            let cfg = TreeConfig { criterion, max_depth: n, ..Default::default() };
            let t = grow_tree(&x, &y, &cfg, &mut SplitMix64::new(seed)).unwrap();
            prop_assert_eq!(train_accuracy(|r| t.classify(r), &x, &y), 1.0);
        }
    }

    #[test]
    fn forest_of_one_is_a_tree(seed in any::<u64>(), cfg in tree_config()) {
        let (x, y) = random_data(seed, 40, 5);
        let cfg = TreeConfig { max_features: MaxFeatures::All, ..cfg };
        let f = train_random_forest(&x, &y, &cfg, 1, seed, false).unwrap();
        let t = grow_tree(&x, &y, &cfg, &mut SplitMix64::new(0)).unwrap();
        for row in x.rows() {
            prop_assert_eq!(f.score(row), f64::from(t.classify(row)));
        }
        prop_assert_eq!(&f.trees[0], &t);
    }

    #[test]
    fn bagging_is_full_feature_forest(seed in any::<u64>(), cfg in tree_config(), n_est in 1usize..6) {
        let (x, y) = random_data(seed, 40, 5);
        let b = train_bagging(&x, &y, &cfg, n_est, seed, true).unwrap();
        let all = TreeConfig { max_features: MaxFeatures::All, ..cfg };
        let f = train_random_forest(&x, &y, &all, n_est, seed, true).unwrap();
        for row in x.rows() {
            prop_assert_eq!(b.score(row), f.score(row));
        }
    }

    #[test]
    fn gbm_zero_rate_is_base_rate(seed in any::<u64>(), n_stages in 0usize..5) {
        let (x, y) = random_data(seed, 30, 3);
        prop_assume!(y.contains(&0) && y.contains(&1));
        let rate = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
        let m = train_gradient_boosting(&x, &y, n_stages, 0.0, &TreeConfig::default(), seed).unwrap();
        for row in x.rows() {
            prop_assert!((m.score(row) - rate).abs() < 1e-12);
        }
    }

    #[test]
    fn vote_label_matches_score(seed in any::<u64>(), n_est in 1usize..9) {
        let (x, y) = random_data(seed, 30, 4);
        let f = train_random_forest(&x, &y, &TreeConfig::default(), n_est, seed, true).unwrap();
        for row in x.rows() {
            let votes = f.trees.iter().filter(|t| t.classify(row) == 1).count();
            prop_assert_eq!(2 * votes >= n_est, f.score(row) >= 0.5);
        }
    }
}

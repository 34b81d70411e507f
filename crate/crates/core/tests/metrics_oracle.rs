use cardiodx_core::evaluation::{accuracy, confusion_counts, mcc, roc_curve_auc, ConfusionCounts};
use num_bigint::BigInt;
use proptest::prelude::*;

/// P(score_pos > score_neg) + 0.5 · P(tie), by enumerating every pair.
fn pairwise_auc(y: &[u8], s: &[f64]) -> f64 {
    let (mut wins2, mut pairs) = (0u64, 0u64);
    for i in (0..y.len()).filter(|&i| y[i] == 1) {
        for j in (0..y.len()).filter(|&j| y[j] == 0) {
            pairs += 1;
            wins2 += match s[i].partial_cmp(&s[j]).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    wins2 as f64 / (2 * pairs) as f64
}

/// MCC from the exact integer numerator and radicand; only the final
/// square root and division are in floating point.
fn bigint_mcc(c: &ConfusionCounts) -> f64 {
    let b = |v: u64| BigInt::from(v);
    let (tp, fp, tn, fn_) = (b(c.true_pos), b(c.false_pos), b(c.true_neg), b(c.false_neg));
    let num = &tp * &tn - &fp * &fn_;
    let den = (&tp + &fp) * (&tp + &fn_) * (&tn + &fp) * (&tn + &fn_);
    if den == BigInt::from(0) {
        return 0.0;
    }
    let num: f64 = num.to_string().parse().unwrap();
    let den: f64 = den.to_string().parse().unwrap();
    num / den.sqrt()
}

fn instance() -> impl Strategy<Value = (Vec<u8>, Vec<f64>, Vec<u8>)> {
    (2usize..=30).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..=1, n),
            // Coarse scores so ties are common.
            prop::collection::vec((0u8..8).prop_map(|v| v as f64 / 8.0), n),
            prop::collection::vec(0u8..=1, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auc_matches_pairwise((mut y, s, _) in instance()) {
        y[0] = 0;
        y[1] = 1;
        let roc = roc_curve_auc(&y, &s).unwrap();
        prop_assert!((roc.auc - pairwise_auc(&y, &s)).abs() <= 1e-12);
        let pts: Vec<(f64, f64)> = roc.points().collect();
        prop_assert_eq!(pts[0], (0.0, 0.0));
        prop_assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
        for w in pts.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn mcc_matches_bigint((y, _, p) in instance()) {
        let c = confusion_counts(&y, &p).unwrap();
        prop_assert_eq!(c.total() as usize, y.len());
        prop_assert!((mcc(&c) - bigint_mcc(&c)).abs() <= 1e-12);
    }

    #[test]
    fn mcc_sign_flip((y, _, p) in instance()) {
        let flipped: Vec<u8> = p.iter().map(|v| 1 - v).collect();
        let a = mcc(&confusion_counts(&y, &p).unwrap());
        let b = mcc(&confusion_counts(&y, &flipped).unwrap());
        prop_assert_eq!(a, -b);
    }

    #[test]
    fn accuracy_complement((y, _, p) in instance()) {
        let flipped: Vec<u8> = p.iter().map(|v| 1 - v).collect();
        let total = accuracy(&y, &p).unwrap() + accuracy(&y, &flipped).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_map((mut y, s, _) in instance()) {
        y[0] = 0;
        y[1] = 1;
        let a = roc_curve_auc(&y, &s).unwrap();
        let mapped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        let b = roc_curve_auc(&y, &mapped).unwrap();
        prop_assert_eq!(a.auc, b.auc);
        prop_assert_eq!(a.fpr, b.fpr);
        prop_assert_eq!(a.tpr, b.tpr);
    }

    #[test]
    fn auc_negation(
        (mut y, s) in (2usize..=30).prop_flat_map(|n| (
            prop::collection::vec(0u8..=1, n),
            Just((0..n).map(|i| i as f64).collect::<Vec<f64>>()).prop_shuffle(),
        ))
    ) {
        y[0] = 0;
        y[1] = 1;
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let total = roc_curve_auc(&y, &s).unwrap().auc + roc_curve_auc(&y, &neg).unwrap().auc;
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn confusion_example() {
    let c = confusion_counts(&[1, 0, 1, 0], &[1, 0, 0, 0]).unwrap();
    assert_eq!((c.true_pos, c.true_neg, c.false_neg, c.false_pos), (1, 2, 1, 0));
    assert_eq!(c.accuracy().unwrap(), 0.75);
}

#[test]
fn mcc_endpoints_and_example() {
    let y = [1, 0, 1, 1, 0];
    let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
    assert_eq!(mcc(&confusion_counts(&y, &y).unwrap()), 1.0);
    assert_eq!(mcc(&confusion_counts(&y, &flipped).unwrap()), -1.0);
    let c = ConfusionCounts { true_pos: 1, true_neg: 2, false_pos: 1, false_neg: 1 };
    assert!((mcc(&c) - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn auc_examples() {
    assert_eq!(roc_curve_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap().auc, 1.0);
    assert_eq!(roc_curve_auc(&[0, 1, 0, 1], &[0.3; 4]).unwrap().auc, 0.5);
    assert_eq!(roc_curve_auc(&[1, 0, 1], &[0.9, 0.8, 0.7]).unwrap().auc, 0.5);
    assert!(roc_curve_auc(&[1, 1], &[0.2, 0.3]).is_err());
}

#[test]
fn roc_csv_header() {
    let roc = roc_curve_auc(&[0, 1], &[0.2, 0.7]).unwrap();
    assert!(roc.to_csv().starts_with("threshold,fpr,tpr\n"));
}

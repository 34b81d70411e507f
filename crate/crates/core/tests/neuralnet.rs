use cardiodx_core::neuralnet::{
    bce_loss, build_network, glorot_bound, train_sgd, train_with_schedule, Network, NetworkSpec,
    TrainConfig,
};
use cardiodx_core::rng::SplitMix64;
use cardiodx_core::Matrix;
use proptest::prelude::*;

fn random_batch(rng: &mut SplitMix64, rows: usize, cols: usize) -> (Matrix, Vec<u8>) {
    let data: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.next_f64()).collect()).collect();
    let y = (0..rows).map(|_| u8::from(rng.next_f64() < 0.5)).collect();
    (Matrix::from_rows(&data).unwrap(), y)
}

fn loss(net: &Network, x: &Matrix, y: &[u8]) -> f64 {
    bce_loss(&net.predict_proba(x).unwrap(), y).unwrap()
}

/// Largest relative error between analytic and central-difference gradients.
fn max_gradient_error(net: &Network, x: &Matrix, y: &[u8]) -> f64 {
    let h = 1e-5;
    let grads = net.backprop(x, y).unwrap();
    let mut worst: f64 = 0.0;
    for (k, layer) in net.layers.iter().enumerate() {
        let n_w = layer.weights.len();
        for p in 0..n_w + layer.bias.len() {
            let nudge = |delta: f64| {
                let mut m = net.clone();
                let l = &mut m.layers[k];
                if p < n_w { l.weights[p] += delta } else { l.bias[p - n_w] += delta }
                loss(&m, x, y)
            };
            let numeric = (nudge(h) - nudge(-h)) / (2.0 * h);
            let analytic = if p < n_w { grads.layers[k].weights[p] } else { grads.layers[k].bias[p - n_w] };
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    worst
}

#[test]
fn gradient_check_fifty_pairs() {
    let mut rng = SplitMix64::new(2024);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let net = build_network(&NetworkSpec::default(), 1000 + i).unwrap();
        let (x, y) = random_batch(&mut rng, 8, 13);
        worst = worst.max(max_gradient_error(&net, &x, &y));
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn output_bias_gradient_is_mean_residual() {
    let mut rng = SplitMix64::new(5);
    let net = build_network(&NetworkSpec::default(), 3).unwrap();
    let (x, y) = random_batch(&mut rng, 6, 13);
    let p = net.predict_proba(&x).unwrap();
    let expected = p.iter().zip(&y).map(|(p, &t)| p - f64::from(t)).sum::<f64>() / 6.0;
    let g = net.backprop(&x, &y).unwrap();
    assert!((g.layers[2].bias[0] - expected).abs() < 1e-15);
}

#[test]
fn glorot_bounds_hold() {
    let spec = NetworkSpec::default();
    for seed in 0..200 {
        let net = build_network(&spec, seed).unwrap();
        for l in &net.layers {
            let b = glorot_bound(l.inputs, l.outputs);
            assert!(l.weights.iter().all(|w| w.abs() <= b));
            assert!(l.bias.iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn separable_toy_reaches_full_accuracy() {
    let mut rng = SplitMix64::new(11);
    let rows: Vec<[f64; 2]> = (0..40).map(|_| [rng.next_f64(), rng.next_f64()]).collect();
    let keep: Vec<[f64; 2]> = rows.into_iter().filter(|r| (r[0] + r[1] - 1.0).abs() > 0.15).collect();
    let y: Vec<u8> = keep.iter().map(|r| u8::from(r[0] + r[1] > 1.0)).collect();
    let x = Matrix::from_rows(&keep).unwrap();
    let net = build_network(&NetworkSpec::with_hidden(2, &[8, 5]), 1).unwrap();
    let cfg = TrainConfig { epochs: 500, learning_rate: 0.1, seed: 1, ..Default::default() };
    let (_, history) = train_sgd(&net, &x, &y, &cfg, None).unwrap();
    assert_eq!(history.loss.len(), 500);
    assert_eq!(*history.train_accuracy.last().unwrap(), 1.0);
}

#[test]
fn small_full_batch_step_does_not_increase_loss() {
    let mut rng = SplitMix64::new(77);
    let net = build_network(&NetworkSpec::default(), 77).unwrap();
    let (x, y) = random_batch(&mut rng, 32, 13);
    let before = loss(&net, &x, &y);
    let mut stepped = net.clone();
    stepped.apply_gradients(&net.backprop(&x, &y).unwrap(), 1e-3);
    assert!(loss(&stepped, &x, &y) <= before);
}

#[test]
fn training_is_deterministic() {
    let mut rng = SplitMix64::new(4);
    let (x, y) = random_batch(&mut rng, 30, 13);
    let net = build_network(&NetworkSpec::default(), 4).unwrap();
    let cfg = TrainConfig { epochs: 20, seed: 4, ..Default::default() };
    let a = train_sgd(&net, &x, &y, &cfg, None).unwrap();
    let b = train_sgd(&net, &x, &y, &cfg, None).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

#[test]
fn permuted_rows_with_matching_schedule_train_identically() {
    let mut rng = SplitMix64::new(9);
    let (x, y) = random_batch(&mut rng, 20, 13);
    let net = build_network(&NetworkSpec::default(), 9).unwrap();
    let cfg = TrainConfig { epochs: 6, ..Default::default() };

    let mut perm: Vec<usize> = (0..20).collect();
    SplitMix64::new(123).shuffle(&mut perm);
    // Row i of the permuted set is row perm[i] of the original.
    let xp = x.select_rows(&perm);
    let yp: Vec<u8> = perm.iter().map(|&i| y[i]).collect();
    let mut inverse = vec![0; 20];
    for (i, &p) in perm.iter().enumerate() {
        inverse[p] = i;
    }

    let orders: Vec<Vec<usize>> = (0..cfg.epochs)
        .map(|e| {
            let mut o: Vec<usize> = (0..20).collect();
            SplitMix64::new(e as u64).shuffle(&mut o);
            o
        })
        .collect();
    let (a, _) = train_with_schedule(&net, &x, &y, &cfg, None, |e| orders[e].clone()).unwrap();
    let (b, _) = train_with_schedule(&net, &xp, &yp, &cfg, None, |e| {
        orders[e].iter().map(|&i| inverse[i]).collect()
    })
    .unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_output_in_open_interval(
        seed in any::<u64>(),
        row in prop::collection::vec(-50f64..50.0, 13),
    ) {
        let net = build_network(&NetworkSpec::default(), seed).unwrap();
        let p = net.predict_proba(&Matrix::from_rows(&[row]).unwrap()).unwrap()[0];
        prop_assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn bce_non_negative(
        pairs in prop::collection::vec((0f64..=1.0, 0u8..=1), 1..40)
    ) {
        let (p, y): (Vec<f64>, Vec<u8>) = pairs.into_iter().unzip();
        prop_assert!(bce_loss(&p, &y).unwrap() >= 0.0);
    }
}

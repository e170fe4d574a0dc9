use super::*;
use ndarray::{array, Array1, Array2};
use rand::Rng;

fn random_data(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Direct per-row composition with explicit loops.
fn reference_forward(net: &FeedForwardNet, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for l in net.layers() {
        let mut next = vec![0.0; l.output_dim()];
        for (o, v) in next.iter_mut().enumerate() {
            let mut z = l.bias[o];
            for (i, ai) in a.iter().enumerate() {
                z += l.weights[[o, i]] * ai;
            }
            *v = if l.activation == Activation::Tanh { z.tanh() } else { z };
        }
        a = next;
    }
    a
}

fn loss_at(net: &FeedForwardNet, params: &[f64], x: &Array2<f64>, t: &Array2<f64>, l1: f64) -> f64 {
    let mut probe = net.clone();
    probe.set_parameters(params).unwrap();
    loss_and_gradient(&probe, x.view(), t.view(), l1).unwrap().0
}

fn max_gradient_error(dims: &[usize], l1: f64, seed: u64) -> f64 {
    let net = FeedForwardNet::init_random(dims, seed).unwrap();
    let x = random_data(5, dims[0], seed + 1);
    let t = random_data(5, dims[dims.len() - 1], seed + 2);
    let analytic = loss_and_gradient(&net, x.view(), t.view(), l1).unwrap().1.to_flat();
    let params = net.parameters();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        if l1 > 0.0 && params[i].abs() < 10.0 * eps {
            continue;
        }
        let mut p = params.clone();
        p[i] += eps;
        let up = loss_at(&net, &p, &x, &t, l1);
        p[i] -= 2.0 * eps;
        let down = loss_at(&net, &p, &x, &t, l1);
        let numeric = (up - down) / (2.0 * eps);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-4);
        worst = worst.max(rel);
    }
    worst
}

#[test]
fn init_is_seeded_and_bounded() {
    let a = FeedForwardNet::init_random(&[7, 5, 3], 4).unwrap();
    let b = FeedForwardNet::init_random(&[7, 5, 3], 4).unwrap();
    assert_eq!(a, b);
    for l in a.layers() {
        let r = (6.0 / (l.input_dim() + l.output_dim()) as f64).sqrt();
        assert!(l.weights.iter().all(|w| w.abs() <= r));
        assert!(l.bias.iter().all(|&b| b == 0.0));
    }
    assert_eq!(a.layers()[0].activation, Activation::Tanh);
    assert_eq!(a.layers()[1].activation, Activation::Linear);
    assert!(FeedForwardNet::init_random(&[3], 0).is_err());
    assert!(FeedForwardNet::init_random(&[], 0).is_err());
}

#[test]
fn invalid_chains_rejected() {
    let l1 = Layer::new(Array2::zeros((3, 2)), Array1::zeros(3), Activation::Tanh).unwrap();
    let l2 = Layer::new(Array2::zeros((1, 4)), Array1::zeros(1), Activation::Linear).unwrap();
    assert!(FeedForwardNet::new(vec![l1.clone(), l2]).is_err());
    assert!(FeedForwardNet::new(vec![l1]).is_err());
}

#[test]
fn zero_net_outputs_zero() {
    let l = Layer::new(Array2::zeros((2, 3)), Array1::zeros(2), Activation::Tanh).unwrap();
    let o = Layer::new(Array2::zeros((4, 2)), Array1::zeros(4), Activation::Linear).unwrap();
    let net = FeedForwardNet::new(vec![l, o]).unwrap();
    assert_eq!(net.forward(array![1.0, -5.0, 3.0].view()).unwrap(), Array1::<f64>::zeros(4));
}

#[test]
fn single_linear_layer_is_affine() {
    let w = array![[1.0, 2.0], [-0.5, 0.25]];
    let b = array![0.5, -1.0];
    let net = FeedForwardNet::new(vec![Layer::new(w.clone(), b.clone(), Activation::Linear).unwrap()]).unwrap();
    let x = array![3.0, -2.0];
    assert_eq!(net.forward(x.view()).unwrap(), w.dot(&x) + &b);
}

#[test]
fn forward_matches_direct_composition() {
    let net = FeedForwardNet::init_random(&[6, 9, 4, 3], 12).unwrap();
    let x = random_data(10, 6, 3);
    let batch = net.forward_batch(x.view()).unwrap();
    for (i, row) in x.rows().into_iter().enumerate() {
        let reference = reference_forward(&net, row.as_slice().unwrap());
        for (a, b) in batch.row(i).iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    assert!(net.forward(array![1.0].view()).is_err());
}

#[test]
fn gradient_matches_finite_differences() {
    assert!(max_gradient_error(&[4, 3, 2], 0.0, 1) < 1e-6);
    assert!(max_gradient_error(&[3, 5, 4, 2], 0.0, 2) < 1e-6);
}

#[test]
fn l1_gradient_matches_finite_differences() {
    assert!(max_gradient_error(&[4, 3, 2], 0.05, 5) < 1e-6);
}

#[test]
fn l1_subgradient_at_zero_is_zero() {
    let w = array![[0.0, 1.0]];
    let net = FeedForwardNet::new(vec![Layer::new(w, array![0.0], Activation::Linear).unwrap()]).unwrap();
    let x = array![[0.0, 0.0]];
    let t = array![[0.0]];
    let (loss, g) = loss_and_gradient(&net, x.view(), t.view(), 0.5).unwrap();
    assert_eq!(loss, 0.5);
    assert_eq!(g.weights[0], array![[0.0, 0.5]]);
    assert_eq!(g.biases[0], array![0.0]);
}

#[test]
fn learns_identity() {
    let x = Array2::from_shape_fn((100, 1), |(i, _)| -1.0 + 2.0 * i as f64 / 99.0);
    let net = FeedForwardNet::init_random(&[1, 1], 3).unwrap();
    let config = TrainConfig {
        max_epochs: 200,
        batch_size: 10,
        ..Default::default()
    };
    let out = train(net, x.view(), x.view(), &config).unwrap();
    let y = out.net.forward_batch(x.view()).unwrap();
    let mse = (&y - &x).mapv(|d| d * d).mean().unwrap();
    assert!(mse < 1e-6, "{mse}");
    assert_eq!(out.epochs.len(), 200);
}

#[test]
fn full_batch_without_momentum_is_gradient_descent() {
    let net = FeedForwardNet::init_random(&[3, 4, 2], 9).unwrap();
    let x = random_data(8, 3, 1);
    let t = random_data(8, 2, 2);
    let config = TrainConfig {
        momentum: 0.0,
        batch_size: 8,
        max_epochs: 1,
        learning_rate: 0.05,
        ..Default::default()
    };
    let (_, g) = loss_and_gradient(&net, x.view(), t.view(), 0.0).unwrap();
    let expected: Vec<f64> = net
        .parameters()
        .iter()
        .zip(g.to_flat())
        .map(|(p, g)| p - 0.05 * g)
        .collect();
    let out = train(net, x.view(), t.view(), &config).unwrap();
    assert_eq!(out.net.parameters(), expected);
}

#[test]
fn training_is_reproducible() {
    let x = random_data(40, 3, 1);
    let t = random_data(40, 2, 2);
    let config = TrainConfig {
        max_epochs: 5,
        batch_size: 7,
        seed: 11,
        ..Default::default()
    };
    let run = || train(FeedForwardNet::init_random(&[3, 6, 2], 1).unwrap(), x.view(), t.view(), &config).unwrap();
    assert_eq!(run().net, run().net);
}

#[test]
fn divergence_is_reported() {
    let x = random_data(20, 2, 1) * 1e3;
    let t = random_data(20, 1, 2) * 1e3;
    let config = TrainConfig {
        learning_rate: 0.9,
        max_epochs: 50,
        ..Default::default()
    };
    let err = train(FeedForwardNet::init_random(&[2, 1], 0).unwrap(), x.view(), t.view(), &config).unwrap_err();
    assert!(matches!(err, crate::Error::Training(_)));
}

#[test]
fn bad_configs_rejected() {
    let x = random_data(4, 2, 1);
    let net = FeedForwardNet::init_random(&[2, 2], 0).unwrap();
    for config in [
        TrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        },
        TrainConfig {
            momentum: 1.0,
            ..Default::default()
        },
        TrainConfig {
            l1_lambda: -1.0,
            ..Default::default()
        },
    ] {
        assert!(train(net.clone(), x.view(), x.view(), &config).is_err());
    }
    let t = random_data(3, 2, 1);
    assert!(train(net, x.view(), t.view(), &TrainConfig::default()).is_err());
}

#[test]
fn early_stopping_keeps_best_validation_net() {
    let x = random_data(30, 2, 1);
    let t = random_data(30, 1, 2);
    let vx = random_data(10, 2, 3);
    let vt = random_data(10, 1, 4);
    let config = TrainConfig {
        max_epochs: 200,
        patience: Some(3),
        ..Default::default()
    };
    let out = train_with_validation(FeedForwardNet::init_random(&[2, 8, 1], 0).unwrap(), x.view(), t.view(), vx.view(), vt.view(), &config).unwrap();
    let best = out
        .epochs
        .iter()
        .filter_map(|e| e.validation_mse)
        .fold(f64::INFINITY, f64::min);
    let y = out.net.forward_batch(vx.view()).unwrap();
    let final_mse = (&y - &vt).mapv(|d| d * d).mean().unwrap();
    assert!((final_mse - best).abs() < 1e-12);
}

#[test]
fn autoencoder_pretraining_reduces_reconstruction_error() {
    let x = random_data(60, 6, 7);
    let recon = x.slice(ndarray::s![.., ..4]).to_owned();
    let net = FeedForwardNet::init_random(&[6, 10, 4], 2).unwrap();
    let before = (&net.forward_batch(x.view()).unwrap() - &recon).mapv(|d| d * d).mean().unwrap();
    let config = TrainConfig {
        max_epochs: 30,
        l1_lambda: 1e-4,
        ..Default::default()
    };
    let out = pretrain_autoencoder(net, x.view(), recon.view(), &config).unwrap();
    let after = (&out.net.forward_batch(x.view()).unwrap() - &recon).mapv(|d| d * d).mean().unwrap();
    assert!(after < before);
    assert_eq!(out.net.dims(), vec![6, 10, 4]);
}

#[test]
fn dlp_with_one_hidden_layer_equals_training() {
    let x = random_data(30, 3, 1);
    let t = random_data(30, 2, 2);
    let net = FeedForwardNet::init_random(&[3, 5, 2], 3).unwrap();
    let config = TrainConfig {
        max_epochs: 4,
        seed: 6,
        ..Default::default()
    };
    let a = pretrain_dlp(net.clone(), x.view(), t.view(), &config).unwrap();
    let b = train(net, x.view(), t.view(), &config).unwrap();
    assert_eq!(a.net, b.net);
}

#[test]
fn dlp_keeps_architecture_and_reduces_each_stage() {
    let x = random_data(50, 3, 1);
    let t = x.mapv(|v| (2.0 * v).sin()).slice(ndarray::s![.., ..2]).to_owned();
    let config = TrainConfig {
        max_epochs: 10,
        ..Default::default()
    };
    let out = pretrain_dlp(FeedForwardNet::init_random(&[3, 6, 5, 4, 2], 0).unwrap(), x.view(), t.view(), &config).unwrap();
    assert_eq!(out.net.dims(), vec![3, 6, 5, 4, 2]);
    assert_eq!(out.epochs.len(), 30);
    for stage in out.epochs.chunks(10) {
        assert!(stage[9].train_mse < stage[0].train_mse);
    }
}

#[test]
fn model_file_round_trip() {
    let net = FeedForwardNet::init_random(&[3, 4, 2], 5).unwrap();
    let data = random_data(10, 3, 0);
    let model = NetModel::new(net, Standardizer::fit(data.view()).unwrap(), Standardizer::identity(2)).unwrap();
    let bytes = io::encode(&model);
    let back = io::decode(&bytes).unwrap();
    assert_eq!(back, model);
    assert_eq!(io::encode(&back), bytes);
    assert!(io::decode(&bytes[..bytes.len() - 8]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(io::decode(&extra).is_err());
}

#[test]
fn standardizer_round_trips_and_handles_constant_columns() {
    let mut data = random_data(20, 3, 1);
    data.column_mut(2).fill(4.0);
    let s = Standardizer::fit(data.view()).unwrap();
    assert_eq!(s.std[2], 1.0);
    let z = s.apply(data.view());
    let back = s.invert(z.view());
    for (a, b) in back.iter().zip(data.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn shared_scale_preserves_relative_squared_error() {
    let data = random_data(30, 4, 2);
    let s = Standardizer::fit_shared_scale(data.view()).unwrap();
    assert!(s.std.iter().all(|&v| v == s.std[0]));
    let z = s.apply(data.view());
    let means = z.mean_axis(Axis(0)).unwrap();
    assert!(means.iter().all(|m| m.abs() < 1e-12));
    let avg_var = z.var_axis(Axis(0), 0.0).mean().unwrap();
    assert!((avg_var - 1.0).abs() < 1e-12);
    // distances scale uniformly
    let (a, b) = (data.row(0).to_owned() - data.row(1), z.row(0).to_owned() - z.row(1));
    let ratio = a.dot(&a) / b.dot(&b);
    assert!((ratio - s.std[0] * s.std[0]).abs() < 1e-9 * ratio);
}

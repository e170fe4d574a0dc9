use super::*;
use ndarray::{array, Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Gauss-Jordan inverse with partial pivoting, plus determinant.
pub(crate) fn gauss_jordan(a: &Array2<f64>) -> (Array2<f64>, f64) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = Array2::<f64>::eye(n);
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .unwrap();
        if piv != col {
            for c in 0..n {
                m.swap([piv, c], [col, c]);
                inv.swap([piv, c], [col, c]);
            }
            det = -det;
        }
        let p = m[[col, col]];
        det *= p;
        for c in 0..n {
            m[[col, c]] /= p;
            inv[[col, c]] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[[r, col]];
                for c in 0..n {
                    m[[r, c]] -= f * m[[col, c]];
                    inv[[r, c]] -= f * inv[[col, c]];
                }
            }
        }
    }
    (inv, det)
}

/// Direct conversion from the joint parameters without any cached factor.
pub(crate) fn reference_convert(model: &JointGmmModel, x: &Array1<f64>) -> Array1<f64> {
    let d = model.dim();
    let k = model.components();
    let mut dens = vec![0.0; k];
    let mut locals = Vec::new();
    for c in 0..k {
        let cov = &model.covariances()[c];
        let sxx = cov.slice(s![..d, ..d]).to_owned();
        let syx = cov.slice(s![d.., ..d]).to_owned();
        let (inv, det) = gauss_jordan(&sxx);
        let mu_x = model.means().slice(s![c, ..d]).to_owned();
        let mu_y = model.means().slice(s![c, d..]).to_owned();
        let diff = x - &mu_x;
        let q = diff.dot(&inv.dot(&diff));
        dens[c] = model.weights()[c] * (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powi(d as i32) * det).sqrt();
        locals.push(&mu_y + &syx.dot(&inv.dot(&diff)));
    }
    let total: f64 = dens.iter().sum();
    let mut y = Array1::zeros(d);
    for c in 0..k {
        y = y + &locals[c] * (dens[c] / total);
    }
    y
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let a = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
    let mut s = a.t().dot(&a) + Array2::<f64>::eye(n) * 0.5;
    for i in 0..n {
        for j in 0..i {
            s[[i, j]] = s[[j, i]];
        }
    }
    s
}

fn random_model(k: usize, d: usize, seed: u64) -> JointGmmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let means = Array2::from_shape_fn((k, 2 * d), |_| rng.random_range(-2.0..2.0));
    let covs = (0..k).map(|_| random_spd(2 * d, &mut rng)).collect();
    JointGmmModel::new(d, weights, means, covs).unwrap()
}

fn linear_data(n: usize, d: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |_| gauss(&mut rng));
    let a = Array2::from_shape_fn((d, d), |_| rng.random_range(-1.0..1.0));
    let noise = Array2::from_shape_fn((n, d), |_| 0.3 * gauss(&mut rng));
    let y = x.dot(&a.t()) + noise + 0.7;
    (x, y)
}

#[test]
fn conversion_matches_direct_evaluation() {
    let model = random_model(3, 2, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let x = Array1::from_shape_fn(2, |_| rng.random_range(-3.0..3.0));
        let ours = model.convert(x.view()).unwrap();
        let reference = reference_convert(&model, &x);
        for (a, b) in ours.iter().zip(reference.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn posteriors_sum_to_one() {
    let model = random_model(4, 3, 2);
    let p = model.posteriors(array![0.1, -0.4, 2.0].view()).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn single_component_is_linear_regression() {
    let (x, y) = linear_data(300, 3, 9);
    let out = em_train(x.view(), y.view(), 1, &EmConfig::default()).unwrap();
    let n = x.nrows() as f64;
    let mx = x.mean_axis(Axis(0)).unwrap();
    let my = y.mean_axis(Axis(0)).unwrap();
    let xc = &x - &mx;
    let yc = &y - &my;
    let sxx = xc.t().dot(&xc) / n;
    let syx = yc.t().dot(&xc) / n;
    let (inv, _) = gauss_jordan(&sxx);
    let beta = syx.dot(&inv);
    for i in 0..20 {
        let xi = x.row(i).to_owned();
        let expected = &my + &beta.dot(&(&xi - &mx));
        let got = out.model.convert(xi.view()).unwrap();
        for (a, b) in got.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn log_likelihood_never_decreases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Array2::from_shape_fn((200, 2), |(i, _)| {
        let c = if i % 3 == 0 { 3.0 } else { -1.0 };
        c + gauss(&mut rng)
    });
    let y = x.mapv(|v| v * 0.5 + 1.0) + Array2::from_shape_fn((200, 2), |_| 0.2 * gauss(&mut rng));
    for seed in 0..4 {
        let config = EmConfig {
            seed,
            max_iterations: 40,
            tolerance: 0.0,
            ..Default::default()
        };
        let out = em_train(x.view(), y.view(), 4, &config).unwrap();
        for w in out.log_likelihoods.windows(2) {
            assert!(w[1] >= w[0] - 1e-8 * w[0].abs(), "{:?}", w);
        }
    }
}

#[test]
fn recovers_two_well_separated_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 2000;
    let mut x = Array2::zeros((n, 1));
    let mut y = Array2::zeros((n, 1));
    for i in 0..n {
        let (mx, my) = if i < n * 3 / 10 { (-5.0, 2.0) } else { (5.0, -2.0) };
        x[[i, 0]] = mx + 0.5 * gauss(&mut rng);
        y[[i, 0]] = my + 0.5 * gauss(&mut rng);
    }
    let out = em_train(x.view(), y.view(), 2, &EmConfig::default()).unwrap();
    let m = &out.model;
    let low = if m.means()[[0, 0]] < 0.0 { 0 } else { 1 };
    assert!((m.weights()[low] - 0.3).abs() < 0.05);
    assert!((m.means()[[low, 0]] + 5.0).abs() < 0.05 * 5.0);
    assert!((m.means()[[1 - low, 1]] + 2.0).abs() < 0.1);
}

#[test]
fn training_is_deterministic() {
    let (x, y) = linear_data(150, 2, 4);
    let c = EmConfig {
        seed: 8,
        ..Default::default()
    };
    let a = em_train(x.view(), y.view(), 3, &c).unwrap();
    let b = em_train(x.view(), y.view(), 3, &c).unwrap();
    assert_eq!(io::encode(&a.model), io::encode(&b.model));
}

#[test]
fn identical_rows_with_several_components_fail() {
    let x = Array2::from_elem((20, 2), 1.5);
    let err = em_train(x.view(), x.view(), 2, &EmConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Training(_)));
}

#[test]
fn zero_variance_data_fails_cleanly() {
    let x = Array2::from_elem((20, 2), 1.5);
    let r = em_train(x.view(), x.view(), 1, &EmConfig::default());
    assert!(matches!(r, Err(Error::Training(_))));
}

#[test]
fn shape_errors() {
    let x = Array2::zeros((10, 2));
    let y = Array2::zeros((9, 2));
    assert!(matches!(em_train(x.view(), y.view(), 1, &EmConfig::default()), Err(Error::Validation(_))));
    let model = random_model(2, 2, 0);
    assert!(model.convert(array![1.0].view()).is_err());
}

#[test]
fn model_bytes_round_trip() {
    let model = random_model(3, 2, 17);
    let bytes = io::encode(&model);
    let back = io::decode(&bytes).unwrap();
    assert_eq!(model, back);
    assert_eq!(bytes, io::encode(&back));
    assert!(io::decode(&bytes[..bytes.len() - 1]).is_err());
}

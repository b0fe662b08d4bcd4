//! Gradient checks against central finite differences, plus the rotation
//! equivariance of the objective.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sae_lab_core::saecore::{
    loss, loss_and_gradients, Nonlinearity, SaeModel, SparsityPenalty,
};

const FD_STEP: f64 = 1e-6;
const KINK_MARGIN: f64 = 1e-4;

fn random_model(rng: &mut ChaCha8Rng, n: usize, d: usize, jump: bool) -> SaeModel {
    let mut draw = |scale: f64| (rng.random::<f64>() * 2.0 - 1.0) * scale;
    let w_enc = Array2::from_shape_fn((n, d), |_| draw(1.0));
    let w_dec = Array2::from_shape_fn((d, n), |_| draw(1.0));
    let b_enc = Array1::from_shape_fn(n, |_| draw(0.3));
    let b_dec = Array1::from_shape_fn(d, |_| draw(0.3));
    let nonlinearity = if jump {
        Nonlinearity::JumpRelu {
            thresholds: Array1::from_shape_fn(n, |_| draw(0.2)),
            ste_bandwidth: 1e-3,
        }
    } else {
        Nonlinearity::Relu
    };
    SaeModel {
        w_enc,
        b_enc,
        w_dec,
        b_dec,
        nonlinearity,
    }
}

/// Batch whose pre-activations stay clear of the activation kinks, so a
/// +/- 1e-6 parameter nudge cannot flip a gate.
fn kink_avoided_batch(rng: &mut ChaCha8Rng, model: &SaeModel, rows: usize) -> Array2<f64> {
    let d = model.input_dim();
    'resample: loop {
        let batch = Array2::from_shape_fn((rows, d), |_| rng.random::<f64>() * 2.0 - 1.0);
        let fwd = model.forward(batch.view()).unwrap();
        for (i, z_row) in fwd.preactivations.rows().into_iter().enumerate() {
            for (j, &z) in z_row.iter().enumerate() {
                let edge = match &model.nonlinearity {
                    Nonlinearity::Relu => z.abs(),
                    Nonlinearity::JumpRelu { thresholds, .. } => (z - thresholds[j]).abs(),
                };
                if edge < KINK_MARGIN {
                    let _ = i;
                    continue 'resample;
                }
            }
        }
        return batch;
    }
}

fn assert_close(analytic: f64, fd: f64, what: &str) {
    let denom = analytic.abs().max(fd.abs());
    if denom < 1e-8 {
        assert!(
            (analytic - fd).abs() < 1e-8,
            "{what}: analytic {analytic} vs fd {fd}"
        );
    } else {
        let rel = (analytic - fd).abs() / denom;
        assert!(
            rel < 1e-4,
            "{what}: analytic {analytic} vs fd {fd} (rel {rel})"
        );
    }
}

/// Check every weight and bias coordinate of `model` against central
/// differences. JumpReLU thresholds are excluded: they receive
/// pseudo-gradients by design and the true derivative is zero almost
/// everywhere.
fn check_model(model: &SaeModel, batch: &Array2<f64>, penalty: &SparsityPenalty) {
    let (_, grads) = loss_and_gradients(model, batch.view(), penalty).unwrap();
    let eval = |m: &SaeModel| loss(m, batch.view(), penalty).unwrap().total;

    let (n, d) = (model.n_latents(), model.input_dim());
    for j in 0..n {
        for i in 0..d {
            let mut plus = model.clone();
            plus.w_enc[(j, i)] += FD_STEP;
            let mut minus = model.clone();
            minus.w_enc[(j, i)] -= FD_STEP;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            assert_close(grads.w_enc[(j, i)], fd, &format!("w_enc[{j},{i}]"));
        }
    }
    for j in 0..n {
        let mut plus = model.clone();
        plus.b_enc[j] += FD_STEP;
        let mut minus = model.clone();
        minus.b_enc[j] -= FD_STEP;
        let fd = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
        assert_close(grads.b_enc[j], fd, &format!("b_enc[{j}]"));
    }
    for i in 0..d {
        for j in 0..n {
            let mut plus = model.clone();
            plus.w_dec[(i, j)] += FD_STEP;
            let mut minus = model.clone();
            minus.w_dec[(i, j)] -= FD_STEP;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            assert_close(grads.w_dec[(i, j)], fd, &format!("w_dec[{i},{j}]"));
        }
    }
    for i in 0..d {
        let mut plus = model.clone();
        plus.b_dec[i] += FD_STEP;
        let mut minus = model.clone();
        minus.b_dec[i] -= FD_STEP;
        let fd = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
        assert_close(grads.b_dec[i], fd, &format!("b_dec[{i}]"));
    }
}

#[test]
fn relu_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF1D0);
    for case in 0..25 {
        let n = rng.random_range(1..7usize);
        let d = rng.random_range(2..6usize);
        let rows = rng.random_range(1..5usize);
        let model = random_model(&mut rng, n, d, false);
        let batch = kink_avoided_batch(&mut rng, &model, rows);
        let penalty = if case % 2 == 0 {
            SparsityPenalty::L1 { weight: 0.1 }
        } else {
            SparsityPenalty::Tanh {
                scale: 0.1,
                weight: 1.0,
            }
        };
        check_model(&model, &batch, &penalty);
    }
}

#[test]
fn jumprelu_gradients_match_finite_differences_off_threshold() {
    // Conditioned on the gate pattern, every non-threshold gradient is
    // exact; thresholds carry the straight-through pseudo-gradient and are
    // checked separately below.
    let mut rng = ChaCha8Rng::seed_from_u64(0xADE5);
    for _ in 0..10 {
        let n = rng.random_range(1..6usize);
        let d = rng.random_range(2..5usize);
        let model = random_model(&mut rng, n, d, true);
        let batch = kink_avoided_batch(&mut rng, &model, 3);
        check_model(&model, &batch, &SparsityPenalty::tanh_default());
    }
}

#[test]
fn jumprelu_threshold_pseudo_gradient_lives_on_the_kernel_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEAD);
    let model = {
        let mut m = random_model(&mut rng, 3, 2, true);
        // A wide kernel so a hand-placed pre-activation lands inside it.
        if let Nonlinearity::JumpRelu {
            thresholds,
            ste_bandwidth,
        } = &mut m.nonlinearity
        {
            thresholds.fill(0.1);
            *ste_bandwidth = 0.05;
        }
        m
    };
    let batch = Array2::from_shape_fn((8, 2), |_| rng.random::<f64>() * 2.0 - 1.0);
    let (_, grads) = loss_and_gradients(&model, batch.view(), &SparsityPenalty::l1_default())
        .unwrap();
    let theta = grads.thresholds.as_ref().unwrap();
    let fwd = model.forward(batch.view()).unwrap();
    for j in 0..3 {
        let in_band = fwd
            .preactivations
            .column(j)
            .iter()
            .any(|&z| (z - 0.1).abs() <= 0.025);
        if !in_band {
            assert_eq!(theta[j], 0.0, "latent {j} got gradient with empty band");
        }
    }
    // Shrinking the band to zero kills every pseudo-gradient.
    let mut narrow = model.clone();
    if let Nonlinearity::JumpRelu { ste_bandwidth, .. } = &mut narrow.nonlinearity {
        *ste_bandwidth = 0.0;
    }
    let (_, grads) = loss_and_gradients(&narrow, batch.view(), &SparsityPenalty::l1_default())
        .unwrap();
    assert!(grads.thresholds.unwrap().iter().all(|&g| g == 0.0));
}

/// Gram-Schmidt orthonormalization of a random square matrix.
fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> Array2<f64> {
    loop {
        let m = Array2::from_shape_fn((d, d), |_| rng.random::<f64>() * 2.0 - 1.0);
        let mut q: Vec<Array1<f64>> = Vec::with_capacity(d);
        let mut ok = true;
        for i in 0..d {
            let mut v = m.row(i).to_owned();
            for u in &q {
                let proj = v.dot(u);
                v = v - u.mapv(|x| x * proj);
            }
            let norm = v.dot(&v).sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            q.push(v / norm);
        }
        if ok {
            let mut r = Array2::zeros((d, d));
            for (i, u) in q.into_iter().enumerate() {
                r.row_mut(i).assign(&u);
            }
            return r;
        }
    }
}

#[test]
fn loss_and_gradients_are_rotation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0C7A);
    for _ in 0..10 {
        let d = rng.random_range(2..6usize);
        let n = rng.random_range(1..6usize);
        let model = random_model(&mut rng, n, d, false);
        let batch = Array2::from_shape_fn((4, d), |_| rng.random::<f64>() * 2.0 - 1.0);
        let rot = random_rotation(&mut rng, d);
        let penalty = SparsityPenalty::l1_default();

        let rotated_model = SaeModel {
            w_enc: model.w_enc.dot(&rot.t()),
            b_enc: model.b_enc.clone(),
            w_dec: rot.dot(&model.w_dec),
            b_dec: rot.dot(&model.b_dec),
            nonlinearity: Nonlinearity::Relu,
        };
        let rotated_batch = batch.dot(&rot.t());

        let (lb, grads) = loss_and_gradients(&model, batch.view(), &penalty).unwrap();
        let (lb_rot, grads_rot) =
            loss_and_gradients(&rotated_model, rotated_batch.view(), &penalty).unwrap();

        assert!(
            (lb.total - lb_rot.total).abs() <= 1e-10 * lb.total.abs().max(1.0),
            "loss changed under rotation: {} vs {}",
            lb.total,
            lb_rot.total
        );
        let close = |a: &Array2<f64>, b: &Array2<f64>, what: &str| {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-10, "{what}: {x} vs {y}");
            }
        };
        close(&grads_rot.w_enc, &grads.w_enc.dot(&rot.t()), "w_enc grad");
        close(&grads_rot.w_dec, &rot.dot(&grads.w_dec), "w_dec grad");
        for (x, y) in grads_rot.b_dec.iter().zip(rot.dot(&grads.b_dec).iter()) {
            assert!((x - y).abs() < 1e-10, "b_dec grad: {x} vs {y}");
        }
        for (x, y) in grads_rot.b_enc.iter().zip(grads.b_enc.iter()) {
            assert!((x - y).abs() < 1e-10, "b_enc grad: {x} vs {y}");
        }
    }
}

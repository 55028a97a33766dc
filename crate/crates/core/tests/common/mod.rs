//! Slow reference implementations shared by the oracle tests and the
//! acceptance run.
#![allow(dead_code)]

use splitlab::data::{gen_synthetic, SyntheticSpec};
use splitlab::models::{
    backward, cross_entropy_soft, cross_entropy_unnormalized, forward, sgd_step, Activation, Architecture, DenseLayer,
    Network, OptimizerState, Schedule,
};
use splitlab::splitproto::{run_training, SplitModel, TrainConfig};
use splitlab::numerics::{Matrix, RngStream};

/// Fraction of (positive, negative) pairs ordered correctly, ties 1/2.
pub fn pair_count_auc(scores: &[f64], positives: &[bool]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if positives[i] && !positives[j] {
                pairs += 1.0;
                if si > sj {
                    credit += 1.0;
                } else if si == sj {
                    credit += 0.5;
                }
            }
        }
    }
    credit / pairs
}

pub fn random_net(widths: &[usize], rng: &mut RngStream) -> Network {
    let last = widths.len() - 2;
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let weights = Matrix::from_vec(w[1], w[0], rng.gaussian_vec(w[0] * w[1])).unwrap();
            let bias = rng.gaussian_vec(w[1]).iter().map(|b| 0.5 * b).collect();
            let act = if i == last { Activation::SoftmaxAtLoss } else { Activation::Relu };
            DenseLayer::new(weights, bias, act).unwrap()
        })
        .collect();
    Network::new(layers).unwrap()
}

/// Same network with one parameter moved by `delta`; `index` walks each
/// layer's weights (row-major) then its bias.
fn perturbed(net: &Network, layer: usize, index: usize, delta: f64) -> Network {
    let layers = net
        .layers()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut w = l.weights().clone();
            let mut b = l.bias().to_vec();
            if i == layer {
                let n = w.as_slice().len();
                if index < n {
                    w.as_mut_slice()[index] += delta;
                } else {
                    b[index - n] += delta;
                }
            }
            DenseLayer::new(w, b, l.activation()).unwrap()
        })
        .collect();
    Network::new(layers).unwrap()
}

pub type Loss = fn(&Matrix, &Matrix) -> f64;

pub fn soft(logits: &Matrix, t: &Matrix) -> f64 {
    cross_entropy_soft(logits, t).unwrap().0
}

pub fn unnormalized(logits: &Matrix, t: &Matrix) -> f64 {
    cross_entropy_unnormalized(logits, t).unwrap().0
}

fn loss_of(net: &Network, x: &Matrix, t: &Matrix, loss: Loss) -> f64 {
    loss(forward(net, x).unwrap().output(), t)
}

/// True when some ReLU pre-activation sits within `margin` of its kink, where
/// a central difference straddles the corner.
fn near_kink(net: &Network, x: &Matrix, margin: f64) -> bool {
    let mut a = x.clone();
    for l in net.layers() {
        let z = a.matmul_transposed(l.weights()).unwrap();
        let mut z = z;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(l.bias()) {
                *v += b;
            }
        }
        if l.activation() == Activation::Relu {
            if z.as_slice().iter().any(|v| v.abs() < margin) {
                return true;
            }
            z = z.map(|v| v.max(0.0));
        }
        a = z;
    }
    false
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn soft_targets(rows: usize, cols: usize, mass: f64, rng: &mut RngStream) -> Matrix {
    let mut t = Matrix::zeros(rows, cols);
    for r in 0..rows {
        let raw: Vec<f64> = (0..cols).map(|_| rng.uniform() + 0.05).collect();
        let s: f64 = raw.iter().sum();
        for (c, v) in raw.iter().enumerate() {
            t.set(r, c, mass * v / s);
        }
    }
    t
}

pub fn check_gradients(seed: u64, loss: Loss, mass: f64) -> Result<usize, String> {
    const STEP: f64 = 1e-5;
    let mut rng = RngStream::new(seed);
    let widths = [4, 6, 5, 3];
    let (net, x) = loop {
        let net = random_net(&widths, &mut rng);
        let x = Matrix::from_vec(5, 4, rng.gaussian_vec(20)).unwrap();
        if !near_kink(&net, &x, 1e-3) {
            break (net, x);
        }
    };
    let t = soft_targets(5, 3, mass, &mut rng);
    let trace = forward(&net, &x).unwrap();
    let dlogits = if mass == 1.0 {
        cross_entropy_soft(trace.output(), &t).unwrap().1
    } else {
        cross_entropy_unnormalized(trace.output(), &t).unwrap().1
    };
    let (grads, dx) = backward(&net, &trace, &dlogits).unwrap();

    let mut checked = 0;
    for (li, g) in grads.layers.iter().enumerate() {
        let analytic: Vec<f64> = g.weights.as_slice().iter().chain(&g.bias).copied().collect();
        for (i, &a) in analytic.iter().enumerate() {
            let plus = loss_of(&perturbed(&net, li, i, STEP), &x, &t, loss);
            let minus = loss_of(&perturbed(&net, li, i, -STEP), &x, &t, loss);
            let numeric = (plus - minus) / (2.0 * STEP);
            if rel_err(a, numeric) > 1e-4 {
                return Err(format!("seed {seed} layer {li} param {i}: analytic {a} numeric {numeric}"));
            }
            checked += 1;
        }
    }
    for i in 0..x.as_slice().len() {
        let mut xp = x.clone();
        xp.as_mut_slice()[i] += STEP;
        let mut xm = x.clone();
        xm.as_mut_slice()[i] -= STEP;
        let numeric = (loss_of(&net, &xp, &t, loss) - loss_of(&net, &xm, &t, loss)) / (2.0 * STEP);
        let a = dx.as_slice()[i];
        if rel_err(a, numeric) > 1e-4 {
            return Err(format!("seed {seed} input {i}: analytic {a} numeric {numeric}"));
        }
        checked += 1;
    }
    Ok(checked)
}

/// Cyclic Jacobi rotations on a symmetric matrix; returns eigenvalues and
/// eigenvectors as columns.
pub fn jacobi(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut a = a.clone();
    let mut v = Matrix::identity(n);
    for _ in 0..200 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| a.get(i, i)).collect(), v)
}

/// Trains the same initial weights once through the split protocol and once
/// as a single stacked network with one optimizer; the two must agree bit
/// for bit.
pub fn split_matches_monolithic(seed: u64) -> Result<(), String> {
    let data = gen_synthetic(&SyntheticSpec::binary(90, 5, 0.3, 3.0), &RngStream::new(seed)).map_err(|e| e.to_string())?;
    let arch = Architecture {
        bottom_hidden: 7,
        cut_width: 4,
        top_hidden: 6,
    };
    let mut cfg = TrainConfig::new(4, 16, 77 + seed);
    cfg.schedule = Schedule::InverseTime { decay: 0.05 };
    let init = SplitModel::init(&arch, data.feature_width(), 2, cfg.seed).map_err(|e| e.to_string())?;

    let mut whole = init.bottom.stacked(&init.top).map_err(|e| e.to_string())?;
    let mut opt = OptimizerState::new(cfg.learning_rate, cfg.schedule).map_err(|e| e.to_string())?;
    let mut targets = Matrix::zeros(data.len(), 2);
    for (i, &y) in data.labels().iter().enumerate() {
        targets.set(i, y, 1.0);
    }
    let rng = RngStream::new(cfg.seed);
    for epoch in 0..cfg.epochs {
        let order = rng.child_indexed("batches", u64::from(epoch)).permutation(data.len());
        for ids in order.chunks(cfg.batch_size) {
            let x = data.features().select_rows(ids);
            let trace = forward(&whole, &x).map_err(|e| e.to_string())?;
            let (_, dlogits) = cross_entropy_soft(trace.output(), &targets.select_rows(ids)).map_err(|e| e.to_string())?;
            let (grads, _) = backward(&whole, &trace, &dlogits).map_err(|e| e.to_string())?;
            sgd_step(&mut whole, &grads, &mut opt).map_err(|e| e.to_string())?;
        }
    }

    let split = run_training(init.bottom, init.top, &data, &cfg).map_err(|e| e.to_string())?;
    let trained = split.model.bottom.stacked(&split.model.top).map_err(|e| e.to_string())?;
    if trained.layers().len() != whole.layers().len() {
        return Err("layer counts differ".into());
    }
    for (i, (a, b)) in trained.layers().iter().zip(whole.layers()).enumerate() {
        if a.weights().as_slice() != b.weights().as_slice() || a.bias() != b.bias() {
            return Err(format!("seed {seed}: layer {i} differs"));
        }
    }
    Ok(())
}

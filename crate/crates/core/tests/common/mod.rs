#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ygan::nn::{Mode, Network, Tensor};

pub fn random_tensor(shape: [usize; 4], seed: u64, lo: f64, hi: f64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Largest relative discrepancy between an analytic and a numeric gradient.
#[derive(Debug, Clone, Default)]
pub struct GradReport {
    pub max_rel: f64,
    pub worst: String,
    pub checked: usize,
}

impl GradReport {
    fn record(&mut self, what: impl FnOnce() -> String, analytic: f64, numeric: f64) {
        self.checked += 1;
        let scale = analytic.abs() + numeric.abs();
        if scale < 1e-8 {
            return;
        }
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
        if rel > self.max_rel {
            self.max_rel = rel;
            self.worst = format!("{} (analytic {analytic:e}, numeric {numeric:e})", what());
        }
    }
}

const STEP: f64 = 1e-5;

/// Projects every output onto fixed random weights, giving a scalar whose
/// gradient exercises each output element.
fn objective(net: &mut Network<f64>, inputs: &[&Tensor<f64>], weights: &[Tensor<f64>], mode: Mode) -> f64 {
    let outs = net.forward_with(inputs, mode, false).unwrap();
    outs.iter()
        .zip(weights)
        .map(|(o, w)| o.data().iter().zip(w.data()).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// Central finite differences against back-propagation, over every
/// parameter element and along random input directions.
pub fn check_network(net: &Network<f64>, inputs: &[Tensor<f64>], mode: Mode, seed: u64) -> GradReport {
    let mut net = net.clone();
    let refs: Vec<&Tensor<f64>> = inputs.iter().collect();
    let outs = net.forward_with(&refs, mode, false).unwrap();
    let weights: Vec<Tensor<f64>> = outs
        .iter()
        .enumerate()
        .map(|(i, o)| random_tensor(o.shape(), seed + i as u64, -1.0, 1.0))
        .collect();
    let grads = net.backward(&weights.iter().map(Some).collect::<Vec<_>>()).unwrap();

    let mut report = GradReport::default();
    let infos = net.graph().params().to_vec();
    for (p, info) in infos.iter().enumerate() {
        for j in 0..info.len() {
            let orig = net.params()[p][j];
            net.params_mut()[p][j] = orig + STEP;
            let up = objective(&mut net, &refs, &weights, mode);
            net.params_mut()[p][j] = orig - STEP;
            let dn = objective(&mut net, &refs, &weights, mode);
            net.params_mut()[p][j] = orig;
            report.record(|| format!("{}[{j}]", info.name), grads.params[p][j], (up - dn) / (2.0 * STEP));
        }
    }
    // Element-wise input gradients can be far below what differences of
    // an O(1) objective resolve, so inputs are checked along random
    // directions instead.
    for i in 0..inputs.len() {
        for k in 0..4u64 {
            let dir = random_tensor(inputs[i].shape(), seed + 1000 + 10 * i as u64 + k, -1.0, 1.0);
            let analytic: f64 = grads.inputs[i].data().iter().zip(dir.data()).map(|(g, d)| g * d).sum();
            let mut shifted = |sign: f64| {
                let mut xs: Vec<Tensor<f64>> = inputs.to_vec();
                for (x, d) in xs[i].data_mut().iter_mut().zip(dir.data()) {
                    *x += sign * STEP * d;
                }
                objective(&mut net, &xs.iter().collect::<Vec<_>>(), &weights, mode)
            };
            let numeric = (shifted(1.0) - shifted(-1.0)) / (2.0 * STEP);
            report.record(|| format!("input{i} direction {k}"), analytic, numeric);
        }
    }
    report
}

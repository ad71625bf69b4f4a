//! Reconstruction and adversarial losses. Every loss is a mean over all
//! elements and comes with its gradient with respect to the prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};

/// Predictions are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` before the logs.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconKind {
    Bce,
    Mse,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub recon_kind: ReconKind,
}

fn default_lambda() -> f64 {
    100.0
}

impl LossWeights {
    pub fn new(recon_kind: ReconKind) -> Self {
        Self {
            lambda: default_lambda(),
            recon_kind,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::config("/loss/lambda", "must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LossValue<T> {
    pub value: f64,
    pub grad: Tensor<T>,
}

fn check<T: Scalar>(name: &str, pred: &Tensor<T>, target: &Tensor<T>) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::contract(
            name,
            format!("prediction {:?} vs target {:?}", pred.shape(), target.shape()),
        ));
    }
    Ok(())
}

fn elementwise<T: Scalar>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    f: impl Fn(f64, f64) -> (f64, f64),
) -> LossValue<T> {
    let n = pred.len() as f64;
    let mut total = 0.0;
    let mut grad = Tensor::zeros(pred.shape());
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let (v, d) = f(p.f64(), t.f64());
        total += v;
        *g = T::of(d / n);
    }
    LossValue { value: total / n, grad }
}

/// Mean of squared differences.
pub fn loss_mse<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<LossValue<T>> {
    check("loss_mse", pred, target)?;
    Ok(elementwise(pred, target, |p, t| ((p - t) * (p - t), 2.0 * (p - t))))
}

/// Mean absolute difference; the subgradient at zero is zero.
pub fn loss_l1<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<LossValue<T>> {
    check("loss_l1", pred, target)?;
    Ok(elementwise(pred, target, |p, t| {
        let d = p - t;
        let s = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        (d.abs(), s)
    }))
}

/// Binary cross-entropy `-[y ln p + (1 - y) ln(1 - p)]`. The gradient is the
/// analytic one evaluated at the clamped prediction, so it never vanishes.
pub fn loss_bce<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<LossValue<T>> {
    check("loss_bce", pred, target)?;
    Ok(elementwise(pred, target, |p, t| {
        let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        let v = -(t * p.ln() + (1.0 - t) * (1.0 - p).ln());
        (v, (p - t) / (p * (1.0 - p)))
    }))
}

pub fn recon_loss<T: Scalar>(kind: ReconKind, pred: &Tensor<T>, target: &Tensor<T>) -> Result<LossValue<T>> {
    match kind {
        ReconKind::Bce => loss_bce(pred, target),
        ReconKind::Mse => loss_mse(pred, target),
        ReconKind::L1 => loss_l1(pred, target),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: f64, n: usize) -> Tensor<f64> {
        Tensor::full([1, n, n, 1], v)
    }

    #[test]
    fn mse_examples() {
        assert_eq!(loss_mse(&t(0.4, 4), &t(0.4, 4)).unwrap().value, 0.0);
        assert_eq!(loss_mse(&t(0.0, 4), &t(1.0, 4)).unwrap().value, 1.0);
        assert!((loss_mse(&t(0.3, 4), &t(0.5, 4)).unwrap().value - 0.04).abs() < 1e-12);
    }

    #[test]
    fn bce_examples() {
        let v = loss_bce(&t(0.5, 4), &t(1.0, 4)).unwrap().value;
        assert!((v - std::f64::consts::LN_2).abs() < 1e-9);
        let v = loss_bce(&t(0.9, 4), &t(1.0, 4)).unwrap().value;
        assert!((v + 0.9f64.ln()).abs() < 1e-9);
        assert!(loss_bce(&t(1.0, 4), &t(1.0, 4)).unwrap().value < 1e-6);
        assert!(loss_bce(&t(0.0, 4), &t(0.0, 4)).unwrap().value < 1e-6);
    }

    #[test]
    fn l1_examples() {
        assert_eq!(loss_l1(&t(0.7, 2), &t(0.7, 2)).unwrap().value, 0.0);
        assert_eq!(loss_l1(&t(0.0, 2), &t(1.0, 2)).unwrap().value, 1.0);
        assert!((loss_l1(&t(0.25, 2), &t(0.5, 2)).unwrap().value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(loss_mse(&t(0.0, 2), &t(0.0, 3)), Err(Error::Contract { .. })));
    }

    #[test]
    fn gradients_match_differences() {
        let pred = Tensor::from_vec([1, 2, 2, 1], vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let target = Tensor::from_vec([1, 2, 2, 1], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        for kind in [ReconKind::Bce, ReconKind::Mse, ReconKind::L1] {
            let base = recon_loss(kind, &pred, &target).unwrap();
            for i in 0..4 {
                let h = 1e-6;
                let mut up = pred.clone();
                up.data_mut()[i] += h;
                let mut dn = pred.clone();
                dn.data_mut()[i] -= h;
                let fd = (recon_loss(kind, &up, &target).unwrap().value - recon_loss(kind, &dn, &target).unwrap().value)
                    / (2.0 * h);
                assert!((fd - base.grad.data()[i]).abs() < 1e-6, "{kind:?} {i}");
            }
        }
    }
}

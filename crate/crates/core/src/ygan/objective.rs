//! Alternating objectives of the adversarial scheme.
//!
//! The discriminator minimizes `MSE(D(real), 1) + MSE(D(fake), 0)`. The
//! generator minimizes `lambda * [recon(o1, y1) + recon(o2, y2)] +
//! MSE(D(fake), 1)`, the non-saturating replacement of the `- l(D(fake), 0)`
//! term. The joint min-max value is exposed as [`hybrid_objective`] for
//! consistency checks only.

use super::loss::{loss_mse, recon_loss, LossWeights};
use crate::error::Result;
use crate::nn::{Mode, Network, Scalar, Tensor};

/// Loss and parameter gradients of one discriminator evaluation.
#[derive(Debug, Clone)]
pub struct DiscriminatorEval<T> {
    pub loss: f64,
    pub real_loss: f64,
    pub fake_loss: f64,
    pub grads: Vec<Vec<T>>,
}

/// Runs D on the real and the fake pair (train mode, separate batches) and
/// returns the summed objective with its parameter gradients.
pub fn discriminator_objective<T: Scalar>(
    d: &mut Network<T>,
    real_pair: &Tensor<T>,
    fake_pair: &Tensor<T>,
) -> Result<DiscriminatorEval<T>> {
    let mut run = |pair: &Tensor<T>, label: f64| -> Result<(f64, Vec<Vec<T>>)> {
        let out = d.forward(&[pair], Mode::Train)?.remove(0);
        let loss = loss_mse(&out, &Tensor::full(out.shape(), T::of(label)))?;
        let g = d.backward(&[Some(&loss.grad)])?;
        Ok((loss.value, g.params))
    };
    let (real_loss, mut grads) = run(real_pair, 1.0)?;
    let (fake_loss, fake_grads) = run(fake_pair, 0.0)?;
    for (a, b) in grads.iter_mut().zip(&fake_grads) {
        for (x, &y) in a.iter_mut().zip(b) {
            *x = *x + y;
        }
    }
    Ok(DiscriminatorEval {
        loss: real_loss + fake_loss,
        real_loss,
        fake_loss,
        grads,
    })
}

/// Generator loss split into its terms, with gradients for G's parameters.
#[derive(Debug, Clone)]
pub struct GeneratorEval<T> {
    pub loss: f64,
    /// `lambda * (recon1 + recon2)`.
    pub recon: f64,
    pub recon1: f64,
    pub recon2: f64,
    /// `MSE(D(fake), 1)`, zero when no discriminator is used.
    pub adversarial: f64,
    pub grads: Vec<Vec<T>>,
}

/// Evaluates the generator objective for outputs already produced by a
/// recorded train-mode forward pass of `g`. With `d == None` only the
/// reconstruction terms are used (Y-Net / Y-Net1 training). D is run with
/// batch statistics and its buffers are left untouched; its parameter
/// gradients are discarded.
pub fn generator_grads<T: Scalar>(
    g: &Network<T>,
    d: Option<&mut Network<T>>,
    outputs: &[Tensor<T>],
    y1: &Tensor<T>,
    y2: &Tensor<T>,
    w: &LossWeights,
) -> Result<GeneratorEval<T>> {
    let lambda = T::of(w.lambda);
    let r1 = recon_loss(w.recon_kind, &outputs[0], y1)?;
    let r2 = recon_loss(w.recon_kind, &outputs[1], y2)?;
    let mut g1 = r1.grad.map(|v| v * lambda);
    let mut g2 = r2.grad.map(|v| v * lambda);
    let mut adversarial = 0.0;
    if let Some(d) = d {
        let fake = Tensor::concat_channels(&outputs[0], &outputs[1])?;
        let out = d.forward_with(&[&fake], Mode::Train, false)?.remove(0);
        let adv = loss_mse(&out, &Tensor::full(out.shape(), T::one()))?;
        adversarial = adv.value;
        let dg = d.backward(&[Some(&adv.grad)])?;
        let (a1, a2) = dg.inputs[0].split_channels(1);
        g1.add_assign(&a1);
        g2.add_assign(&a2);
    }
    let grads = g.backward(&[Some(&g1), Some(&g2)])?.params;
    let recon = w.lambda * (r1.value + r2.value);
    Ok(GeneratorEval {
        loss: recon + adversarial,
        recon,
        recon1: r1.value,
        recon2: r2.value,
        adversarial,
        grads,
    })
}

/// Full generator objective: train-mode forward of `g` on `x`, then
/// [`generator_grads`] against the frozen discriminator.
pub fn generator_objective<T: Scalar>(
    g: &mut Network<T>,
    d: &mut Network<T>,
    x: &Tensor<T>,
    y1: &Tensor<T>,
    y2: &Tensor<T>,
    w: &LossWeights,
) -> Result<GeneratorEval<T>> {
    let outputs = g.forward(&[x], Mode::Train)?;
    generator_grads(g, Some(d), &outputs, y1, y2, w)
}

/// Terms of the joint min-max value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridParts {
    pub value: f64,
    pub recon_sum: f64,
    pub discriminator: f64,
}

/// `lambda * [l(o1, y1) + l(o2, y2)] - [MSE(D(real), 1) + MSE(D(fake), 0)]`,
/// computed with batch statistics and no side effects on either network.
pub fn hybrid_objective<T: Scalar>(
    g: &Network<T>,
    d: &Network<T>,
    x: &Tensor<T>,
    y1: &Tensor<T>,
    y2: &Tensor<T>,
    w: &LossWeights,
) -> Result<HybridParts> {
    let mut g = g.clone();
    let mut d = d.clone();
    let o = g.forward_with(&[x], Mode::Train, false)?;
    let recon_sum = recon_loss(w.recon_kind, &o[0], y1)?.value + recon_loss(w.recon_kind, &o[1], y2)?.value;
    let real = Tensor::concat_channels(y1, y2)?;
    let fake = Tensor::concat_channels(&o[0], &o[1])?;
    let dr = d.forward_with(&[&real], Mode::Train, false)?.remove(0);
    let df = d.forward_with(&[&fake], Mode::Train, false)?.remove(0);
    let discriminator = loss_mse(&dr, &Tensor::full(dr.shape(), T::one()))?.value
        + loss_mse(&df, &Tensor::full(df.shape(), T::zero()))?.value;
    Ok(HybridParts {
        value: w.lambda * recon_sum - discriminator,
        recon_sum,
        discriminator,
    })
}

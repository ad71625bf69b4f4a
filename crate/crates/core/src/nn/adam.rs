use serde::{Deserialize, Serialize};

use super::Scalar;
use crate::error::{Error, Result};

/// Adam moments and hyper-parameters for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Vec<T>], lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            v: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            t: 0,
            lr,
            beta1,
            beta2,
            eps,
        }
    }

    /// One bias-corrected Adam update. Non-finite gradients abort the step
    /// before anything is modified.
    pub fn step(&mut self, params: &mut [Vec<T>], grads: &[Vec<T>]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::invalid("parameter, gradient and moment counts differ"));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.m[i].len() {
                return Err(Error::invalid(format!("tensor {i}: shape mismatch in adam step")));
            }
            if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "poisoned update: non-finite gradient at tensor {i}, element {j}"
                )));
            }
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let (tb1, tb2) = (T::of(b1), T::of(b2));
        let (ob1, ob2) = (T::of(1.0 - b1), T::of(1.0 - b2));
        let step = T::of(self.lr / c1);
        let c2_sqrt = T::of(c2.sqrt());
        let eps = T::of(self.eps);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for k in 0..p.len() {
                m[k] = tb1 * m[k] + ob1 * g[k];
                v[k] = tb2 * v[k] + ob2 * g[k] * g[k];
                // lr * mhat / (sqrt(vhat) + eps)
                p[k] = p[k] - step * m[k] / (v[k].sqrt() / c2_sqrt + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![vec![0.0f64]];
        let mut s = AdamState::new(&p, 1e-4, 0.5, 0.999, 1e-8);
        s.step(&mut p, &[vec![1.0]]).unwrap();
        assert!((p[0][0] + 1e-4).abs() < 1e-6);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![vec![0.3f32, -2.0]];
        let mut s = AdamState::new(&p, 1e-3, 0.5, 0.999, 1e-8);
        s.step(&mut p, &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(p, vec![vec![0.3f32, -2.0]]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn deterministic() {
        let p0 = vec![vec![0.1f32, 0.2, 0.3]];
        let g = vec![vec![0.5f32, -0.25, 2.0]];
        let mut a = (p0.clone(), AdamState::new(&p0, 1e-4, 0.5, 0.999, 1e-8));
        let mut b = a.clone();
        a.1.step(&mut a.0, &g).unwrap();
        b.1.step(&mut b.0, &g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nan_gradient_poisons() {
        let mut p = vec![vec![1.0f64, 2.0]];
        let mut s = AdamState::new(&p, 1e-4, 0.5, 0.999, 1e-8);
        let err = s.step(&mut p, &[vec![0.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert_eq!(p, vec![vec![1.0, 2.0]]);
        assert_eq!(s.t, 0);
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Random phase diffuser: Gaussian-correlated white noise, in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScreen {
    side: usize,
    phase: Vec<f64>,
    correlation_px: usize,
    strength: f64,
    seed: u64,
}

impl PhaseScreen {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn correlation_px(&self) -> usize {
        self.correlation_px
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Seeded standard-normal field, row-major. Shared with the blur oracle in tests.
pub(crate) fn white_noise(side: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..side * side).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Periodic 1-D Gaussian taps indexed by wrapped offset, normalized so that
/// the separable 2-D kernel has unit energy.
fn gaussian_taps(side: usize, sigma: f64) -> Vec<f64> {
    let mut taps: Vec<f64> = (0..side)
        .map(|k| {
            let d = k.min(side - k) as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let energy: f64 = taps.iter().map(|t| t * t).sum();
    let norm = energy.sqrt();
    taps.iter_mut().for_each(|t| *t /= norm);
    taps
}

/// Builds a diffuser phase map. With a unit-energy kernel the blurred noise
/// keeps unit variance, so `strength` is the phase standard deviation.
pub fn make_phase_screen(side: usize, correlation_px: usize, strength: f64, seed: u64) -> Result<PhaseScreen> {
    if side < 2 {
        return Err(Error::invalid(format!("screen side {side} must be >= 2")));
    }
    if correlation_px == 0 {
        return Err(Error::invalid("correlation_px must be >= 1"));
    }
    if !(strength >= 0.0) || !strength.is_finite() {
        return Err(Error::invalid(format!("screen strength {strength} must be finite and >= 0")));
    }
    let phase = if strength == 0.0 {
        vec![0.0; side * side]
    } else {
        let noise = white_noise(side, seed);
        let taps = gaussian_taps(side, correlation_px as f64);
        let mut rows = vec![0.0; side * side];
        for r in 0..side {
            for c in 0..side {
                let mut acc = 0.0;
                for k in 0..side {
                    acc += taps[k] * noise[r * side + (c + side - k) % side];
                }
                rows[r * side + c] = acc;
            }
        }
        let mut out = vec![0.0; side * side];
        for r in 0..side {
            for c in 0..side {
                let mut acc = 0.0;
                for k in 0..side {
                    acc += taps[k] * rows[((r + side - k) % side) * side + c];
                }
                out[r * side + c] = strength * acc;
            }
        }
        out
    };
    Ok(PhaseScreen {
        side,
        phase,
        correlation_px,
        strength,
        seed,
    })
}

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Sampled complex amplitude on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    side: usize,
    pitch: f64,
    wavelength: f64,
    grid: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(side: usize, pitch: f64, wavelength: f64, grid: Vec<Complex64>) -> Result<Self> {
        if side < 2 || !side.is_power_of_two() {
            return Err(Error::invalid(format!("field side {side} is not a power of two >= 2")));
        }
        if grid.len() != side * side {
            return Err(Error::invalid(format!(
                "field grid has {} samples, expected {}",
                grid.len(),
                side * side
            )));
        }
        if !(pitch > 0.0) || !(wavelength > 0.0) {
            return Err(Error::invalid("pitch and wavelength must be positive"));
        }
        Ok(Self {
            side,
            pitch,
            wavelength,
            grid,
        })
    }

    /// Real amplitude transmittance turned into a field with zero phase.
    pub fn from_amplitude(side: usize, pitch: f64, wavelength: f64, amplitude: &[f32]) -> Result<Self> {
        let grid = amplitude.iter().map(|&a| Complex64::new(a as f64, 0.0)).collect();
        Self::new(side, pitch, wavelength, grid)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn grid(&self) -> &[Complex64] {
        &self.grid
    }

    pub fn grid_mut(&mut self) -> &mut [Complex64] {
        &mut self.grid
    }

    pub fn power(&self) -> f64 {
        self.grid.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.grid.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Pointwise product with `exp(i * phase)`.
    pub fn apply_phase(&mut self, phase: &[f64]) {
        for (u, &p) in self.grid.iter_mut().zip(phase) {
            *u *= Complex64::from_polar(1.0, p);
        }
    }

    /// Pointwise product with a real amplitude mask.
    pub fn apply_amplitude(&mut self, amplitude: &[f32]) {
        for (u, &a) in self.grid.iter_mut().zip(amplitude) {
            *u *= a as f64;
        }
    }
}

/// Cached forward/inverse plans for square 2-D transforms.
pub(crate) struct Fft2 {
    side: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(side: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            side,
            forward: planner.plan_fft_forward(side),
            inverse: planner.plan_fft_inverse(side),
        }
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1 / side²` normalization.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / (self.side * self.side) as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.side;
        plan.process(data);
        transpose(data, n);
        plan.process(data);
        transpose(data, n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in (r + 1)..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}

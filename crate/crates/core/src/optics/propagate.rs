use num_complex::Complex64;
use std::f64::consts::PI;

use super::field::{ComplexField, Fft2};
use crate::error::{Error, Result};

/// Angular-spectrum transfer function in FFT ordering; evanescent
/// components are zeroed.
pub fn transfer_function(side: usize, pitch: f64, wavelength: f64, distance: f64) -> Vec<Complex64> {
    let freq = |k: usize| {
        let k = if k < side / 2 { k as f64 } else { k as f64 - side as f64 };
        k / (side as f64 * pitch)
    };
    let mut h = Vec::with_capacity(side * side);
    for r in 0..side {
        let fy = wavelength * freq(r);
        for c in 0..side {
            let fx = wavelength * freq(c);
            let arg = 1.0 - fx * fx - fy * fy;
            if arg > 0.0 {
                h.push(Complex64::from_polar(1.0, 2.0 * PI * (distance / wavelength) * arg.sqrt()));
            } else {
                h.push(Complex64::new(0.0, 0.0));
            }
        }
    }
    h
}

/// Free-space propagation over `distance` meters.
pub fn propagate_asm(field: &ComplexField, distance: f64) -> Result<ComplexField> {
    if !(distance >= 0.0) {
        return Err(Error::invalid(format!("propagation distance {distance} must be >= 0")));
    }
    if distance == 0.0 {
        return Ok(field.clone());
    }
    let h = transfer_function(field.side(), field.pitch(), field.wavelength(), distance);
    let mut out = field.clone();
    apply_transfer(&mut out, &h, &Fft2::new(field.side()));
    Ok(out)
}

pub(crate) fn apply_transfer(field: &mut ComplexField, h: &[Complex64], fft: &Fft2) {
    let grid = field.grid_mut();
    fft.forward(grid);
    for (u, t) in grid.iter_mut().zip(h) {
        *u *= t;
    }
    fft.inverse(grid);
}

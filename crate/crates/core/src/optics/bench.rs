use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::field::{ComplexField, Fft2};
use super::propagate::{apply_transfer, transfer_function};
use super::screen::{make_phase_screen, PhaseScreen};
use super::{derive_seed, DEFAULT_WAVELENGTH};
use crate::error::{Error, Result};
use crate::image::Image;

const SCREEN1_STREAM: u64 = 1;
const SCREEN2_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenParams {
    pub correlation_px: usize,
    pub strength: f64,
}

/// Geometry and diffusers of the simulated bench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub image_side: usize,
    pub pitch: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    pub d_objects: f64,
    pub z_detector: f64,
    pub screen2: ScreenParams,
    #[serde(default)]
    pub screen1: Option<ScreenParams>,
    pub seed: u64,
    /// Std of additive Gaussian detector noise relative to mean intensity; 0 disables it.
    #[serde(default)]
    pub detector_noise: f64,
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            image_side: 64,
            pitch: 8e-6,
            wavelength: DEFAULT_WAVELENGTH,
            d_objects: 0.45,
            z_detector: 0.05,
            screen2: ScreenParams {
                correlation_px: 1,
                strength: 2.0 * std::f64::consts::PI,
            },
            screen1: None,
            seed: 0,
            detector_noise: 0.0,
        }
    }
}

impl BenchConfig {
    /// Checks the invariants of a dataset-grade bench (positive distances).
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if !(self.d_objects > 0.0) {
            return Err(Error::config("/bench/d_objects", "must be > 0"));
        }
        if !(self.z_detector > 0.0) {
            return Err(Error::config("/bench/z_detector", "must be > 0"));
        }
        Ok(())
    }

    fn validate_shape(&self) -> Result<()> {
        if self.image_side < 2 || !self.image_side.is_power_of_two() {
            return Err(Error::config("/bench/image_side", "must be a power of two >= 2"));
        }
        if !(self.pitch > 0.0) {
            return Err(Error::config("/bench/pitch", "must be > 0"));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::config("/bench/wavelength", "must be > 0"));
        }
        if !(self.d_objects >= 0.0) || !(self.z_detector >= 0.0) {
            return Err(Error::config("/bench", "distances must be >= 0"));
        }
        if !(self.detector_noise >= 0.0) {
            return Err(Error::config("/bench/detector_noise", "must be >= 0"));
        }
        Ok(())
    }

    pub fn screen2_seed(&self) -> u64 {
        derive_seed(self.seed, SCREEN2_STREAM)
    }

    pub fn screen1_seed(&self) -> u64 {
        derive_seed(self.seed, SCREEN1_STREAM)
    }
}

/// Detector-plane intensity for one object pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecklePattern {
    pub side: usize,
    pub intensity: Vec<f64>,
    pub sample_seed: u64,
}

impl SpecklePattern {
    /// Scales by the pattern's own maximum into `[0, 1]`.
    pub fn normalized(&self) -> Result<Image> {
        let max = self.intensity.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(Error::Degenerate("speckle has no energy".into()));
        }
        let pixels = self.intensity.iter().map(|&v| (v / max) as f32).collect();
        Image::new(self.side, pixels)
    }
}

/// A bench with its diffusers and transfer functions precomputed; the
/// screens are fixed for the bench's lifetime like a physical slab.
pub struct Bench {
    cfg: BenchConfig,
    screen1: Option<PhaseScreen>,
    screen2: PhaseScreen,
    h_objects: Vec<Complex64>,
    h_half: Vec<Complex64>,
    h_detector: Vec<Complex64>,
    fft: Fft2,
}

impl Bench {
    pub fn new(cfg: &BenchConfig) -> Result<Self> {
        cfg.validate_shape()?;
        let side = cfg.image_side;
        let screen2 = make_phase_screen(side, cfg.screen2.correlation_px, cfg.screen2.strength, cfg.screen2_seed())?;
        let screen1 = cfg
            .screen1
            .map(|s| make_phase_screen(side, s.correlation_px, s.strength, cfg.screen1_seed()))
            .transpose()?;
        let h = |d: f64| transfer_function(side, cfg.pitch, cfg.wavelength, d);
        Ok(Self {
            cfg: cfg.clone(),
            screen1,
            screen2,
            h_objects: h(cfg.d_objects),
            h_half: h(cfg.d_objects / 2.0),
            h_detector: h(cfg.z_detector),
            fft: Fft2::new(side),
        })
    }

    pub fn config(&self) -> &BenchConfig {
        &self.cfg
    }

    pub fn screen2(&self) -> &PhaseScreen {
        &self.screen2
    }

    pub fn screen1(&self) -> Option<&PhaseScreen> {
        self.screen1.as_ref()
    }

    fn propagate(&self, field: &mut ComplexField, h: &[Complex64], distance: f64) {
        if distance > 0.0 {
            apply_transfer(field, h, &self.fft);
        }
    }

    pub fn synthesize(&self, obj1: &Image, obj2: &Image, sample_seed: u64) -> Result<SpecklePattern> {
        let side = self.cfg.image_side;
        for (name, img) in [("obj1", obj1), ("obj2", obj2)] {
            if img.side() != side {
                return Err(Error::invalid(format!(
                    "{name} has side {}, bench expects {side}",
                    img.side()
                )));
            }
        }
        let mut u = ComplexField::from_amplitude(side, self.cfg.pitch, self.cfg.wavelength, obj1.pixels())?;
        match &self.screen1 {
            Some(s1) => {
                let half = self.cfg.d_objects / 2.0;
                self.propagate(&mut u, &self.h_half, half);
                u.apply_phase(s1.phase());
                self.propagate(&mut u, &self.h_half, half);
            }
            None => self.propagate(&mut u, &self.h_objects, self.cfg.d_objects),
        }
        u.apply_amplitude(obj2.pixels());
        u.apply_phase(self.screen2.phase());
        self.propagate(&mut u, &self.h_detector, self.cfg.z_detector);
        let mut intensity = u.intensity();
        if self.cfg.detector_noise > 0.0 {
            let mean = intensity.iter().sum::<f64>() / intensity.len() as f64;
            let noise = Normal::new(0.0, self.cfg.detector_noise * mean)
                .map_err(|e| Error::invalid(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(sample_seed, NOISE_STREAM));
            for v in intensity.iter_mut() {
                *v = (*v + noise.sample(&mut rng)).max(0.0);
            }
        }
        Ok(SpecklePattern {
            side,
            intensity,
            sample_seed,
        })
    }
}

/// One-shot synthesis; prefer [`Bench`] when generating many samples.
pub fn synthesize_speckle(obj1: &Image, obj2: &Image, cfg: &BenchConfig, sample_seed: u64) -> Result<SpecklePattern> {
    Bench::new(cfg)?.synthesize(obj1, obj2, sample_seed)
}

/// Speckle contrast `std(I) / mean(I)`.
pub fn speckle_contrast(intensity: &[f64]) -> Result<f64> {
    if intensity.is_empty() {
        return Err(Error::invalid("empty intensity"));
    }
    let n = intensity.len() as f64;
    let mean = intensity.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::Degenerate("zero-mean intensity".into()));
    }
    let var = intensity.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn ones(side: usize) -> Image {
        Image::filled(side, 1.0)
    }

    #[test]
    fn no_scatter_no_propagation_is_uniform() {
        let cfg = BenchConfig {
            d_objects: 0.0,
            z_detector: 0.0,
            screen2: ScreenParams {
                correlation_px: 1,
                strength: 0.0,
            },
            ..BenchConfig::default()
        };
        let s = synthesize_speckle(&ones(64), &ones(64), &cfg, 0).unwrap();
        assert!(s.intensity.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn strong_screen_gives_developed_speckle() {
        let mut total = 0.0;
        for seed in 0..32 {
            let cfg = BenchConfig {
                seed,
                ..BenchConfig::default()
            };
            let s = synthesize_speckle(&ones(64), &ones(64), &cfg, 0).unwrap();
            total += speckle_contrast(&s.intensity).unwrap();
        }
        let c = total / 32.0;
        assert!((0.85..=1.15).contains(&c), "contrast {c}");
    }

    #[test]
    fn second_screen_changes_output() {
        let mut a = Image::filled(64, 0.0);
        let mut b = Image::filled(64, 0.0);
        for i in 20..44 {
            a.set(i, 32, 1.0);
            b.set(20, i, 1.0);
            b.set(i, 20, 1.0);
        }
        let group_a = BenchConfig::default();
        let group_c = BenchConfig {
            screen1: Some(ScreenParams {
                correlation_px: 2,
                strength: 2.0 * PI,
            }),
            ..BenchConfig::default()
        };
        let sa = synthesize_speckle(&a, &b, &group_a, 5).unwrap();
        let sc = synthesize_speckle(&a, &b, &group_c, 5).unwrap();
        let l2: f64 = sa.intensity.iter().zip(&sc.intensity).map(|(x, y)| (x - y).powi(2)).sum();
        assert!(l2 > 0.0);
    }

    #[test]
    fn synthesis_is_deterministic_and_nonnegative() {
        let cfg = BenchConfig {
            detector_noise: 0.1,
            ..BenchConfig::default()
        };
        let a = synthesize_speckle(&ones(64), &ones(64), &cfg, 9).unwrap();
        let b = synthesize_speckle(&ones(64), &ones(64), &cfg, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.intensity.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let cfg = BenchConfig::default();
        assert!(matches!(
            synthesize_speckle(&ones(32), &ones(64), &cfg, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn contrast_examples() {
        assert_eq!(speckle_contrast(&[3.0; 16]).unwrap(), 0.0);
        let two_point: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.0 } else { 2.0 }).collect();
        assert!((speckle_contrast(&two_point).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(speckle_contrast(&[0.0; 4]), Err(Error::Degenerate(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let exp: Vec<f64> = (0..256 * 256).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        assert!((speckle_contrast(&exp).unwrap() - 1.0).abs() < 0.05);
    }
}

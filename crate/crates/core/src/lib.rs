//! Reconstruction of two adjacent objects from a single speckle pattern.
//!
//! The crate bundles a Fourier-optics speckle simulator ([`optics`]), a
//! dataset builder with a fixed on-disk layout ([`dataset`]), a small
//! deterministic CNN substrate with reverse-mode gradients ([`nn`]), the
//! Y-shaped generator / patch discriminator pair and its adversarial
//! training loop ([`ygan`]), global SSIM scoring ([`metrics`]) and the batch
//! command line front end ([`cli`]).

pub mod cli;
pub mod dataset;
pub mod error;
pub mod image;
pub mod json;
pub mod metrics;
pub mod nn;
pub mod optics;
pub mod ygan;

pub use error::{Error, Result};
pub use image::Image;

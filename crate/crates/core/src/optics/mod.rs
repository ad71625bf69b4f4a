//! Scalar-wave speckle simulator.
//!
//! Two amplitude objects are illuminated one after the other by a unit plane
//! wave, the combined field passes a random phase diffuser and propagates to
//! the detector, where only intensity is recorded. An optional second
//! diffuser can sit halfway between the object planes.

mod bench;
mod field;
mod propagate;
mod screen;

pub use bench::{speckle_contrast, synthesize_speckle, Bench, BenchConfig, ScreenParams, SpecklePattern};
pub use field::ComplexField;
pub use propagate::{propagate_asm, transfer_function};
pub use screen::{make_phase_screen, PhaseScreen};

/// Laser line of the reference bench, in meters.
pub const DEFAULT_WAVELENGTH: f64 = 532.8e-9;

/// SplitMix64 finalizer, used to derive independent sub-seeds from one seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

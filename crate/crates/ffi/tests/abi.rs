use std::ffi::{CStr, CString};
use std::ptr;

use ygan::nn::Tensor;
use ygan::ygan::{DiscriminatorConfig, GeneratorConfig, LossWeights, Model, ModelConfig, ModelKind, ReconKind, TrainConfig};
use ygan_ffi::*;

fn last_error() -> Option<String> {
    let p = ygan_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn small_model() -> Model {
    let mut generator = GeneratorConfig::new(16);
    generator.base_channels = 4;
    generator.max_channels = 8;
    let mut disc = DiscriminatorConfig::new(16);
    disc.channels = vec![4, 4, 8, 8];
    Model::new(&ModelConfig {
        model: ModelKind::Ygan,
        generator,
        discriminator: Some(disc),
        loss: LossWeights::new(ReconKind::Bce),
        train: TrainConfig::default(),
    })
    .unwrap()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(ygan_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn ssim_identity_and_errors() {
    let a: Vec<f32> = (0..64).map(|i| (i % 7) as f32 / 7.0).collect();
    let mut out = 0.0;
    let s = unsafe { ygan_ssim(a.as_ptr(), a.as_ptr(), a.len(), 1.0, &mut out) };
    assert_eq!(s, YganStatus::Ok);
    assert!((out - 1.0).abs() < 1e-12);
    assert!(last_error().is_none());

    let s = unsafe { ygan_ssim(ptr::null(), a.as_ptr(), a.len(), 1.0, &mut out) };
    assert_eq!(s, YganStatus::NullPointer);
    assert!(last_error().unwrap().contains('a'));

    let s = unsafe { ygan_ssim(a.as_ptr(), a.as_ptr(), 0, 1.0, &mut out) };
    assert_eq!(s, YganStatus::Contract);

    let s = unsafe { ygan_ssim(a.as_ptr(), a.as_ptr(), a.len(), 0.0, &mut out) };
    assert_eq!(s, YganStatus::InvalidArgument);
}

#[test]
fn bench_simulates_normalized_deterministic_speckle() {
    let mut bench = ptr::null_mut();
    assert_eq!(unsafe { ygan_bench_new(ptr::null(), 7, &mut bench) }, YganStatus::Ok);
    let side = unsafe { ygan_bench_side(bench) };
    assert_eq!(side, 64);
    let n = side * side;
    let obj1: Vec<f32> = (0..n).map(|i| ((i / side + i % side) % 2) as f32).collect();
    let obj2 = vec![1.0f32; n];
    let mut s1 = vec![0.0f32; n];
    let mut s2 = vec![0.0f32; n];
    unsafe {
        assert_eq!(ygan_bench_simulate(bench, obj1.as_ptr(), obj2.as_ptr(), 3, s1.as_mut_ptr()), YganStatus::Ok);
        assert_eq!(ygan_bench_simulate(bench, obj1.as_ptr(), obj2.as_ptr(), 3, s2.as_mut_ptr()), YganStatus::Ok);
        ygan_bench_free(bench);
    }
    assert_eq!(s1, s2);
    assert_eq!(s1.iter().copied().fold(0.0, f32::max), 1.0);
    assert!(s1.iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn bench_dark_objects_are_degenerate() {
    let mut bench = ptr::null_mut();
    assert_eq!(unsafe { ygan_bench_new(ptr::null(), 0, &mut bench) }, YganStatus::Ok);
    let n = 64 * 64;
    let dark = vec![0.0f32; n];
    let mut out = vec![0.0f32; n];
    let s = unsafe { ygan_bench_simulate(bench, dark.as_ptr(), dark.as_ptr(), 0, out.as_mut_ptr()) };
    unsafe { ygan_bench_free(bench) };
    assert_eq!(s, YganStatus::Degenerate);
}

#[test]
fn bench_config_errors_carry_pointer() {
    let json = CString::new(r#"{"image_side": 64, "pitch": 8e-6, "d_objects": 0.45, "z_detector": 0.05,
        "screen2": {"correlation_px": 1, "strength": 6.28}, "seed": 0, "bogus": 1}"#)
    .unwrap();
    let mut bench = ptr::null_mut();
    let s = unsafe { ygan_bench_new(json.as_ptr(), 0, &mut bench) };
    assert_eq!(s, YganStatus::Config);
    assert!(bench.is_null());
    assert!(last_error().unwrap().contains("bogus"));

    let json = CString::new(r#"{"image_side": 64, "pitch": 8e-6, "d_objects": 0.0, "z_detector": 0.05,
        "screen2": {"correlation_px": 1, "strength": 6.28}, "seed": 0}"#)
    .unwrap();
    let s = unsafe { ygan_bench_new(json.as_ptr(), 0, &mut bench) };
    assert_eq!(s, YganStatus::Config);
    assert!(last_error().unwrap().contains("/bench/d_objects"));
}

#[test]
fn model_roundtrip_matches_library() {
    let model = small_model();
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path(), 5).unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { ygan_model_load(path.as_ptr(), &mut handle) }, YganStatus::Ok);
    assert_eq!(unsafe { ygan_model_side(handle) }, 16);

    let count = 2;
    let n = count * 16 * 16;
    let x: Vec<f32> = (0..n).map(|i| ((i * 37) % 101) as f32 / 100.0).collect();
    let mut o1 = vec![0.0f32; n];
    let mut o2 = vec![0.0f32; n];
    let s = unsafe { ygan_model_reconstruct(handle, x.as_ptr(), count, o1.as_mut_ptr(), o2.as_mut_ptr()) };
    assert_eq!(s, YganStatus::Ok);
    let [p1, p2] = model
        .reconstruct_tensor(&Tensor::from_vec([count, 16, 16, 1], x.clone()).unwrap())
        .unwrap();
    assert_eq!(o1, p1.data());
    assert_eq!(o2, p2.data());

    let s = unsafe { ygan_model_reconstruct(handle, x.as_ptr(), 0, o1.as_mut_ptr(), o2.as_mut_ptr()) };
    assert_eq!(s, YganStatus::InvalidArgument);
    let s = unsafe { ygan_model_reconstruct(handle, x.as_ptr(), count, ptr::null_mut(), o2.as_mut_ptr()) };
    assert_eq!(s, YganStatus::NullPointer);
    unsafe { ygan_model_free(handle) };
}

#[test]
fn model_load_missing_dir_is_io() {
    let path = CString::new("/nonexistent/ygan-checkpoint").unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { ygan_model_load(path.as_ptr(), &mut handle) }, YganStatus::Io);
    assert!(handle.is_null());
    assert!(last_error().unwrap().contains("meta.json"));
    assert_eq!(unsafe { ygan_model_side(ptr::null()) }, 0);
    unsafe { ygan_model_free(ptr::null_mut()) };
}

#[test]
fn null_out_pointers_are_rejected() {
    assert_eq!(unsafe { ygan_bench_new(ptr::null(), 0, ptr::null_mut()) }, YganStatus::NullPointer);
    let path = CString::new("x").unwrap();
    assert_eq!(unsafe { ygan_model_load(path.as_ptr(), ptr::null_mut()) }, YganStatus::NullPointer);
}

//! C ABI over the ygan library.
//!
//! Every fallible function returns a [`YganStatus`]. On failure the message
//! is kept per thread and can be read with [`ygan_last_error`]. Objects are
//! opaque handles that must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ygan::metrics::{ssim, SsimParams};
use ygan::nn::Tensor;
use ygan::optics::{Bench, BenchConfig};
use ygan::ygan::Model;
use ygan::{Error, Image};

/// Result codes. Zero is success; the rest mirror the library's error kinds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YganStatus {
    Ok = 0,
    InvalidArgument = 1,
    Format = 2,
    Contract = 3,
    State = 4,
    Degenerate = 5,
    Config = 6,
    Numeric = 7,
    Io = 8,
    NullPointer = 9,
    Panic = 10,
}

/// A trained reconstruction model.
pub struct YganModel {
    model: Model,
}

/// A simulated optical bench with fixed diffusers.
pub struct YganBench {
    bench: Bench,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> YganStatus {
    match e {
        Error::InvalidArgument(_) => YganStatus::InvalidArgument,
        Error::Format { .. } => YganStatus::Format,
        Error::Contract { .. } => YganStatus::Contract,
        Error::State(_) => YganStatus::State,
        Error::Degenerate(_) => YganStatus::Degenerate,
        Error::Config { .. } | Error::Json(_) => YganStatus::Config,
        Error::Numeric(_) => YganStatus::Numeric,
        Error::Io { .. } => YganStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), YganStatus>) -> YganStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => YganStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            YganStatus::Panic
        }
    }
}

fn fail(e: Error) -> YganStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> YganStatus {
    set_error(format!("{what} is null"));
    YganStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, YganStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(Error::invalid(format!("{what} is not UTF-8"))))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], YganStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut_arg<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], YganStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ygan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ygan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint directory into `*out`.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ygan_model_load(dir: *const c_char, out: *mut *mut YganModel) -> YganStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dir = str_arg(dir, "dir")?;
        let (model, _) = Model::load(Path::new(dir)).map_err(fail)?;
        *out = Box::into_raw(Box::new(YganModel { model }));
        Ok(())
    })
}

/// Image side the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a handle from [`ygan_model_load`].
#[no_mangle]
pub unsafe extern "C" fn ygan_model_side(model: *const YganModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.side())
}

/// Reconstructs `count` speckles of `side * side` pixels each (row-major,
/// concatenated). Both heads write `count * side * side` values.
///
/// # Safety
/// All buffers must hold `count * side * side` floats.
#[no_mangle]
pub unsafe extern "C" fn ygan_model_reconstruct(
    model: *const YganModel,
    speckles: *const f32,
    count: usize,
    out_obj1: *mut f32,
    out_obj2: *mut f32,
) -> YganStatus {
    guard(|| {
        let m = match model.as_ref() {
            Some(m) => &m.model,
            None => return Err(null("model")),
        };
        if count == 0 {
            return Err(fail(Error::invalid("count must be > 0")));
        }
        let side = m.side();
        let n = count * side * side;
        let x = slice_arg(speckles, n, "speckles")?;
        let o1 = slice_mut_arg(out_obj1, n, "out_obj1")?;
        let o2 = slice_mut_arg(out_obj2, n, "out_obj2")?;
        let x = Tensor::from_vec([count, side, side, 1], x.to_vec()).map_err(fail)?;
        let [p1, p2] = m.reconstruct_tensor(&x).map_err(fail)?;
        o1.copy_from_slice(p1.data());
        o2.copy_from_slice(p2.data());
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ygan_model_free(model: *mut YganModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds a bench from a JSON configuration, or the default bench with the
/// given seed when `config_json` is null.
///
/// # Safety
/// `config_json` must be null or NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ygan_bench_new(config_json: *const c_char, seed: u64, out: *mut *mut YganBench) -> YganStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = if config_json.is_null() {
            BenchConfig {
                seed,
                ..BenchConfig::default()
            }
        } else {
            ygan::json::parse_json::<BenchConfig>(str_arg(config_json, "config_json")?).map_err(fail)?
        };
        cfg.validate().map_err(fail)?;
        let bench = Bench::new(&cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(YganBench { bench }));
        Ok(())
    })
}

/// Image side of the bench, or 0 for a null handle.
///
/// # Safety
/// `bench` must be null or a handle from [`ygan_bench_new`].
#[no_mangle]
pub unsafe extern "C" fn ygan_bench_side(bench: *const YganBench) -> usize {
    bench.as_ref().map_or(0, |b| b.bench.config().image_side)
}

/// Simulates the speckle of an object pair and writes it normalized by its
/// maximum into `out_speckle`.
///
/// # Safety
/// `obj1`, `obj2` and `out_speckle` must hold `side * side` floats.
#[no_mangle]
pub unsafe extern "C" fn ygan_bench_simulate(
    bench: *const YganBench,
    obj1: *const f32,
    obj2: *const f32,
    sample_seed: u64,
    out_speckle: *mut f32,
) -> YganStatus {
    guard(|| {
        let b = match bench.as_ref() {
            Some(b) => &b.bench,
            None => return Err(null("bench")),
        };
        let side = b.config().image_side;
        let n = side * side;
        let o1 = Image::new(side, slice_arg(obj1, n, "obj1")?.to_vec()).map_err(fail)?;
        let o2 = Image::new(side, slice_arg(obj2, n, "obj2")?.to_vec()).map_err(fail)?;
        let out = slice_mut_arg(out_speckle, n, "out_speckle")?;
        let img = b.synthesize(&o1, &o2, sample_seed).and_then(|s| s.normalized()).map_err(fail)?;
        out.copy_from_slice(img.pixels());
        Ok(())
    })
}

/// Releases a bench handle. Null is ignored.
///
/// # Safety
/// `bench` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ygan_bench_free(bench: *mut YganBench) {
    if !bench.is_null() {
        drop(Box::from_raw(bench));
    }
}

/// Global SSIM of two images of `len` pixels with the standard constants
/// scaled by `dynamic_range`.
///
/// # Safety
/// `a` and `b` must hold `len` floats and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ygan_ssim(
    a: *const f32,
    b: *const f32,
    len: usize,
    dynamic_range: f64,
    out: *mut f64,
) -> YganStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = slice_arg(a, len, "a")?;
        let b = slice_arg(b, len, "b")?;
        let p = SsimParams {
            dynamic_range,
            ..SsimParams::default()
        };
        p.validate().map_err(fail)?;
        *out = ssim(a, b, &p).map_err(fail)?;
        Ok(())
    })
}

//! C ABI over `qtranscode`.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns a [`QtStatus`];
//! on failure the message is kept per thread and can be copied out with
//! [`qt_last_error_message`]. Panics are caught and reported as
//! `QT_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qtranscode::channel::{depolarize, NoiseParam};
use qtranscode::codec::{self, CodecParams};
use qtranscode::encode::{decode, encode, LatentVector};
use qtranscode::readout::{expectations, ObservableSet};
use qtranscode::{checkpoint, metrics, DensityMatrix, Error, HermitianParams};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotPhysical = 4,
    Singular = 5,
    Io = 6,
    Parse = 7,
    Internal = 8,
}

impl From<&Error> for QtStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch(_) | Error::NotSquare { .. } | Error::DimensionTooSmall { .. } => {
                QtStatus::DimensionMismatch
            }
            Error::NotHermitian { .. }
            | Error::BadTrace { .. }
            | Error::NotPositive { .. }
            | Error::NotUnitNorm { .. }
            | Error::ImaginaryResidue(_) => QtStatus::NotPhysical,
            Error::SingularInput | Error::VanishingNorm(_) | Error::DegenerateObservable(_) => QtStatus::Singular,
            Error::Io(_) => QtStatus::Io,
            Error::Parse { .. } => QtStatus::Parse,
            Error::BadNoise(_) | Error::InvalidArgument(_) | Error::Diverged { .. } => QtStatus::InvalidArgument,
        }
    }
}

/// Opaque density matrix.
pub struct QtDensityMatrix {
    inner: DensityMatrix,
}

/// Opaque trained codec.
pub struct QtCodec {
    inner: CodecParams,
}

/// Layer sizes of a loaded codec.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QtCodecDims {
    pub height: usize,
    pub width: usize,
    pub hidden: usize,
    pub latent: usize,
    pub n: usize,
    pub observables: usize,
    pub classes: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), (QtStatus, String)>) -> QtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            QtStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QtStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (QtStatus, String) {
    (QtStatus::from(&e), e.to_string())
}

fn null(name: &str) -> (QtStatus, String) {
    (QtStatus::NullPointer, format!("{name} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], (QtStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], (QtStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn density<'a>(h: *const QtDensityMatrix) -> Result<&'a DensityMatrix, (QtStatus, String)> {
    h.as_ref().map(|d| &d.inner).ok_or_else(|| null("density handle"))
}

fn boxed(out: *mut *mut QtDensityMatrix, inner: DensityMatrix) -> Result<(), (QtStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(QtDensityMatrix { inner })) };
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn qt_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Encodes the unit latent vector `y[0..len]` into an n x n density matrix.
///
/// # Safety
/// `y` must be valid for `len` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_encode(y: *const f64, len: usize, n: usize, out: *mut *mut QtDensityMatrix) -> QtStatus {
    guard(|| {
        let values = slice(y, len, "y")?.to_vec();
        let latent = LatentVector::new(values).map_err(lib_err)?;
        boxed(out, encode(&latent, n).map_err(lib_err)?)
    })
}

/// Writes the first `len` latent values recovered from `rho` into `out`.
///
/// # Safety
/// `rho` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn qt_decode(rho: *const QtDensityMatrix, out: *mut f64, len: usize) -> QtStatus {
    guard(|| {
        let d = density(rho)?;
        let y = decode(d, len).map_err(lib_err)?;
        slice_mut(out, len, "out")?.copy_from_slice(&y);
        Ok(())
    })
}

/// Applies the depolarizing channel with noise `eps` in [0, 1].
///
/// # Safety
/// `rho` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_depolarize(
    rho: *const QtDensityMatrix,
    eps: f64,
    out: *mut *mut QtDensityMatrix,
) -> QtStatus {
    guard(|| {
        let d = density(rho)?;
        let e = NoiseParam::new(eps).map_err(lib_err)?;
        boxed(out, depolarize(d, e))
    })
}

/// Matrix dimension n, or 0 for a null handle.
///
/// # Safety
/// `rho` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qt_density_dim(rho: *const QtDensityMatrix) -> usize {
    rho.as_ref().map_or(0, |d| d.inner.dim())
}

/// Copies the row-major entries into `re` and `im`, each of length n*n.
///
/// # Safety
/// `rho` must be a live handle; `re` and `im` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn qt_density_entries(
    rho: *const QtDensityMatrix,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> QtStatus {
    guard(|| {
        let d = density(rho)?;
        let entries = d.matrix().entries();
        if len != entries.len() {
            return Err((QtStatus::DimensionMismatch, format!("buffers of {len} for {} entries", entries.len())));
        }
        let re = slice_mut(re, len, "re")?;
        let im = slice_mut(im, len, "im")?;
        for (i, z) in entries.iter().enumerate() {
            re[i] = z.re;
            im[i] = z.im;
        }
        Ok(())
    })
}

/// tr(rho^2).
///
/// # Safety
/// `rho` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_purity(rho: *const QtDensityMatrix, out: *mut f64) -> QtStatus {
    guard(|| {
        let d = density(rho)?;
        *out.as_mut().ok_or_else(|| null("out"))? = d.purity();
        Ok(())
    })
}

/// Expectations tr(rho O_i) of `count` observables, each given as n*n raw
/// Hermitian parameters (n diagonal values, then re/im of the strict upper
/// triangle row by row) and normalized to unit Frobenius norm.
///
/// # Safety
/// `params` must be valid for `count * n * n` reads, `out` for `count` writes.
#[no_mangle]
pub unsafe extern "C" fn qt_expectations(
    rho: *const QtDensityMatrix,
    params: *const f64,
    count: usize,
    out: *mut f64,
) -> QtStatus {
    guard(|| {
        let d = density(rho)?;
        let n = d.dim();
        let raw = slice(params, count * n * n, "params")?;
        let set = raw
            .chunks(n * n)
            .map(|c| HermitianParams::new(n, c.to_vec()))
            .collect::<qtranscode::Result<Vec<_>>>()
            .and_then(|ps| ObservableSet::new(n, ps))
            .map_err(lib_err)?;
        let v = expectations(d, &set).map_err(lib_err)?;
        slice_mut(out, count, "out")?.copy_from_slice(v.values());
        Ok(())
    })
}

/// Releases a density handle; null is ignored.
///
/// # Safety
/// `rho` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qt_density_free(rho: *mut QtDensityMatrix) {
    if !rho.is_null() {
        drop(Box::from_raw(rho));
    }
}

/// PSNR in dB; +infinity for identical images.
///
/// # Safety
/// `a` and `b` must be valid for `len` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_psnr(a: *const f64, b: *const f64, len: usize, peak: f64, out: *mut f64) -> QtStatus {
    guard(|| {
        let v = metrics::psnr(slice(a, len, "a")?, slice(b, len, "b")?, peak).map_err(lib_err)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Whole-image SSIM.
///
/// # Safety
/// `a` and `b` must be valid for `len` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_ssim(a: *const f64, b: *const f64, len: usize, peak: f64, out: *mut f64) -> QtStatus {
    guard(|| {
        let v = metrics::ssim(slice(a, len, "a")?, slice(b, len, "b")?, peak).map_err(lib_err)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Loads a codec checkpoint from a UTF-8 path.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_codec_load(path: *const c_char, out: *mut *mut QtCodec) -> QtStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (QtStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let inner = checkpoint::load(Path::new(p)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(QtCodec { inner }));
        Ok(())
    })
}

/// # Safety
/// `codec` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qt_codec_dims(codec: *const QtCodec, out: *mut QtCodecDims) -> QtStatus {
    guard(|| {
        let c = codec.as_ref().ok_or_else(|| null("codec"))?;
        let d = c.inner.dims;
        *out.as_mut().ok_or_else(|| null("out"))? = QtCodecDims {
            height: d.height,
            width: d.width,
            hidden: d.hidden,
            latent: d.latent,
            n: d.n,
            observables: d.observables,
            classes: d.classes,
        };
        Ok(())
    })
}

/// Runs the codec on one image at noise `eps`. `recon` receives
/// height*width pixels clamped to [0, 1]; `logits` receives `classes` values
/// and may be null when `classes` is 0.
///
/// # Safety
/// Buffers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn qt_codec_reconstruct(
    codec: *const QtCodec,
    pixels: *const f64,
    len: usize,
    eps: f64,
    recon: *mut f64,
    logits: *mut f64,
    classes: usize,
) -> QtStatus {
    guard(|| {
        let c = codec.as_ref().ok_or_else(|| null("codec"))?;
        let d = c.inner.dims;
        if len != d.pixels() || (classes != 0 && classes != d.classes) {
            return Err((QtStatus::DimensionMismatch, format!("codec expects {} pixels, {} classes", d.pixels(), d.classes)));
        }
        let image = qtranscode::dataset::Image::new(d.height, d.width, slice(pixels, len, "pixels")?.to_vec())
            .map_err(lib_err)?;
        let e = NoiseParam::new(eps).map_err(lib_err)?;
        let (out, l) = codec::reconstruct(&image, e, &c.inner).map_err(lib_err)?;
        slice_mut(recon, len, "recon")?.copy_from_slice(&out.pixels);
        if classes != 0 {
            slice_mut(logits, classes, "logits")?.copy_from_slice(&l);
        }
        Ok(())
    })
}

/// Releases a codec handle; null is ignored.
///
/// # Safety
/// `codec` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qt_codec_free(codec: *mut QtCodec) {
    if !codec.is_null() {
        drop(Box::from_raw(codec));
    }
}

//! C ABI over `rsr-core`.
//!
//! Datasets and recovery results are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! an [`RsrStatus`]; on failure [`rsr_last_error`] describes the problem.
//! Matrices cross the boundary as column-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nalgebra::DMatrix;
use rsr_core::datagen::{self, AdversaryStrategy, CleanModel, CorruptedDataset, DatasetSpec, NoiseLevel, NoiseModel};
use rsr_core::pipeline::{ransac_plus, Centering, RansacPlusConfig, RecoveryResult};
use rsr_core::{container, linalg, Error, SubspaceBasis};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    InsufficientSamples = 4,
    EpsilonTooLarge = 5,
    Degenerate = 6,
    Io = 7,
    Format = 8,
    Panic = 99,
}

/// Opaque dataset handle.
pub struct RsrDataset {
    inner: CorruptedDataset,
}

/// Opaque recovery result handle.
pub struct RsrRecovery {
    inner: RecoveryResult,
}

/// Estimator settings. Obtain defaults from [`rsr_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RsrConfig {
    /// Assumed corruption fraction, at most 0.5.
    pub epsilon: f64,
    pub delta: f64,
    pub c_prime: f64,
    pub t_cap: u64,
    /// Coarse-stage threshold constant, at least 2.2.
    pub c: f64,
    pub t0: f64,
    /// Nonzero to difference consecutive sample pairs first.
    pub pairwise_difference: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(err: &Error) -> RsrStatus {
    match err {
        Error::Shape(_) => RsrStatus::Shape,
        Error::InsufficientSamples { .. } | Error::OddSampleCount(_) | Error::EmptyInput(_) => {
            RsrStatus::InsufficientSamples
        }
        Error::EpsilonTooLarge(_) => RsrStatus::EpsilonTooLarge,
        Error::DegenerateInput(_) | Error::DegenerateData(_) => RsrStatus::Degenerate,
        Error::Io { .. } => RsrStatus::Io,
        Error::Container(_) | Error::Json(_) | Error::Csv(_) | Error::Schema(_) => RsrStatus::Format,
        _ => RsrStatus::InvalidArgument,
    }
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), (RsrStatus, String)>) -> RsrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RsrStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RsrStatus::Panic
        }
    }
}

fn core<T>(r: rsr_core::Result<T>) -> Result<T, (RsrStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RsrStatus, String) {
    (RsrStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: String) -> (RsrStatus, String) {
    (RsrStatus::InvalidArgument, message)
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, (RsrStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    let text = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(text))
}

unsafe fn matrix_arg(data: *const f64, rows: usize, cols: usize) -> Result<DMatrix<f64>, (RsrStatus, String)> {
    if data.is_null() {
        return Err(null("data"));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| invalid(format!("shape {rows}x{cols} overflows")))?;
    Ok(DMatrix::from_column_slice(
        rows,
        cols,
        std::slice::from_raw_parts(data, len),
    ))
}

fn core_config(config: &RsrConfig) -> RansacPlusConfig {
    let mut out = RansacPlusConfig::default();
    out.stage2.epsilon = config.epsilon;
    out.stage2.delta = config.delta;
    out.stage2.c_prime = config.c_prime;
    out.stage2.t_cap = usize::try_from(config.t_cap).unwrap_or(usize::MAX);
    out.stage1.c = config.c;
    out.stage1.t0 = config.t0;
    if config.pairwise_difference != 0 {
        out.center = Centering::PairwiseDifference;
    }
    out
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rsr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rsr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `out` must be null or point to writable memory for one `RsrConfig`.
#[no_mangle]
pub unsafe extern "C" fn rsr_config_default(out: *mut RsrConfig) -> RsrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = RansacPlusConfig::default();
        *out = RsrConfig {
            epsilon: d.stage2.epsilon,
            delta: d.stage2.delta,
            c_prime: d.stage2.c_prime,
            t_cap: d.stage2.t_cap as u64,
            c: d.stage1.c,
            t0: d.stage1.t0,
            pairwise_difference: 0,
        };
        Ok(())
    })
}

/// Draws a dataset: `r_star`-dimensional Gaussian inliers with unit
/// eigenvalues, isotropic noise of trace `sigma2`, and a fraction `epsilon`
/// replaced by a rank-2 adversary orthogonal to the planted subspace.
///
/// # Safety
/// `out` must be null or point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rsr_dataset_generate(
    d: usize,
    n: usize,
    r_star: usize,
    epsilon: f64,
    sigma2: f64,
    seed: u64,
    out: *mut *mut RsrDataset,
) -> RsrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let spec = DatasetSpec {
            model: core(CleanModel::isotropic(d, r_star, 1.0, seed))?,
            n,
            noise: core(NoiseModel::isotropic(sigma2, d))?,
            epsilon,
            adversary: AdversaryStrategy::orthogonal_rank2(),
        };
        let inner = core(datagen::generate(&spec, seed))?;
        *out = Box::into_raw(Box::new(RsrDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rsr_dataset_load(path: *const c_char, out: *mut *mut RsrDataset) -> RsrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let inner = core(container::load_dataset(&path_arg(path)?))?;
        *out = Box::into_raw(Box::new(RsrDataset { inner }));
        Ok(())
    })
}

/// Writes the container and its `.json` sidecar.
///
/// # Safety
/// `dataset` must be null or a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rsr_dataset_save(dataset: *const RsrDataset, path: *const c_char) -> RsrStatus {
    guard(|| {
        let dataset = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        core(container::save_dataset(&path_arg(path)?, &dataset.inner))
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rsr_dataset_free(dataset: *mut RsrDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// All pointers must be null or valid; outputs are skipped when null.
#[no_mangle]
pub unsafe extern "C" fn rsr_dataset_shape(
    dataset: *const RsrDataset,
    d: *mut usize,
    n: *mut usize,
    r_star: *mut usize,
) -> RsrStatus {
    guard(|| {
        let ds = &dataset.as_ref().ok_or_else(|| null("dataset"))?.inner;
        if let Some(d) = d.as_mut() {
            *d = ds.d();
        }
        if let Some(n) = n.as_mut() {
            *n = ds.n();
        }
        if let Some(r) = r_star.as_mut() {
            *r = ds.clean_model.r_star();
        }
        Ok(())
    })
}

/// Borrowed pointer to the `d × n` column-major samples, valid while the
/// handle lives. Null for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rsr_dataset_data(dataset: *const RsrDataset) -> *const f64 {
    dataset.as_ref().map_or(ptr::null(), |ds| ds.inner.x.as_ptr())
}

/// Copies the inlier mask (1 = inlier) into `out`, which holds `len >= n` bytes.
///
/// # Safety
/// `out` must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rsr_dataset_copy_mask(dataset: *const RsrDataset, out: *mut u8, len: usize) -> RsrStatus {
    guard(|| {
        let ds = &dataset.as_ref().ok_or_else(|| null("dataset"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        if len < ds.n() {
            return Err((
                RsrStatus::Shape,
                format!("mask buffer holds {len} bytes, need {}", ds.n()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(out, ds.n());
        for (d, &m) in dst.iter_mut().zip(&ds.inlier_mask) {
            *d = m as u8;
        }
        Ok(())
    })
}

/// Runs the two-stage estimator on raw column-major data.
///
/// # Safety
/// `data` must point to `d * n` doubles; `config` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsr_ransac_plus(
    data: *const f64,
    d: usize,
    n: usize,
    noise_trace: f64,
    noise_norm: f64,
    config: *const RsrConfig,
    seed: u64,
    out: *mut *mut RsrRecovery,
) -> RsrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        let x = matrix_arg(data, d, n)?;
        let noise = core(NoiseLevel::new(noise_trace, noise_norm))?;
        let inner = core(ransac_plus(&x, &noise, &core_config(config), seed))?;
        *out = Box::into_raw(Box::new(RsrRecovery { inner }));
        Ok(())
    })
}

/// Runs the estimator on a dataset handle with its true noise level.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn rsr_dataset_recover(
    dataset: *const RsrDataset,
    config: *const RsrConfig,
    seed: u64,
    out: *mut *mut RsrRecovery,
) -> RsrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let ds = &dataset.as_ref().ok_or_else(|| null("dataset"))?.inner;
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        let inner = core(ransac_plus(&ds.x, &ds.noise_model.level(), &core_config(config), seed))?;
        *out = Box::into_raw(Box::new(RsrRecovery { inner }));
        Ok(())
    })
}

/// # Safety
/// `recovery` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rsr_recovery_free(recovery: *mut RsrRecovery) {
    if !recovery.is_null() {
        drop(Box::from_raw(recovery));
    }
}

/// Ambient dimension, coarse dimension `r̂` and final dimension `r̃`.
///
/// # Safety
/// Pointers must be null or valid; null outputs are skipped.
#[no_mangle]
pub unsafe extern "C" fn rsr_recovery_dims(
    recovery: *const RsrRecovery,
    d: *mut usize,
    r_hat: *mut usize,
    r_tilde: *mut usize,
) -> RsrStatus {
    guard(|| {
        let rec = &recovery.as_ref().ok_or_else(|| null("recovery"))?.inner;
        if let Some(d) = d.as_mut() {
            *d = rec.basis.ambient_dim();
        }
        if let Some(r) = r_hat.as_mut() {
            *r = rec.r_hat;
        }
        if let Some(r) = r_tilde.as_mut() {
            *r = rec.r_tilde;
        }
        Ok(())
    })
}

/// Whether a spectral gap was found and whether the batch count was capped.
///
/// # Safety
/// Pointers must be null or valid; null outputs are skipped.
#[no_mangle]
pub unsafe extern "C" fn rsr_recovery_flags(
    recovery: *const RsrRecovery,
    gap_found: *mut i32,
    capped: *mut i32,
) -> RsrStatus {
    guard(|| {
        let rec = &recovery.as_ref().ok_or_else(|| null("recovery"))?.inner;
        if let Some(g) = gap_found.as_mut() {
            *g = rec.stage2.gap_found as i32;
        }
        if let Some(c) = capped.as_mut() {
            *c = rec.stage2.capped as i32;
        }
        Ok(())
    })
}

/// Copies the `d × r̃` column-major basis into `out` (`len >= d·r̃`).
///
/// # Safety
/// `out` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rsr_recovery_copy_basis(recovery: *const RsrRecovery, out: *mut f64, len: usize) -> RsrStatus {
    guard(|| {
        let rec = &recovery.as_ref().ok_or_else(|| null("recovery"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let src = rec.basis.columns().as_slice();
        if len < src.len() {
            return Err((
                RsrStatus::Shape,
                format!("basis buffer holds {len} doubles, need {}", src.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, src.len()).copy_from_slice(src);
        Ok(())
    })
}

/// Distance between the recovered subspace and a dataset's planted one.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn rsr_recovery_error(
    recovery: *const RsrRecovery,
    dataset: *const RsrDataset,
    out: *mut f64,
) -> RsrStatus {
    guard(|| {
        let rec = &recovery.as_ref().ok_or_else(|| null("recovery"))?.inner;
        let ds = &dataset.as_ref().ok_or_else(|| null("dataset"))?.inner;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = core(linalg::subspace_distance(&rec.basis, ds.clean_model.basis()))?;
        Ok(())
    })
}

/// `‖P_A − P_B‖₂` for column-major orthonormal bases `a` (`d × ra`) and
/// `b` (`d × rb`).
///
/// # Safety
/// `a` and `b` must point to `d·ra` and `d·rb` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsr_subspace_distance(
    a: *const f64,
    ra: usize,
    b: *const f64,
    rb: usize,
    d: usize,
    out: *mut f64,
) -> RsrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let a = core(SubspaceBasis::new(matrix_arg(a, d, ra)?))?;
        let b = core(SubspaceBasis::new(matrix_arg(b, d, rb)?))?;
        *out = core(linalg::subspace_distance(&a, &b))?;
        Ok(())
    })
}

//! C ABI over `seqgauss`.
//!
//! Conventions: every fallible function returns an [`SgStatus`] and writes
//! its result through an out pointer. On failure a message is kept per
//! thread and can be read with [`sg_last_error_message`]. Matrices and
//! covariance processes are opaque handles released with their `*_free`
//! function; strings returned by the library are released with
//! [`sg_string_free`]. Dense data are row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use seqgauss::coupling::{block_size, rate_chi, rate_xi, RateParams, Regime};
use seqgauss::covest::{bandwidth_default, qhat_with, Centering, CovProcess};
use seqgauss::harness::KernelRef;
use seqgauss::inference::{quantile_mc, run_test, Statistic, TestConfig};
use seqgauss::matops::Matrix;
use seqgauss::procmodel::{gen_path, InnovationStream, KernelSpec};
use seqgauss::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    InvalidInput = 1,
    NotPsd = 2,
    Numerical = 3,
    Io = 4,
    NullPointer = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatistic {
    Seq = 0,
    Cusum = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgRegime {
    Chi = 0,
    Xi = 1,
}

/// Options of [`sg_run_test`]. Use [`sg_test_options_default`] and
/// override fields; NaN offsets and a zero bandwidth select the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SgTestOptions {
    pub statistic: SgStatistic,
    pub alpha: f64,
    pub tau: f64,
    pub nu: f64,
    pub bandwidth: usize,
    pub mc_reps: usize,
    pub seed: u64,
    pub center: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SgTestResult {
    pub value: f64,
    pub quantile: f64,
    pub threshold: f64,
    pub tau: f64,
    pub nu: f64,
    pub bandwidth: usize,
    pub reject: bool,
}

/// Opaque `n x d` data matrix.
pub struct SgMatrix {
    inner: Matrix,
}

/// Opaque cumulative covariance process `Q(0..n)`.
pub struct SgCovProcess {
    inner: CovProcess,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SgStatus {
    match e {
        Error::InvalidInput(_) => SgStatus::InvalidInput,
        Error::NotPsd { .. } => SgStatus::NotPsd,
        Error::Numerical(_) => SgStatus::Numerical,
        Error::Io(_) => SgStatus::Io,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SgStatus::NullPointer
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SgStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Lib(Error::InvalidInput(format!("{what} is not valid UTF-8"))))
}

fn statistic(s: SgStatistic) -> Statistic {
    match s {
        SgStatistic::Seq => Statistic::Seq,
        SgStatistic::Cusum => Statistic::Cusum,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// The out pointer must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sg_rate_chi(q: f64, beta: f64, out_rate: *mut f64) -> SgStatus {
    guard(|| {
        *out(out_rate, "out_rate")? = rate_chi(q, beta)?;
        Ok(())
    })
}

/// # Safety
/// The out pointer must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sg_rate_xi(q: f64, beta: f64, out_rate: *mut f64) -> SgStatus {
    guard(|| {
        *out(out_rate, "out_rate")? = rate_xi(q, beta)?;
        Ok(())
    })
}

/// # Safety
/// The out pointer must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sg_block_size(
    q: f64,
    beta: f64,
    n: usize,
    d: usize,
    regime: SgRegime,
    out_len: *mut usize,
) -> SgStatus {
    guard(|| {
        let r = match regime {
            SgRegime::Chi => Regime::Chi,
            SgRegime::Xi => Regime::Xi,
        };
        *out(out_len, "out_len")? = block_size(RateParams { q, beta, n, d }, r)?;
        Ok(())
    })
}

/// Copies `rows * cols` doubles (row-major) into a new matrix handle.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out_matrix: *mut *mut SgMatrix,
) -> SgStatus {
    guard(|| {
        let slot = out(out_matrix, "out_matrix")?;
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        let len = rows.checked_mul(cols).ok_or_else(|| Error::InvalidInput("matrix too large".into()))?;
        let v = std::slice::from_raw_parts(data, len).to_vec();
        let inner = Matrix::from_vec(rows, cols, v)?;
        *slot = Box::into_raw(Box::new(SgMatrix { inner }));
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_matrix_rows(m: *const SgMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.rows())
}

/// # Safety
/// `m` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_matrix_cols(m: *const SgMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.cols())
}

/// Copies the matrix into `buf`, which must hold `len >= rows * cols`
/// doubles.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_matrix_copy(m: *const SgMatrix, buf: *mut f64, len: usize) -> SgStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let src = m.inner.as_slice();
        if len < src.len() {
            return Err(Error::InvalidInput(format!("buffer holds {len} values, need {}", src.len())).into());
        }
        std::slice::from_raw_parts_mut(buf, src.len()).copy_from_slice(src);
        Ok(())
    })
}

/// # Safety
/// `m` must be a handle from this library or NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_matrix_free(m: *mut SgMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Simulates `n` steps of a kernel. `kernel` is a demo name (`iid`, `ma1`,
/// `lipschitz`, `jump`, `categorical`), a path to a kernel JSON file, or an
/// inline JSON spec. `d = 0` keeps the kernel's own dimension.
///
/// # Safety
/// `kernel` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sg_simulate(
    kernel: *const c_char,
    n: usize,
    d: usize,
    seed: u64,
    out_matrix: *mut *mut SgMatrix,
) -> SgStatus {
    guard(|| {
        let slot = out(out_matrix, "out_matrix")?;
        let text = str_arg(kernel, "kernel")?;
        let spec = if text.trim_start().starts_with('{') {
            KernelSpec::from_json(text)?
        } else {
            KernelRef::Named(text.to_string()).resolve(Some(Path::new(".")))?
        };
        let d = if d == 0 { spec.dim() } else { d };
        let k = spec.with_shape(n, d)?.build()?;
        let inner = gen_path(k.as_ref(), n, &InnovationStream::new(seed))?;
        *slot = Box::into_raw(Box::new(SgMatrix { inner }));
        Ok(())
    })
}

/// Value of the sequential or CUSUM statistic.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sg_statistic(m: *const SgMatrix, stat: SgStatistic, out_value: *mut f64) -> SgStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        *out(out_value, "out_value")? = statistic(stat).eval(&m.inner);
        Ok(())
    })
}

/// Window estimator of the cumulative long-run covariance; `bandwidth = 0`
/// uses `ceil(n^(1/3))`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sg_qhat(
    m: *const SgMatrix,
    bandwidth: usize,
    center: bool,
    out_cov: *mut *mut SgCovProcess,
) -> SgStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let slot = out(out_cov, "out_cov")?;
        let b = if bandwidth == 0 { bandwidth_default(m.inner.rows()) } else { bandwidth };
        let c = if center { Centering::Global } else { Centering::None };
        let inner = qhat_with(&m.inner, b, c)?;
        *slot = Box::into_raw(Box::new(SgCovProcess { inner }));
        Ok(())
    })
}

/// Builds a process from `n` increments of size `d x d` (row-major,
/// concatenated). Increments must be PSD.
///
/// # Safety
/// `data` must point to `n * d * d` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_cov_from_increments(
    n: usize,
    d: usize,
    data: *const f64,
    out_cov: *mut *mut SgCovProcess,
) -> SgStatus {
    guard(|| {
        let slot = out(out_cov, "out_cov")?;
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        let per = d.checked_mul(d).ok_or_else(|| Error::InvalidInput("dimension too large".into()))?;
        let len = n.checked_mul(per).ok_or_else(|| Error::InvalidInput("process too large".into()))?;
        let all = std::slice::from_raw_parts(data, len);
        let incs = if per == 0 {
            Vec::new()
        } else {
            all.chunks(per).map(|c| seqgauss::matops::SymMat::from_dense(d, c)).collect::<Result<_, _>>()?
        };
        let inner = CovProcess::from_increments(d, incs)?;
        *slot = Box::into_raw(Box::new(SgCovProcess { inner }));
        Ok(())
    })
}

/// # Safety
/// `q` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_cov_len(q: *const SgCovProcess) -> usize {
    q.as_ref().map_or(0, |q| q.inner.len())
}

/// # Safety
/// `q` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_cov_dim(q: *const SgCovProcess) -> usize {
    q.as_ref().map_or(0, |q| q.inner.dim())
}

/// Writes `Q(k)`, `0 <= k <= n`, as a dense `d x d` array.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_cov_at(q: *const SgCovProcess, k: usize, buf: *mut f64, len: usize) -> SgStatus {
    guard(|| {
        let q = deref(q, "cov")?;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        if k > q.inner.len() {
            return Err(Error::InvalidInput(format!("k = {k} exceeds n = {}", q.inner.len())).into());
        }
        let dense = q.inner.at(k).to_dense();
        if len < dense.len() {
            return Err(Error::InvalidInput(format!("buffer holds {len} values, need {}", dense.len())).into());
        }
        std::slice::from_raw_parts_mut(buf, dense.len()).copy_from_slice(&dense);
        Ok(())
    })
}

/// # Safety
/// `q` must be a handle from this library or NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_cov_free(q: *mut SgCovProcess) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// Monte-Carlo `(1 - alpha)` quantile of the statistic under independent
/// Gaussian increments of `q`. Deterministic in `seed`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sg_quantile_mc(
    q: *const SgCovProcess,
    stat: SgStatistic,
    alpha: f64,
    reps: usize,
    seed: u64,
    out_quantile: *mut f64,
) -> SgStatus {
    guard(|| {
        let q = deref(q, "cov")?;
        *out(out_quantile, "out_quantile")? = quantile_mc(&q.inner, statistic(stat), alpha, reps, seed)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn sg_test_options_default() -> SgTestOptions {
    SgTestOptions {
        statistic: SgStatistic::Seq,
        alpha: 0.1,
        tau: f64::NAN,
        nu: f64::NAN,
        bandwidth: 0,
        mc_reps: 2000,
        seed: 0,
        center: false,
    }
}

fn config_of(o: &SgTestOptions) -> TestConfig {
    let opt = |v: f64| (!v.is_nan()).then_some(v);
    TestConfig {
        statistic: statistic(o.statistic),
        alpha: o.alpha,
        nu: opt(o.nu),
        tau: opt(o.tau),
        bandwidth: (o.bandwidth != 0).then_some(o.bandwidth),
        mc_reps: o.mc_reps,
        seed: o.seed,
        centering: if o.center { Centering::Global } else { Centering::None },
    }
}

/// Runs the offset test on the data. `options` may be NULL for defaults.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sg_run_test(
    m: *const SgMatrix,
    options: *const SgTestOptions,
    out_result: *mut SgTestResult,
) -> SgStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let slot = out(out_result, "out_result")?;
        let opts = options.as_ref().copied().unwrap_or_else(|| sg_test_options_default());
        let r = run_test(&m.inner, &config_of(&opts))?;
        *slot = SgTestResult {
            value: r.value,
            quantile: r.quantile,
            threshold: r.threshold,
            tau: r.tau,
            nu: r.nu,
            bandwidth: r.bandwidth,
            reject: r.reject,
        };
        Ok(())
    })
}

/// Like [`sg_run_test`] but returns the full report as JSON; release it
/// with [`sg_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sg_run_test_json(
    m: *const SgMatrix,
    options: *const SgTestOptions,
    out_json: *mut *mut c_char,
) -> SgStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let slot = out(out_json, "out_json")?;
        let opts = options.as_ref().copied().unwrap_or_else(|| sg_test_options_default());
        let r = run_test(&m.inner, &config_of(&opts))?;
        let text = serde_json::to_string(&r).map_err(|e| Error::Numerical(e.to_string()))?;
        *slot = CString::new(text).expect("json has no NUL").into_raw();
        Ok(())
    })
}

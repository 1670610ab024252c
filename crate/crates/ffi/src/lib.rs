//! C ABI over the `framelet` library.
//!
//! Objects cross the boundary as opaque handles created by a `*_haar`,
//! `*_solve`, `*_build` or `*_load` call and released with the matching
//! `*_free`. Every fallible call returns a [`FrameletStatus`]; the message
//! for the most recent failure on the calling thread is available through
//! [`framelet_last_error_message`]. Matrices are four `int64_t` in row
//! order `a, b, c, d` for `[[a, b], [c, d]]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use framelet::field::SampledField;
use framelet::filter::FilterEvaluator;
use framelet::lattice::{reduce_to_canonical, CanonicalForm, IntMat2};
use framelet::lawton::{self, FilterCoeffs, FilterDocument, SolverOptions};
use framelet::persist;
use framelet::scaling::SynthesisParams;
use framelet::verify::{verify_system, VerifyOptions};
use framelet::wavelet::{build_system, BuildOptions, WaveletSystem};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameletStatus {
    Ok = 0,
    InvalidArgument = 1,
    NotReducible = 2,
    SolverFailed = 3,
    Io = 4,
    Format = 5,
    NullPointer = 6,
    Panic = 7,
}

/// Which stored field an accessor reads.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameletFieldKind {
    /// Scaling function in canonical coordinates.
    Phi = 0,
    /// Wavelet for the canonical matrix.
    PsiC = 1,
    /// Wavelet for the caller's matrix.
    Psi = 2,
}

/// Options for [`framelet_system_build`]; start from
/// [`framelet_build_params_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameletBuildParams {
    pub n0: i64,
    pub seed: u64,
    pub random_starts: u32,
    /// Depth of the truncated product.
    pub depth: u32,
    /// Frequency samples per axis.
    pub grid_n: u32,
    /// Frequency box half-width in multiples of π.
    pub extent_pi: f64,
}

/// A validated low-pass filter bound to its canonical form.
pub struct FrameletFilter {
    h: FilterCoeffs,
    canonical: CanonicalForm,
    ev: FilterEvaluator,
}

/// A built or loaded wavelet system.
pub struct FrameletSystem {
    inner: WaveletSystem,
}

#[derive(Debug, thiserror::Error)]
enum FfiError {
    #[error(transparent)]
    Core(#[from] framelet::Error),
    #[error("null pointer passed for `{0}`")]
    Null(&'static str),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("panic inside the library: {0}")]
    Panic(String),
}

impl FfiError {
    fn status(&self) -> FrameletStatus {
        use framelet::Error as E;
        match self {
            FfiError::Null(_) => FrameletStatus::NullPointer,
            FfiError::Invalid(_) => FrameletStatus::InvalidArgument,
            FfiError::Panic(_) => FrameletStatus::Panic,
            FfiError::Core(e) => match e {
                E::NotReducible { .. } => FrameletStatus::NotReducible,
                E::NoConvergence { .. } | E::FilterRejected { .. } => FrameletStatus::SolverFailed,
                E::Io(_) => FrameletStatus::Io,
                E::Json(_) | E::Parse(_) | E::MismatchedFilter(_) => FrameletStatus::Format,
                E::InvalidN0(_)
                | E::GridTooCoarse { .. }
                | E::InvalidParameter(_)
                | E::DegenerateInput(_) => FrameletStatus::InvalidArgument,
            },
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard<F: FnOnce() -> Result<(), FfiError>>(f: F) -> FrameletStatus {
    let err = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return FrameletStatus::Ok,
        Ok(Err(e)) => e,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown".into());
            FfiError::Panic(msg)
        }
    };
    set_last_error(&err.to_string());
    err.status()
}

unsafe fn read_matrix(p: *const i64, name: &'static str) -> Result<IntMat2, FfiError> {
    if p.is_null() {
        return Err(FfiError::Null(name));
    }
    let m = std::slice::from_raw_parts(p, 4);
    Ok(IntMat2::new(m[0], m[1], m[2], m[3]))
}

unsafe fn write_matrix(p: *mut i64, m: &IntMat2) {
    if !p.is_null() {
        std::slice::from_raw_parts_mut(p, 4).copy_from_slice(&[m.a, m.b, m.c, m.d]);
    }
}

unsafe fn read_path(p: *const c_char, name: &'static str) -> Result<PathBuf, FfiError> {
    if p.is_null() {
        return Err(FfiError::Null(name));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|e| FfiError::Invalid(format!("{name} is not UTF-8: {e}")))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, FfiError> {
    p.as_mut().ok_or(FfiError::Null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, FfiError> {
    p.as_ref().ok_or(FfiError::Null(name))
}

fn field(sys: &WaveletSystem, kind: FrameletFieldKind) -> &SampledField {
    match kind {
        FrameletFieldKind::Phi => &sys.phi,
        FrameletFieldKind::PsiC => &sys.psi_c,
        FrameletFieldKind::Psi => &sys.psi,
    }
}

fn new_filter(h: FilterCoeffs, canonical: CanonicalForm) -> *mut FrameletFilter {
    let ev = FilterEvaluator::for_form(h.clone(), &canonical);
    Box::into_raw(Box::new(FrameletFilter { h, canonical, ev }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn framelet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated and
/// NUL-terminated when `len` is too small) and returns its full length in
/// bytes, without the terminator. Returns 0 when no error was recorded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn framelet_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Finds `S` with `S·A0·S⁻¹` canonical. `s_out` and `canonical_out` take
/// four entries each; any output pointer may be null.
///
/// # Safety
/// `a0` must point to four readable values, outputs to writable storage.
#[no_mangle]
pub unsafe extern "C" fn framelet_reduce(
    a0: *const i64,
    s_out: *mut i64,
    canonical_out: *mut i64,
    index_out: *mut u8,
) -> FrameletStatus {
    guard(|| {
        let red = reduce_to_canonical(&read_matrix(a0, "a0")?)?;
        write_matrix(s_out, &red.s);
        write_matrix(canonical_out, &red.canonical.matrix());
        if let Some(i) = index_out.as_mut() {
            *i = red.canonical.index();
        }
        Ok(())
    })
}

/// The Haar pair `h_0 = h_ℓ = 1/√2` for canonical form `index` (1 to 6).
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn framelet_filter_haar(
    index: u8,
    n0: i64,
    out: *mut *mut FrameletFilter,
) -> FrameletStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let c = CanonicalForm::from_index(index)
            .ok_or_else(|| FfiError::Invalid(format!("canonical index {index} is not in 1..=6")))?;
        *out = new_filter(FilterCoeffs::haar(&c, n0)?, c);
        Ok(())
    })
}

/// Solves the filter equations for the canonical form of `matrix`.
///
/// # Safety
/// `matrix` must point to four values and `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn framelet_filter_solve(
    matrix: *const i64,
    n0: i64,
    seed: u64,
    random_starts: u32,
    out: *mut *mut FrameletFilter,
) -> FrameletStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let c = reduce_to_canonical(&read_matrix(matrix, "matrix")?)?.canonical;
        let opts = SolverOptions {
            seed,
            random_starts: random_starts as usize,
            ..Default::default()
        };
        *out = new_filter(lawton::solve(&c, n0, &opts)?, c);
        Ok(())
    })
}

/// Reads a filter JSON file; its matrix must be one of the canonical forms.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a handle slot.
#[no_mangle]
pub unsafe extern "C" fn framelet_filter_load(
    path: *const c_char,
    out: *mut *mut FrameletFilter,
) -> FrameletStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let doc: FilterDocument = persist::read_json(&read_path(path, "path")?)?;
        let c = CanonicalForm::from_matrix(&doc.matrix).ok_or_else(|| {
            framelet::Error::MismatchedFilter(format!(
                "filter matrix {} is not a canonical form",
                doc.matrix
            ))
        })?;
        *out = new_filter(doc.to_filter()?, c);
        Ok(())
    })
}

/// # Safety
/// `filter` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn framelet_filter_save(
    filter: *const FrameletFilter,
    path: *const c_char,
) -> FrameletStatus {
    guard(|| {
        let f = handle(filter, "filter")?;
        persist::write_json(
            &read_path(path, "path")?,
            &f.h.to_document(f.canonical.matrix()),
        )?;
        Ok(())
    })
}

/// Largest absolute residual of the filter equations.
///
/// # Safety
/// `filter` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn framelet_filter_residual(
    filter: *const FrameletFilter,
    out: *mut f64,
) -> FrameletStatus {
    guard(|| {
        let f = handle(filter, "filter")?;
        *out_ptr(out, "out")? = lawton::residuals(&f.h, &f.canonical).max_abs;
        Ok(())
    })
}

/// `m₀(t1, t2)`.
///
/// # Safety
/// `filter` must be a live handle; `re` and `im` writable.
#[no_mangle]
pub unsafe extern "C" fn framelet_filter_eval(
    filter: *const FrameletFilter,
    t1: f64,
    t2: f64,
    re: *mut f64,
    im: *mut f64,
) -> FrameletStatus {
    guard(|| {
        let f = handle(filter, "filter")?;
        let v = f.ev.eval([t1, t2]);
        *out_ptr(re, "re")? = v.re;
        *out_ptr(im, "im")? = v.im;
        Ok(())
    })
}

/// # Safety
/// `filter` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn framelet_filter_free(filter: *mut FrameletFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

#[no_mangle]
pub extern "C" fn framelet_build_params_default() -> FrameletBuildParams {
    let s = SolverOptions::default();
    let p = SynthesisParams::default();
    FrameletBuildParams {
        n0: 1,
        seed: s.seed,
        random_starts: s.random_starts as u32,
        depth: p.j,
        grid_n: p.grid_n as u32,
        extent_pi: p.grid_extent / std::f64::consts::PI,
    }
}

/// Runs the pipeline for `a0`. With a non-null `filter` the solver is
/// skipped; a null `params` means defaults.
///
/// # Safety
/// `a0` must point to four values; `filter` and `params` must be null or
/// valid; `out` must be a handle slot.
#[no_mangle]
pub unsafe extern "C" fn framelet_system_build(
    a0: *const i64,
    filter: *const FrameletFilter,
    params: *const FrameletBuildParams,
    out: *mut *mut FrameletSystem,
) -> FrameletStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let a0 = read_matrix(a0, "a0")?;
        let p = params
            .as_ref()
            .copied()
            .unwrap_or_else(|| framelet_build_params_default());
        let opts = BuildOptions {
            solver: SolverOptions {
                seed: p.seed,
                random_starts: p.random_starts as usize,
                ..Default::default()
            },
            synthesis: SynthesisParams {
                j: p.depth,
                grid_extent: p.extent_pi * std::f64::consts::PI,
                grid_n: p.grid_n as usize,
                ..Default::default()
            },
            filter: filter.as_ref().map(|f| f.h.clone()),
            crop_margin: None,
        };
        let n0 = filter.as_ref().map_or(p.n0, |f| f.h.n0());
        *out = Box::into_raw(Box::new(FrameletSystem {
            inner: build_system(&a0, n0, &opts)?,
        }));
        Ok(())
    })
}

/// Reads a system directory written by [`framelet_system_save`] or the CLI.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a handle slot.
#[no_mangle]
pub unsafe extern "C" fn framelet_system_load(
    dir: *const c_char,
    out: *mut *mut FrameletSystem,
) -> FrameletStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(FrameletSystem {
            inner: persist::load_system(&read_path(dir, "dir")?)?,
        }));
        Ok(())
    })
}

/// # Safety
/// `system` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn framelet_system_save(
    system: *const FrameletSystem,
    dir: *const c_char,
) -> FrameletStatus {
    guard(|| {
        let s = handle(system, "system")?;
        persist::save_system(&read_path(dir, "dir")?, &s.inner, None)?;
        Ok(())
    })
}

/// The conjugating matrix `S` and the canonical matrix, four entries each.
///
/// # Safety
/// `system` must be a live handle; outputs null or writable.
#[no_mangle]
pub unsafe extern "C" fn framelet_system_matrices(
    system: *const FrameletSystem,
    s_out: *mut i64,
    canonical_out: *mut i64,
) -> FrameletStatus {
    guard(|| {
        let s = &handle(system, "system")?.inner;
        write_matrix(s_out, &s.s);
        write_matrix(canonical_out, &s.canonical.matrix());
        Ok(())
    })
}

/// Grid of a stored field: `nx × ny` samples from `origin` with spacing `step`.
///
/// # Safety
/// `system` must be a live handle; `origin` takes two values; all outputs writable.
#[no_mangle]
pub unsafe extern "C" fn framelet_system_field_info(
    system: *const FrameletSystem,
    kind: FrameletFieldKind,
    nx: *mut usize,
    ny: *mut usize,
    origin: *mut f64,
    step: *mut f64,
) -> FrameletStatus {
    guard(|| {
        let f = field(&handle(system, "system")?.inner, kind);
        *out_ptr(nx, "nx")? = f.nx;
        *out_ptr(ny, "ny")? = f.ny;
        if origin.is_null() {
            return Err(FfiError::Null("origin"));
        }
        std::slice::from_raw_parts_mut(origin, 2).copy_from_slice(&f.origin);
        *out_ptr(step, "step")? = f.step;
        Ok(())
    })
}

/// Copies samples in row-major order (`x` fastest). `len` must equal
/// `nx·ny`; `im` may be null.
///
/// # Safety
/// `re` (and `im` when non-null) must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn framelet_system_field_values(
    system: *const FrameletSystem,
    kind: FrameletFieldKind,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> FrameletStatus {
    guard(|| {
        let f = field(&handle(system, "system")?.inner, kind);
        if len != f.values.len() {
            return Err(FfiError::Invalid(format!(
                "buffer holds {len} samples, field has {}",
                f.values.len()
            )));
        }
        if re.is_null() {
            return Err(FfiError::Null("re"));
        }
        let re = std::slice::from_raw_parts_mut(re, len);
        for (dst, v) in re.iter_mut().zip(&f.values) {
            *dst = v.re;
        }
        if !im.is_null() {
            let im = std::slice::from_raw_parts_mut(im, len);
            for (dst, v) in im.iter_mut().zip(&f.values) {
                *dst = v.im;
            }
        }
        Ok(())
    })
}

/// Bilinear value of a stored field at `(x, y)`; zero outside its box.
///
/// # Safety
/// `system` must be a live handle; `re` and `im` writable.
#[no_mangle]
pub unsafe extern "C" fn framelet_system_eval(
    system: *const FrameletSystem,
    kind: FrameletFieldKind,
    x: f64,
    y: f64,
    re: *mut f64,
    im: *mut f64,
) -> FrameletStatus {
    guard(|| {
        let v = field(&handle(system, "system")?.inner, kind).interp([x, y]);
        *out_ptr(re, "re")? = v.re;
        *out_ptr(im, "im")? = v.im;
        Ok(())
    })
}

/// Runs the numerical checks and returns the report as JSON. The string
/// must be released with [`framelet_string_free`]. `all_pass` may be null.
///
/// # Safety
/// `system` must be a live handle; `json_out` a string slot.
#[no_mangle]
pub unsafe extern "C" fn framelet_system_verify(
    system: *const FrameletSystem,
    level_lo: i32,
    level_hi: i32,
    grid: u32,
    json_out: *mut *mut c_char,
    all_pass: *mut bool,
) -> FrameletStatus {
    guard(|| {
        let s = &handle(system, "system")?.inner;
        let json_out = out_ptr(json_out, "json_out")?;
        if level_lo > level_hi || grid < 2 {
            return Err(FfiError::Invalid(format!(
                "levels {level_lo}:{level_hi}, grid {grid}"
            )));
        }
        let opts = VerifyOptions {
            levels: (level_lo, level_hi),
            grid: grid as usize,
            ..Default::default()
        };
        let report = verify_system(s, &opts)?;
        if let Some(p) = all_pass.as_mut() {
            *p = report.all_pass();
        }
        let text = serde_json::to_string(&report).map_err(framelet::Error::from)?;
        *json_out = CString::new(text)
            .map_err(|e| FfiError::Invalid(e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn framelet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `system` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn framelet_system_free(system: *mut FrameletSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

//! C ABI for `conical-lab`.
//!
//! Every fallible function returns a [`ClStatus`]. On failure the message is
//! kept per thread and can be read with [`cl_last_error_message`] until the
//! next failing call on the same thread. Handles are opaque and must be
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use conical_lab::elliptic::CoefficientSource;
use conical_lab::lab::{conical_ratio, Family, GridSpec, Setup};
use conical_lab::lattice::{SpaceTimeField, TimeGrid, Torus, ValueKind};
use conical_lab::tent::{tent_norm, TentParams};
use conical_lab::LabError;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClStatus {
    Ok = 0,
    InvalidParameter = 1,
    GridMismatch = 2,
    NotElliptic = 3,
    Degenerate = 4,
    NotAdapted = 5,
    NonContraction = 6,
    MaxIterations = 7,
    Config = 8,
    Io = 9,
    NullPointer = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClCoefficients {
    Identity = 0,
    /// Piecewise-constant random field; uses `seed`, `lambda_min`, `lambda_max`.
    Checkerboard = 1,
}

/// Integrand family for [`cl_conical_ratio`]. `param` is the eigen index,
/// the singular level, or the atom radius; `seed` is used by atoms only.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClFamily {
    Zero = 0,
    Eigenmode = 1,
    Adapted = 2,
    Singular = 3,
    Atom = 4,
}

/// Monte-Carlo ratio with its delta-method standard error.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClRatio {
    pub ratio: f64,
    pub stderr: f64,
    pub lhs_moment: f64,
    pub rhs_moment: f64,
}

/// Opaque bundle of operator, time grid and noise stepping.
pub struct ClSetup {
    inner: Setup,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &LabError) -> ClStatus {
    match err {
        LabError::InvalidParameter { .. } => ClStatus::InvalidParameter,
        LabError::GridMismatch(_) => ClStatus::GridMismatch,
        LabError::NotElliptic(_) => ClStatus::NotElliptic,
        LabError::Degenerate(_) => ClStatus::Degenerate,
        LabError::NotAdapted { .. } => ClStatus::NotAdapted,
        LabError::NonContraction { .. } => ClStatus::NonContraction,
        LabError::MaxIterations { .. } => ClStatus::MaxIterations,
        LabError::Config(_) => ClStatus::Config,
        LabError::Io(_) | LabError::Csv(_) | LabError::Json(_) => ClStatus::Io,
    }
}

enum Failure {
    Lab(LabError),
    Null(&'static str),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Lab(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ClStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ClStatus::Ok,
        Ok(Err(Failure::Lab(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed for `{what}`"));
            ClStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            ClStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn setup_ref<'a>(s: *const ClSetup) -> Result<&'a Setup, Failure> {
    s.as_ref().map(|s| &s.inner).ok_or(Failure::Null("setup"))
}

fn length_mismatch(what: &str, got: usize, want: usize) -> Failure {
    Failure::Lab(LabError::GridMismatch(format!("{what} has length {got}, expected {want}")))
}

/// Message of the last failure on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cl_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Builds a setup on an `n`-dimensional torus with `points` sites per axis.
/// Time grid and Itô step use the library defaults (`t_min = h²`,
/// `t_max = L²/4`, `dt = t_min/2`).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cl_setup_new(
    n: usize,
    points: usize,
    side: f64,
    nodes: usize,
    d_h: usize,
    coefficients: ClCoefficients,
    seed: u64,
    lambda_min: f64,
    lambda_max: f64,
    out: *mut *mut ClSetup,
) -> ClStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let mut spec = GridSpec::new(n, points).with_nodes(nodes);
        spec.side = side;
        let source = match coefficients {
            ClCoefficients::Identity => CoefficientSource::Identity,
            ClCoefficients::Checkerboard => CoefficientSource::Checkerboard {
                seed,
                lambda_min,
                lambda_max,
                blocks: 8,
            },
        };
        let inner = Setup::build(&spec, &source, d_h)?;
        *out = Box::into_raw(Box::new(ClSetup { inner }));
        Ok(())
    })
}

/// Releases a setup. Null is ignored.
///
/// # Safety
/// `setup` must come from [`cl_setup_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cl_setup_free(setup: *mut ClSetup) {
    if !setup.is_null() {
        drop(Box::from_raw(setup));
    }
}

/// Number of lattice sites, or 0 for a null handle.
///
/// # Safety
/// `setup` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cl_setup_num_sites(setup: *const ClSetup) -> usize {
    setup.as_ref().map_or(0, |s| s.inner.torus().num_sites())
}

/// Copies the ascending eigenvalues of the operator into `out[0..len]`.
///
/// # Safety
/// `setup` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cl_setup_eigenvalues(setup: *const ClSetup, out: *mut f64, len: usize) -> ClStatus {
    guard(|| {
        let s = setup_ref(setup)?;
        let lam = s.op.eigenvalues();
        if len != lam.len() {
            return Err(length_mismatch("out", len, lam.len()));
        }
        slice_mut(out, len, "out")?.copy_from_slice(lam);
        Ok(())
    })
}

/// `output = S(t) input` on the lattice.
///
/// # Safety
/// `setup` must be a live handle; `input` and `output` valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn cl_setup_semigroup_apply(
    setup: *const ClSetup,
    t: f64,
    input: *const f64,
    output: *mut f64,
    len: usize,
) -> ClStatus {
    guard(|| {
        let s = setup_ref(setup)?;
        let f = slice(input, len, "input")?;
        let v = s.op.semigroup_apply(t, f)?;
        slice_mut(output, len, "output")?.copy_from_slice(&v);
        Ok(())
    })
}

fn family_of(family: ClFamily, param: f64, seed: u64) -> Result<Family, LabError> {
    let index = || {
        if param >= 0.0 && param.fract() == 0.0 {
            Ok(param as usize)
        } else {
            Err(LabError::InvalidParameter {
                name: "param",
                reason: format!("expected a non-negative integer, got {param}"),
            })
        }
    };
    Ok(match family {
        ClFamily::Zero => Family::Zero,
        ClFamily::Eigenmode => Family::Eigenmode { index: index()? },
        ClFamily::Adapted => Family::Adapted,
        ClFamily::Singular => Family::Singular { level: index()? },
        ClFamily::Atom => Family::Atom { radius: param, seed },
    })
}

/// Monte-Carlo estimate of `(E‖G S⋄g‖^p)^{1/p} / (E‖g‖^p)^{1/p}`.
///
/// # Safety
/// `setup` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_conical_ratio(
    setup: *const ClSetup,
    p: f64,
    beta: f64,
    alpha: f64,
    family: ClFamily,
    param: f64,
    family_seed: u64,
    trials: usize,
    seed: u64,
    out: *mut ClRatio,
) -> ClStatus {
    guard(|| {
        let s = setup_ref(setup)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let fam = family_of(family, param, family_seed)?;
        let r = conical_ratio(s, TentParams::new(p, beta, alpha)?, &fam, trials, seed)?;
        *out = ClRatio {
            ratio: r.ratio,
            stderr: r.stderr,
            lhs_moment: r.lhs_moment,
            rhs_moment: r.rhs_moment,
        };
        Ok(())
    })
}

/// Tent norm of a field given as `values[node][site][component]` on the
/// geometric grid with `nodes` points in `[t_min, t_max]`.
///
/// # Safety
/// `values` must be valid for `len` reads and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cl_tent_norm(
    n: usize,
    points: usize,
    side: f64,
    t_min: f64,
    t_max: f64,
    nodes: usize,
    components: usize,
    values: *const f64,
    len: usize,
    p: f64,
    beta: f64,
    alpha: f64,
    out: *mut f64,
) -> ClStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let torus = Torus::new(n, points, side)?;
        let grid = TimeGrid::new(t_min, t_max, nodes, beta)?;
        let kind = match components {
            0 => {
                return Err(Failure::Lab(LabError::InvalidParameter {
                    name: "components",
                    reason: "must be at least 1".into(),
                }))
            }
            1 => ValueKind::Scalar,
            c => ValueKind::Hilbert(c),
        };
        let data = slice(values, len, "values")?.to_vec();
        let field = SpaceTimeField::from_data(torus, grid, kind, data)?;
        *out = tent_norm(&field, &TentParams::new(p, beta, alpha)?)?;
        Ok(())
    })
}

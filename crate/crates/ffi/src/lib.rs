//! C ABI for the smoothing-lab numerical laboratory.
//!
//! Conventions: opaque handles created by `*_new`/`*_parse` and released by
//! the matching `*_free`; every fallible call returns an [`SlStatus`] and
//! writes results through out-pointers; the last error message per thread is
//! available from [`sl_last_error_message`] until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use smoothing_lab::estimator::{
    extension_norm, ks_factor, order_condition_s, validate_params, KsSetting, ParamSet,
};
use smoothing_lab::grid::GridSpec;
use smoothing_lab::sphere::{sphere_rule, surface_measure_ft_radial, DyadicCutoff};
use smoothing_lab::weights::{
    ks_cube_family, ks_norm, mc_norm, parse_weight_id, McFamily, WeightSpec,
};

/// Status codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    InvalidUtf8 = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Message of the most recent failure on this thread.  The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn sl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Opaque periodic-box grid handle.
pub struct SlGrid(GridSpec);

/// Opaque weight handle.
pub struct SlWeight(WeightSpec);

/// Creates a grid; `dim` in 1..=3, `points_per_axis` a power of two >= 8.
///
/// # Safety
/// `out` must be a valid pointer to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_grid_new(
    dim: usize,
    points_per_axis: usize,
    half_width: f64,
    out: *mut *mut SlGrid,
) -> SlStatus {
    if out.is_null() {
        set_error("out pointer is null");
        return SlStatus::NullPointer;
    }
    match GridSpec::new(dim, points_per_axis, half_width) {
        Ok(grid) => {
            *out = Box::into_raw(Box::new(SlGrid(grid)));
            SlStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SlStatus::InvalidArgument
        }
    }
}

/// # Safety
/// `grid` must be a pointer returned by [`sl_grid_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_grid_free(grid: *mut SlGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Grid spacing `2L/N`; returns NaN for a null handle.
///
/// # Safety
/// `grid` must be a live handle from [`sl_grid_new`] or null.
#[no_mangle]
pub unsafe extern "C" fn sl_grid_spacing(grid: *const SlGrid) -> f64 {
    match grid.as_ref() {
        Some(g) => g.0.spacing(),
        None => f64::NAN,
    }
}

/// Parses a catalog weight id such as `power:a=1.0` or `bump:c=0,w=1,A=2`.
///
/// # Safety
/// `id` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_weight_parse(
    id: *const c_char,
    dim: usize,
    out: *mut *mut SlWeight,
) -> SlStatus {
    if id.is_null() || out.is_null() {
        set_error("null pointer argument");
        return SlStatus::NullPointer;
    }
    let Ok(id) = CStr::from_ptr(id).to_str() else {
        set_error("weight id is not valid UTF-8");
        return SlStatus::InvalidUtf8;
    };
    match parse_weight_id(id, dim) {
        Ok(w) => {
            *out = Box::into_raw(Box::new(SlWeight(w)));
            SlStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SlStatus::InvalidArgument
        }
    }
}

/// # Safety
/// `weight` must be a pointer returned by [`sl_weight_parse`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_weight_free(weight: *mut SlWeight) {
    if !weight.is_null() {
        drop(Box::from_raw(weight));
    }
}

/// Pointwise weight value at `x[0..dim]` with the half-cell cap applied to
/// singular kinds.
///
/// # Safety
/// `x` must point to `dim` readable doubles; `weight` and `out` must be live.
#[no_mangle]
pub unsafe extern "C" fn sl_weight_eval(
    weight: *const SlWeight,
    x: *const f64,
    dim: usize,
    half_cell: f64,
    out: *mut f64,
) -> SlStatus {
    let (Some(w), false, false) = (weight.as_ref(), x.is_null(), out.is_null()) else {
        set_error("null pointer argument");
        return SlStatus::NullPointer;
    };
    let point = std::slice::from_raw_parts(x, dim);
    match w.0.eval_capped(point, half_cell) {
        Ok(v) => {
            *out = v;
            SlStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SlStatus::InvalidArgument
        }
    }
}

/// Kerman–Sawyer norm of the weight over the dyadic family of the symmetric
/// box `[-half_width, half_width)^dim`, cubes down to side `min_side`.
///
/// # Safety
/// `weight` and `out` must be live pointers.
#[no_mangle]
pub unsafe extern "C" fn sl_ks_norm(
    weight: *const SlWeight,
    dim: usize,
    half_width: f64,
    alpha: f64,
    min_side: f64,
    cells_per_axis: usize,
    out: *mut f64,
) -> SlStatus {
    let (Some(w), false) = (weight.as_ref(), out.is_null()) else {
        set_error("null pointer argument");
        return SlStatus::NullPointer;
    };
    let cubes = match ks_cube_family(dim, half_width, min_side) {
        Ok(c) => c,
        Err(e) => {
            set_error(&e.to_string());
            return SlStatus::InvalidArgument;
        }
    };
    match ks_norm(&w.0, alpha, &cubes, cells_per_axis) {
        Ok(r) => {
            *out = r.value;
            SlStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SlStatus::NumericalFailure
        }
    }
}

/// Morrey–Campanato norm over a lattice family of `centers_per_axis^dim`
/// centers spanning `[-extent, extent]^dim` and the given radii.
///
/// # Safety
/// `weight`, `radii` (length `radii_len`) and `out` must be live pointers.
#[no_mangle]
pub unsafe extern "C" fn sl_mc_norm(
    weight: *const SlWeight,
    dim: usize,
    alpha: f64,
    p: f64,
    centers_per_axis: usize,
    extent: f64,
    radii: *const f64,
    radii_len: usize,
    cells_per_diameter: usize,
    out: *mut f64,
) -> SlStatus {
    let (Some(w), false, false) = (weight.as_ref(), radii.is_null(), out.is_null()) else {
        set_error("null pointer argument");
        return SlStatus::NullPointer;
    };
    let radii = std::slice::from_raw_parts(radii, radii_len);
    let mut family = McFamily::lattice(dim, centers_per_axis, extent, radii);
    family.cells_per_diameter = cells_per_diameter;
    match mc_norm(&w.0, alpha, p, &family) {
        Ok(r) => {
            *out = r.value;
            SlStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SlStatus::InvalidArgument
        }
    }
}

/// `\widehat{dσ}(x)` for `|x| = r` on `S^{n-1}`, `n` in {2, 3}.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_surface_measure_ft(n: usize, r: f64, out: *mut f64) -> SlStatus {
    if out.is_null() {
        set_error("out pointer is null");
        return SlStatus::NullPointer;
    }
    if !(n == 2 || n == 3) {
        set_error("surface measure transform needs n = 2 or 3");
        return SlStatus::InvalidArgument;
    }
    *out = surface_measure_ft_radial(n, r);
    SlStatus::Ok
}

/// Smooth dyadic cutoff `ψ_j(t)` of the kernel decomposition.
#[no_mangle]
pub extern "C" fn sl_dyadic_cutoff(j: u32, t: f64) -> f64 {
    DyadicCutoff::psi(j, t)
}

/// The smoothing exponent `s = 1 - (α/β + 2 - γ)/2` of the order condition.
#[no_mangle]
pub extern "C" fn sl_smoothing_exponent(alpha: f64, beta: f64, gamma: f64) -> f64 {
    order_condition_s(alpha, beta, gamma)
}

/// Validates `(n, γ, α, β)`; on success writes the derived `s`.  Rejections
/// return `InvalidArgument` with every violated inequality named in
/// [`sl_last_error_message`].
///
/// # Safety
/// `s_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_validate_params(
    n: usize,
    gamma: f64,
    alpha: f64,
    beta: f64,
    s_out: *mut f64,
) -> SlStatus {
    if s_out.is_null() {
        set_error("out pointer is null");
        return SlStatus::NullPointer;
    }
    match validate_params(n, gamma, alpha, beta) {
        Ok(p) => {
            *s_out = p.s;
            SlStatus::Ok
        }
        Err(rej) => {
            set_error(&rej.to_string());
            SlStatus::InvalidArgument
        }
    }
}

/// Weighted extension operator norm on the grid, normalized by the
/// Kerman–Sawyer factor: writes the raw `sigma` and the normalized constant.
///
/// # Safety
/// All pointer arguments must be live; `grid` and `weight` stay owned by the
/// caller.
#[no_mangle]
pub unsafe extern "C" fn sl_extension_norm(
    weight: *const SlWeight,
    grid: *const SlGrid,
    n: usize,
    gamma: f64,
    alpha: f64,
    beta: f64,
    rule_degree: usize,
    seed: u64,
    sigma_out: *mut f64,
    normalized_out: *mut f64,
) -> SlStatus {
    let (Some(w), Some(g)) = (weight.as_ref(), grid.as_ref()) else {
        set_error("null handle argument");
        return SlStatus::NullPointer;
    };
    if sigma_out.is_null() || normalized_out.is_null() {
        set_error("out pointer is null");
        return SlStatus::NullPointer;
    }
    let params = ParamSet::forced(n, gamma, alpha, beta);
    let rule = match sphere_rule(g.0.dim(), rule_degree) {
        Ok(r) => r,
        Err(e) => {
            set_error(&e.to_string());
            return SlStatus::InvalidArgument;
        }
    };
    match extension_norm(&w.0, &params, &g.0, &rule, &KsSetting::default(), seed) {
        Ok(r) => {
            *sigma_out = r.sigma;
            *normalized_out = r.normalized;
            SlStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SlStatus::NumericalFailure
        }
    }
}

/// `‖w^β‖_{KS_α}^{1/(2β)}` on the grid's dyadic family.
///
/// # Safety
/// `weight`, `grid` and `out` must be live pointers.
#[no_mangle]
pub unsafe extern "C" fn sl_ks_factor(
    weight: *const SlWeight,
    grid: *const SlGrid,
    n: usize,
    gamma: f64,
    alpha: f64,
    beta: f64,
    out: *mut f64,
) -> SlStatus {
    let (Some(w), Some(g), false) = (weight.as_ref(), grid.as_ref(), out.is_null()) else {
        set_error("null pointer argument");
        return SlStatus::NullPointer;
    };
    let params = ParamSet::forced(n, gamma, alpha, beta);
    match ks_factor(&w.0, &params, &g.0, &KsSetting::default()) {
        Ok(r) => {
            *out = r.value;
            SlStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SlStatus::NumericalFailure
        }
    }
}

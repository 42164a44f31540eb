//! Thin wrappers over `libm` so the crate builds without `std`.

pub(crate) const TAU: f64 = core::f64::consts::TAU;

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

/// `|x|^p` with the `p = 2` case kept exact.
#[inline]
pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else {
        powf(x.abs(), p)
    }
}

/// Wraps `x` into `[0, 1)`.
#[inline]
pub(crate) fn wrap_unit(x: f64) -> f64 {
    let w = x - floor(x);
    // x - floor(x) can round up to exactly 1.0 for tiny negative x
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// `Some(n)` when `x` is within `tol` of the positive integer `n`.
pub(crate) fn as_integer(x: f64, tol: f64) -> Option<usize> {
    let r = round(x);
    if r >= 1.0 && (x - r).abs() <= tol * r.max(1.0) {
        Some(r as usize)
    } else {
        None
    }
}

//! Pattern functions `f_nm(x; s)`.
//!
//! For `n = m + d >= m`
//!
//! ```text
//! f_nm(x; s) = (2/pi) int_0^inf u e^{-s u^2/2} l_m^(d)(u^2) w_d(sqrt(2) u x) du
//! ```
//!
//! with the normalized Laguerre functions `l_m^(d)` and `w_d` equal to
//! `(-1)^{d/2} cos` for even `d` and `(-1)^{(d-1)/2} sin` for odd `d`.
//! The integral is the y-integral of the displacement-operator matrix element
//! after the substitution `u = y |F|`.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::quadrature::integrate;
use crate::special::{dawson, laguerre_functions_into, ln_factorials};

/// Absolute accuracy demanded from the adaptive oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-8;
/// Rounding-error budget under which the `s = 0` fast path is trusted.
pub const FAST_PATH_BUDGET: f64 = 1e-11;

/// Validates `s` (must satisfy `-1 < s <= 0`, i.e. `eta > 1/2`).
pub fn check_s<T: Real>(s: T) -> Result<()> {
    if s.is_nan() {
        return Err(Error::InvalidArgument("s parameter is NaN".into()));
    }
    if s > T::zero() {
        return Err(Error::SParameterPositive(s.as_f64()));
    }
    if s <= -T::one() {
        return Err(Error::EfficiencyTooLow {
            eta: 1.0 / (1.0 - s.as_f64()),
        });
    }
    Ok(())
}

/// `s = 1 - 1/eta`, validated.
pub fn s_from_eta<T: Real>(eta: T) -> Result<T> {
    if !(eta > T::lit(0.5) && eta <= T::one()) {
        return Err(Error::EfficiencyTooLow { eta: eta.as_f64() });
    }
    Ok(T::one() - eta.recip())
}

/// Upper `u` limit beyond which every integrand up to order `n_max` is negligible.
pub(crate) fn u_limit<T: Real>(n_max: usize, s: T) -> T {
    (T::lit(4.0) * T::of(n_max + 1)).sqrt() + T::lit(12.0) / (T::one() + s).sqrt()
}

/// Sign of `w_d`.
#[inline]
pub(crate) fn trig_sign<T: Real>(d: usize) -> T {
    if (d / 2).is_multiple_of(2) {
        T::one()
    } else {
        -T::one()
    }
}

/// Adaptive Gauss-Kronrod evaluation of `f_nm(x; s)`; the reference oracle.
pub fn pattern_function_quadrature<T: Real>(n: usize, m: usize, x: T, s: T) -> Result<T> {
    check_s(s)?;
    let (hi, lo) = (n.max(m), n.min(m));
    let d = hi - lo;
    let lf = ln_factorials::<T>(hi);
    let sx = T::SQRT_2() * x;
    let integrand = |u: T| -> T {
        let mut ell = vec![T::zero(); lo + 1];
        laguerre_functions_into(d, u * u, &lf, &mut ell);
        let arg = sx * u;
        let w = if d % 2 == 0 { arg.cos() } else { arg.sin() };
        u * (-s * u * u / T::lit(2.0)).exp() * ell[lo] * w
    };
    let upper = u_limit(hi, s);
    // split at unit steps so that each piece holds only a few oscillations
    let pieces = (upper.as_f64() * (1.0 + x.abs().as_f64())).ceil().max(1.0) as usize;
    let width = upper / T::of(pieces);
    let mut total = T::zero();
    for p in 0..pieces {
        let a = width * T::of(p);
        let r = integrate(integrand, a, a + width, T::lit(1e-13), T::lit(1e-13), 400)?;
        total += r.value;
    }
    Ok(T::lit(2.0) / T::PI() * trig_sign::<T>(d) * total)
}

/// Regular and irregular oscillator functions with derivatives:
/// `h_k = psi_k e^{x^2/2}` and `g_k = phi_k e^{-x^2/2}`, both obeying the
/// Hermite-function recurrence.
struct FastRows<T> {
    h: Vec<T>,
    hp: Vec<T>,
    g: Vec<T>,
    gp: Vec<T>,
}

fn fast_rows<T: Real>(n_max: usize, x: T) -> FastRows<T> {
    let len = n_max + 2;
    let mut h = vec![T::zero(); len];
    let mut hp = vec![T::zero(); len];
    let mut g = vec![T::zero(); len];
    let mut gp = vec![T::zero(); len];
    let sqrt2 = T::SQRT_2();
    let pi_m14 = T::PI().powf(T::lit(-0.25));
    let pi_m34 = T::PI().powf(T::lit(-0.75));
    let dx = dawson(x);
    h[0] = pi_m14;
    h[1] = sqrt2 * x * h[0];
    hp[1] = sqrt2 * h[0];
    g[0] = T::lit(2.0) * pi_m34 * dx;
    gp[0] = T::lit(2.0) * pi_m34 * (T::one() - T::lit(2.0) * x * dx);
    g[1] = sqrt2 * (x * g[0] - pi_m34);
    gp[1] = sqrt2 * (g[0] + x * gp[0]);
    for k in 2..len {
        let (a, b) = (T::of(k - 1).sqrt(), T::of(k).sqrt());
        h[k] = (sqrt2 * x * h[k - 1] - a * h[k - 2]) / b;
        hp[k] = (sqrt2 * (h[k - 1] + x * hp[k - 1]) - a * hp[k - 2]) / b;
        g[k] = (sqrt2 * x * g[k - 1] - a * g[k - 2]) / b;
        gp[k] = (sqrt2 * (g[k - 1] + x * gp[k - 1]) - a * gp[k - 2]) / b;
    }
    FastRows { h, hp, g, gp }
}

/// `s = 0` pattern function from products of regular and irregular
/// oscillator functions, `f_nm = d/dx (h_n g_m)` for `n <= m`. Loses accuracy
/// for large `|x|`; see [`fast_path_error`].
pub fn pattern_function_fast<T: Real>(n: usize, m: usize, x: T) -> T {
    let (lo, hi) = (n.min(m), n.max(m));
    let r = fast_rows(hi, x);
    r.hp[lo] * r.g[hi] + r.h[lo] * r.gp[hi]
}

/// All `s = 0` pattern functions up to `n_max` at one point, row-major `(n_max+1)^2`.
pub fn pattern_matrix_fast<T: Real>(n_max: usize, x: T) -> Vec<T> {
    let r = fast_rows(n_max, x);
    let dim = n_max + 1;
    let mut out = vec![T::zero(); dim * dim];
    for n in 0..dim {
        for m in n..dim {
            let v = r.hp[n] * r.g[m] + r.h[n] * r.gp[m];
            out[n * dim + m] = v;
            out[m * dim + n] = v;
        }
    }
    out
}

/// Rounding-error estimate of [`pattern_function_fast`]: cancellation in the
/// irregular recurrence scales with `|h_n h_m| D(x)`.
pub fn fast_path_error<T: Real>(n: usize, m: usize, x: T) -> T {
    let (lo, hi) = (n.min(m), n.max(m));
    let r = fast_rows(hi, x);
    T::epsilon()
        * T::FRAC_2_SQRT_PI()
        * dawson(x).abs()
        * (r.h[lo] * r.h[hi]).abs().max(T::one())
        * (T::one() + T::lit(2.0) * x.abs())
        * T::of(hi + 1)
}

/// `f_nm(x; s)`: the fast path for `s = 0` where it is provably accurate,
/// otherwise the adaptive oracle.
pub fn pattern_function<T: Real>(n: usize, m: usize, x: T, s: T) -> Result<T> {
    check_s(s)?;
    if s == T::zero() && fast_path_error(n, m, x) < T::lit(FAST_PATH_BUDGET) {
        return Ok(pattern_function_fast(n, m, x));
    }
    pattern_function_quadrature(n, m, x, s)
}

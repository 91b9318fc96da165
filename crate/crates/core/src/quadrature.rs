//! Adaptive Gauss-Kronrod (21-point) integration.

use crate::error::{Error, Result};
use crate::num::Real;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_err: T,
    /// Integral of |f|, used for relative tolerances.
    pub abs_integral: T,
    pub intervals: usize,
}

fn gk21<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T, T) {
    let center = (a + b) / T::lit(2.0);
    let half = (b - a) / T::lit(2.0);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[10]);
    let mut gauss = T::zero();
    let mut absint = fc.abs() * T::lit(WGK[10]);
    for j in 0..10 {
        let dx = half * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += T::lit(WGK[j]) * (f1 + f2);
        absint += T::lit(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let err = ((kronrod - gauss) * half).abs();
    (kronrod * half, err, absint * half.abs())
}

/// Integrates `f` over `[a, b]` by bisecting the worst interval until the
/// summed error estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
    max_intervals: usize,
) -> Result<QuadResult<T>> {
    let mut intervals = vec![{
        let (v, e, ai) = gk21(&f, a, b);
        (a, b, v, e, ai)
    }];
    loop {
        let value: T = intervals.iter().map(|iv| iv.2).sum();
        let err: T = intervals.iter().map(|iv| iv.3).sum();
        let abs_integral: T = intervals.iter().map(|iv| iv.4).sum();
        let target = abs_tol.max(rel_tol * value.abs());
        // floor at the rounding level of the integrand magnitude
        let floor = T::lit(50.0) * T::epsilon() * abs_integral;
        if err <= target || err <= floor {
            return Ok(QuadResult {
                value,
                abs_err: err,
                abs_integral,
                intervals: intervals.len(),
            });
        }
        if intervals.len() >= max_intervals {
            return Err(Error::QuadratureNotConverged(format!(
                "error estimate {:e} above target {:e} after {} intervals",
                err.as_f64(),
                target.as_f64(),
                intervals.len()
            )));
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, ..) = intervals.swap_remove(worst);
        let mid = (lo + hi) / T::lit(2.0);
        for (l, h) in [(lo, mid), (mid, hi)] {
            let (v, e, ai) = gk21(&f, l, h);
            intervals.push((l, h, v, e, ai));
        }
    }
}

//! Special functions: oscillator eigenfunctions, normalized Laguerre functions,
//! the Dawson integral and Gauss-Legendre rules.

use crate::num::Real;

/// `ln k!` for `k = 0..=n`.
pub fn ln_factorials<T: Real>(n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0f64;
    out.push(T::zero());
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(T::lit(acc));
    }
    out
}

/// Dawson's integral `D(x) = exp(-x^2) * int_0^x exp(t^2) dt`.
///
/// Uses the positive-term Kummer series `x e^{-x^2} sum x^{2k} / (k! (2k+1))`
/// where it cannot overflow and the asymptotic expansion beyond.
pub fn dawson<T: Real>(x: T) -> T {
    let ax = x.abs();
    let x2 = ax * ax;
    let limit = T::max_value().ln() * T::lit(0.8);
    let value = if x2 < limit {
        let mut term = T::one();
        let mut sum = T::one();
        let mut k = 0usize;
        loop {
            k += 1;
            term = term * x2 / T::of(k);
            let contrib = term / T::of(2 * k + 1);
            sum += contrib;
            if T::of(k) > x2 && contrib < sum * T::epsilon() {
                break;
            }
        }
        ax * (-x2).exp() * sum
    } else {
        // D(x) ~ 1/(2x) sum (2k-1)!! / (2x^2)^k
        let inv = T::one() / (T::lit(2.0) * x2);
        let mut term = T::one();
        let mut sum = T::one();
        let mut k = 0usize;
        loop {
            k += 1;
            let next = term * T::of(2 * k - 1) * inv;
            if next.abs() >= term.abs() || next < sum * T::epsilon() {
                break;
            }
            term = next;
            sum += term;
        }
        sum / (T::lit(2.0) * ax)
    };
    if x < T::zero() {
        -value
    } else {
        value
    }
}

/// Normalized oscillator eigenfunctions `psi_n(x)`, `n = 0..=n_max`, for the
/// convention `x = (a + a^dag)/sqrt(2)` (ground-state variance 1/2).
pub fn hermite_functions<T: Real>(n_max: usize, x: T) -> Vec<T> {
    let mut out = vec![T::zero(); n_max + 1];
    hermite_functions_into(x, &mut out);
    out
}

/// Fills `out[n] = psi_n(x)` for `n < out.len()`.
pub fn hermite_functions_into<T: Real>(x: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    let sqrt2 = T::SQRT_2();
    out[0] = T::PI().powf(T::lit(-0.25)) * (-x * x / T::lit(2.0)).exp();
    if out.len() > 1 {
        out[1] = sqrt2 * x * out[0];
    }
    for n in 2..out.len() {
        out[n] = (sqrt2 * x * out[n - 1] - T::of(n - 1).sqrt() * out[n - 2]) / T::of(n).sqrt();
    }
}

/// Normalized Laguerre functions
/// `l_m(t) = sqrt(m!/(m+d)!) t^{d/2} e^{-t/2} L_m^{(d)}(t)` for `m = 0..out.len()`.
///
/// For `t = u^2` these are the moduli of the displacement-operator matrix
/// elements `<m+d| D(i u) |m>`, hence bounded by one. `ln_fact` must hold
/// `ln k!` for at least `k = d`.
pub fn laguerre_functions_into<T: Real>(d: usize, t: T, ln_fact: &[T], out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    let half = T::lit(0.5);
    let log_l0 = if d == 0 {
        -half * t
    } else if t <= T::zero() {
        for v in out.iter_mut() {
            *v = T::zero();
        }
        return;
    } else {
        half * T::of(d) * t.ln() - half * t - half * ln_fact[d]
    };
    // Run the recurrence on rescaled values when the seed would underflow.
    let floor = T::lit(-300.0);
    let shift = if log_l0 < floor { floor - log_l0 } else { T::zero() };
    let fd = T::of(d);
    let mut prev = T::zero();
    let mut cur = (log_l0 + shift).exp();
    out[0] = cur;
    for k in 0..out.len() - 1 {
        let fk = T::of(k);
        let next = ((T::lit(2.0) * fk + T::one() + fd - t) * cur - (fk * (fk + fd)).sqrt() * prev)
            / ((fk + T::one()) * (fk + T::one() + fd)).sqrt();
        prev = cur;
        cur = next;
        out[k + 1] = cur;
    }
    if shift > T::zero() {
        let scale = (-shift).exp();
        for v in out.iter_mut() {
            *v *= scale;
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, 0.0f64);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = T::lit(-z);
        nodes[n - 1 - i] = T::lit(z);
        weights[i] = T::lit(w);
        weights[n - 1 - i] = T::lit(w);
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule on `[a, b]` with `panels` equal panels of `order` nodes.
pub fn composite_gauss_legendre<T: Real>(a: T, b: T, panels: usize, order: usize) -> (Vec<T>, Vec<T>) {
    let (z, w) = gauss_legendre::<T>(order);
    let h = (b - a) / T::of(panels);
    let half = h / T::lit(2.0);
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + h * (T::of(p) + T::lit(0.5));
        for (zi, wi) in z.iter().zip(&w) {
            xs.push(mid + half * *zi);
            ws.push(half * *wi);
        }
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dawson_matches_reference_values() {
        // reference values from an independent implementation
        let cases = [
            (0.0, 0.0),
            (0.1, 0.0993359923978529),
            (0.5, 0.4244363835020223),
            (1.0, 0.5380795069127684),
            (2.5, 0.22308372216743555),
            (5.0, 0.10213407442427686),
            (9.0, 0.05590504672435046),
            (12.0, 0.04181287645398826),
            (30.0, 0.016675941401059196),
        ];
        for (x, want) in cases {
            assert_relative_eq!(dawson(x), want, max_relative = 1e-13, epsilon = 1e-300);
            assert_relative_eq!(dawson(-x), -want, max_relative = 1e-13, epsilon = 1e-300);
        }
        assert_relative_eq!(dawson(1.0f32), 0.538_079_5f32, max_relative = 1e-5);
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let (xs, ws) = composite_gauss_legendre(-14.0f64, 14.0, 200, 16);
        let n = 12;
        let mut gram = vec![0.0; (n + 1) * (n + 1)];
        for (x, w) in xs.iter().zip(&ws) {
            let psi = hermite_functions(n, *x);
            for i in 0..=n {
                for j in 0..=n {
                    gram[i * (n + 1) + j] += w * psi[i] * psi[j];
                }
            }
        }
        for i in 0..=n {
            for j in 0..=n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * (n + 1) + j] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn laguerre_functions_match_explicit_polynomials() {
        let lf = ln_factorials::<f64>(40);
        for d in 0..4 {
            for &t in &[0.3, 2.0, 7.5] {
                let mut out = vec![0.0; 6];
                laguerre_functions_into(d, t, &lf, &mut out);
                for (m, got) in out.iter().enumerate() {
                    // L_m^{(d)}(t) = sum_k (-1)^k C(m+d, m-k) t^k / k!
                    let mut poly = 0.0;
                    for k in 0..=m {
                        let binom = (lf[m + d] - lf[m - k] - lf[d + k]).exp();
                        poly += (-1.0f64).powi(k as i32) * binom * t.powi(k as i32) / lf[k].exp();
                    }
                    let norm = (lf[m] - lf[m + d]).exp().sqrt();
                    let want = norm * t.powf(d as f64 / 2.0) * (-t / 2.0).exp() * poly;
                    assert!((got - want).abs() < 1e-12, "d={d} m={m} t={t}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn laguerre_functions_stay_bounded_for_large_arguments() {
        let lf = ln_factorials::<f64>(400);
        let mut out = vec![0.0; 301];
        laguerre_functions_into(3, 1300.0, &lf, &mut out);
        assert!(out.iter().all(|v| v.is_finite() && v.abs() <= 1.0 + 1e-9));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre::<f64>(10);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert_relative_eq!(integral, 2.0 / 19.0, max_relative = 1e-14);
    }
}

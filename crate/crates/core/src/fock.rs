//! Truncated Fock-basis states and their analytic phase and quadrature
//! distributions.
//!
//! Conventions: the homodyne quadrature at local-oscillator phase `phi'` is
//! `x(phi') = (a e^{i phi'} + a^dag e^{-i phi'}) / sqrt(2)`, so that
//! `<x, phi'| n> = e^{i n phi'} psi_n(x)`. The field strength is
//! `F = sqrt(2) |F| x` and the default scale is `|F| = 1/sqrt(2)`, i.e. `F = x`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::special::{composite_gauss_legendre, hermite_functions, hermite_functions_into, ln_factorials};

/// Largest tail probability accepted when truncating a state.
pub const TRUNCATION_TOLERANCE: f64 = 1e-10;
/// Default field-strength scale `|F|`.
pub const DEFAULT_F_ABS: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Closed-form description of a Gaussian pure state, kept alongside the
/// Fock coefficients so exact quadrature moments are available.
///
/// The state is `R(rotation) D(alpha) S|0>` with real squeezing `r` that
/// stretches the `phi' = 0` quadrature; `R(theta)` maps `c_n -> c_n e^{i n theta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams<T> {
    pub alpha: Complex<T>,
    pub squeeze_r: T,
    pub rotation: T,
}

impl<T: Real> GaussianParams<T> {
    /// Mean and variance of `x(phi')` for ideal detection.
    pub fn quadrature_moments(&self, lo_phase: T) -> (T, T) {
        let angle = lo_phase + self.rotation;
        let mean = T::SQRT_2() * (self.alpha * Complex::from_polar(T::one(), angle)).re;
        let two_r = T::lit(2.0) * self.squeeze_r;
        let (s, c) = angle.sin_cos();
        let var = (two_r.exp() * c * c + (-two_r).exp() * s * s) / T::lit(2.0);
        (mean, var)
    }
}

/// Pure state `sum_n c_n |n>`, `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState<T> {
    coeffs: Vec<Complex<T>>,
    gaussian: Option<GaussianParams<T>>,
}

impl<T: Real> FockState<T> {
    /// Normalizes arbitrary amplitudes.
    pub fn from_coeffs(coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("state needs at least one amplitude".into()));
        }
        let norm: T = coeffs.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::InvalidArgument("state amplitudes have zero or non-finite norm".into()));
        }
        Ok(Self {
            coeffs: coeffs.into_iter().map(|c| c / norm).collect(),
            gaussian: None,
        })
    }

    /// Photon-number state `|n>` stored with truncation `n_max >= n`.
    pub fn number_state(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::InvalidArgument(format!("number state {n} exceeds n_max {n_max}")));
        }
        let mut coeffs = vec![Complex::new(T::zero(), T::zero()); n_max + 1];
        coeffs[n] = Complex::new(T::one(), T::zero());
        let gaussian = (n == 0).then_some(GaussianParams {
            alpha: Complex::new(T::zero(), T::zero()),
            squeeze_r: T::zero(),
            rotation: T::zero(),
        });
        Ok(Self { coeffs, gaussian })
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn gaussian(&self) -> Option<&GaussianParams<T>> {
        self.gaussian.as_ref()
    }

    pub fn mean_photon_number(&self) -> T {
        self.coeffs.iter().enumerate().map(|(n, c)| T::of(n) * c.norm_sqr()).sum()
    }

    /// Phase-rotated state `c_n -> c_n e^{i n theta}`.
    pub fn rotated(&self, theta: T) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| c * Complex::from_polar(T::one(), T::of(n) * theta))
            .collect();
        let gaussian = self.gaussian.map(|g| GaussianParams {
            rotation: g.rotation + theta,
            ..g
        });
        Self { coeffs, gaussian }
    }
}

fn truncation_check<T: Real>(tail: T) -> Result<()> {
    if tail > T::lit(TRUNCATION_TOLERANCE) {
        Err(Error::TruncationInsufficient {
            what: "state tail probability",
            required: TRUNCATION_TOLERANCE,
            available: tail.as_f64(),
        })
    } else {
        Ok(())
    }
}

/// Sums the terms `f(n)` for `n > from` until they become negligible.
fn tail_sum<T: Real>(from: usize, f: impl Fn(usize) -> T) -> T {
    let mut sum = T::zero();
    let mut n = from + 1;
    let mut last_big = n;
    loop {
        let t = f(n);
        sum += t;
        if t > sum * T::lit(1e-18) {
            last_big = n;
        }
        if n > last_big + 64 || n > from + 100_000 {
            return sum;
        }
        n += 1;
    }
}

/// Coherent state `|alpha>`; fails if more than `1e-10` probability lies above `n_max`.
pub fn coherent_state<T: Real>(alpha: Complex<T>, n_max: usize) -> Result<FockState<T>> {
    let a2 = alpha.norm_sqr();
    if !a2.is_finite() {
        return Err(Error::InvalidArgument("coherent amplitude must be finite".into()));
    }
    let log_prob = |n: usize| -> T {
        if a2 == T::zero() {
            if n == 0 {
                T::zero()
            } else {
                T::neg_infinity()
            }
        } else {
            -a2 + T::of(n) * a2.ln() - ln_factorial::<T>(n)
        }
    };
    truncation_check(tail_sum(n_max, |n| log_prob(n).exp()))?;
    let lf = ln_factorials::<T>(n_max);
    let (r, theta) = (alpha.norm(), alpha.arg());
    let coeffs: Vec<Complex<T>> = (0..=n_max)
        .map(|n| {
            let mag = if n == 0 {
                (-a2 / T::lit(2.0)).exp()
            } else if r == T::zero() {
                T::zero()
            } else {
                (-a2 / T::lit(2.0) + T::of(n) * r.ln() - lf[n] / T::lit(2.0)).exp()
            };
            Complex::from_polar(mag, T::of(n) * theta)
        })
        .collect();
    let mut state = FockState::from_coeffs(coeffs)?;
    state.gaussian = Some(GaussianParams {
        alpha,
        squeeze_r: T::zero(),
        rotation: T::zero(),
    });
    Ok(state)
}

/// Coherent state with the smallest admissible truncation.
pub fn coherent_state_auto<T: Real>(alpha: Complex<T>) -> Result<FockState<T>> {
    let a2 = alpha.norm_sqr().as_f64();
    let mut n_max = (a2 + 10.0 * a2.sqrt() + 10.0).ceil() as usize;
    while coherent_state(alpha, n_max).is_ok() && n_max > 0 {
        n_max -= 1;
    }
    coherent_state(alpha, n_max + 1)
}

fn ln_factorial<T: Real>(n: usize) -> T {
    T::lit((1..=n).map(|k| (k as f64).ln()).sum::<f64>())
}

/// Squeezed vacuum with mean photon number `mean_n` and real squeezing
/// `r = asinh(sqrt(mean_n))`: `c_{2k} = tanh(r)^k sqrt((2k)!) / (2^k k!) / sqrt(cosh r)`.
pub fn squeezed_vacuum<T: Real>(mean_n: T, n_max: usize) -> Result<FockState<T>> {
    if !(mean_n >= T::zero()) || !mean_n.is_finite() {
        return Err(Error::InvalidArgument(format!("mean photon number must be >= 0, got {mean_n}")));
    }
    let r = mean_n.sqrt().asinh();
    let ln_t = r.tanh().ln();
    let ln_cosh = r.cosh().ln();
    let log_amp = |k: usize| -> T {
        if k == 0 {
            -ln_cosh / T::lit(2.0)
        } else {
            T::of(k) * ln_t + ln_factorial::<T>(2 * k) / T::lit(2.0)
                - T::of(k) * T::LN_2()
                - ln_factorial::<T>(k)
                - ln_cosh / T::lit(2.0)
        }
    };
    if mean_n > T::zero() {
        // pairs k > n_max/2 are the dropped even photon numbers
        truncation_check(tail_sum(n_max / 2, |k| (T::lit(2.0) * log_amp(k)).exp()))?;
    }
    let coeffs = (0..=n_max)
        .map(|n| {
            if n % 2 == 1 || (n > 0 && mean_n == T::zero()) {
                Complex::new(T::zero(), T::zero())
            } else {
                Complex::new(log_amp(n / 2).exp(), T::zero())
            }
        })
        .collect();
    let mut state = FockState::from_coeffs(coeffs)?;
    state.gaussian = Some(GaussianParams {
        alpha: Complex::new(T::zero(), T::zero()),
        squeeze_r: r,
        rotation: T::zero(),
    });
    Ok(state)
}

/// Squeezed vacuum with the smallest admissible (even) truncation.
pub fn squeezed_vacuum_auto<T: Real>(mean_n: T) -> Result<FockState<T>> {
    let mut n_max = 0;
    loop {
        match squeezed_vacuum(mean_n, n_max) {
            Ok(s) => return Ok(s),
            Err(Error::TruncationInsufficient { .. }) if n_max < 4000 => n_max += 2,
            Err(e) => return Err(e),
        }
    }
}

/// Hermitian density matrix in the truncated Fock basis, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    n_max: usize,
    rho: Vec<Complex<T>>,
    gaussian: Option<GaussianParams<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Builds from a row-major `(n_max+1)^2` matrix; the lower triangle is
    /// taken as the conjugate of the upper one and the trace must be 1.
    pub fn from_matrix(n_max: usize, rho: Vec<Complex<T>>) -> Result<Self> {
        let out = Self::hermitian_closure(n_max, rho)?;
        let trace = out.trace();
        if (trace - T::one()).abs() > T::lit(1e-10) {
            return Err(Error::InvalidArgument(format!("density matrix trace {trace} != 1")));
        }
        Ok(out)
    }

    /// Hermitian closure of the upper triangle without the trace check, for
    /// sampled estimates whose trace fluctuates around one.
    pub fn hermitian_closure(n_max: usize, mut rho: Vec<Complex<T>>) -> Result<Self> {
        let dim = n_max + 1;
        if rho.len() != dim * dim {
            return Err(Error::InvalidArgument(format!(
                "density matrix needs {} entries, got {}",
                dim * dim,
                rho.len()
            )));
        }
        for n in 0..dim {
            rho[n * dim + n].im = T::zero();
            for m in n + 1..dim {
                rho[m * dim + n] = rho[n * dim + m].conj();
            }
        }
        Ok(Self {
            n_max,
            rho,
            gaussian: None,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> Complex<T> {
        self.rho[n * (self.n_max + 1) + m]
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.rho
    }

    pub fn gaussian(&self) -> Option<&GaussianParams<T>> {
        self.gaussian.as_ref()
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).map(|n| self.get(n, n).re).sum()
    }

    pub fn mean_photon_number(&self) -> T {
        (0..self.dim()).map(|n| T::of(n) * self.get(n, n).re).sum()
    }

    /// `rho -> R rho R^dag` with `R|n> = e^{i n theta}|n>`.
    pub fn rotated(&self, theta: T) -> Self {
        let dim = self.dim();
        let mut rho = self.rho.clone();
        for n in 0..dim {
            for m in 0..dim {
                rho[n * dim + m] = rho[n * dim + m] * Complex::from_polar(T::one(), T::of(n) * theta - T::of(m) * theta);
            }
        }
        Self {
            n_max: self.n_max,
            rho,
            gaussian: self.gaussian.map(|g| GaussianParams {
                rotation: g.rotation + theta,
                ..g
            }),
        }
    }

    /// Mean and variance of the ideal quadrature `x(phi')`.
    pub fn quadrature_moments(&self, lo_phase: T) -> (T, T) {
        let dim = self.dim();
        let mut a = Complex::new(T::zero(), T::zero());
        let mut a2 = Complex::new(T::zero(), T::zero());
        for m in 1..dim {
            a = a + self.get(m, m - 1) * T::of(m).sqrt();
            if m >= 2 {
                a2 = a2 + self.get(m, m - 2) * (T::of(m) * T::of(m - 1)).sqrt();
            }
        }
        let n = self.mean_photon_number();
        let phase = Complex::from_polar(T::one(), lo_phase);
        let mean = T::SQRT_2() * (a * phase).re;
        let second = ((a2 * phase * phase).re * T::lit(2.0) + T::lit(2.0) * n + T::one()) / T::lit(2.0);
        (mean, second - mean * mean)
    }

    /// Smallest eigenvalue, via cyclic Jacobi on the real symmetric embedding
    /// `[[A, -B], [B, A]]` of `rho = A + iB`. Intended for validation (`n_max <= 32`).
    pub fn min_eigenvalue(&self) -> T {
        let dim = self.dim();
        let size = 2 * dim;
        let mut a = vec![T::zero(); size * size];
        for n in 0..dim {
            for m in 0..dim {
                let z = self.get(n, m);
                a[n * size + m] = z.re;
                a[(n + dim) * size + m + dim] = z.re;
                a[n * size + m + dim] = -z.im;
                a[(n + dim) * size + m] = z.im;
            }
        }
        jacobi_eigenvalues(&mut a, size).into_iter().fold(T::infinity(), T::min)
    }
}

fn jacobi_eigenvalues<T: Real>(a: &mut [T], n: usize) -> Vec<T> {
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off < T::lit(1e-30) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < T::lit(1e-300) {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// `rho_nm = c_n conj(c_m)`.
pub fn pure_to_density<T: Real>(state: &FockState<T>) -> DensityMatrix<T> {
    let c = state.coeffs();
    let dim = c.len();
    let mut rho = Vec::with_capacity(dim * dim);
    for n in 0..dim {
        for m in 0..dim {
            rho.push(c[n] * c[m].conj());
        }
    }
    DensityMatrix {
        n_max: dim - 1,
        rho,
        gaussian: state.gaussian,
    }
}

/// Sorted phase values in `[-pi, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid<T> {
    phis: Vec<T>,
}

impl<T: Real> PhaseGrid<T> {
    /// `count` equally spaced points `-pi + 2 pi k / count`.
    pub fn uniform(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyGrid);
        }
        let step = T::TAU() / T::of(count);
        Ok(Self {
            phis: (0..count).map(|k| -T::PI() + step * T::of(k)).collect(),
        })
    }

    pub fn from_values(phis: Vec<T>) -> Result<Self> {
        if phis.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if phis.iter().any(|p| !(*p >= -T::PI() && *p < T::PI())) {
            return Err(Error::InvalidGrid("phases must lie in [-pi, pi)".into()));
        }
        if phis.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("phases must be strictly increasing".into()));
        }
        Ok(Self { phis })
    }

    pub fn values(&self) -> &[T] {
        &self.phis
    }

    pub fn len(&self) -> usize {
        self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phis.is_empty()
    }

    /// Largest gap between neighbours, including the wrap-around gap.
    pub fn max_spacing(&self) -> T {
        let n = self.phis.len();
        let wrap = self.phis[0] + T::TAU() - self.phis[n - 1];
        self.phis.windows(2).map(|w| w[1] - w[0]).fold(wrap, T::max)
    }

    /// Periodic trapezoidal integral of `values` over one full period.
    pub fn integrate(&self, values: &[T]) -> T {
        let n = self.phis.len();
        let mut acc = T::zero();
        for k in 0..n {
            let (p0, v0) = (self.phis[k], values[k]);
            let (p1, v1) = if k + 1 < n {
                (self.phis[k + 1], values[k + 1])
            } else {
                (self.phis[0] + T::TAU(), values[0])
            };
            acc += (p1 - p0) * (v0 + v1) / T::lit(2.0);
        }
        acc
    }
}

/// Tabulated phase distribution `p(phi)`; `epsilon = 0` marks the London limit.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDistribution<T> {
    pub grid: PhaseGrid<T>,
    pub values: Vec<T>,
    pub stderr: Option<Vec<T>>,
    pub epsilon: T,
}

impl<T: Real> PhaseDistribution<T> {
    pub fn integral(&self) -> T {
        self.grid.integrate(&self.values)
    }

    /// Points lying below zero by more than one standard error.
    pub fn negative_flags(&self) -> Vec<bool> {
        match &self.stderr {
            Some(se) => self.values.iter().zip(se).map(|(v, s)| *v + *s < T::zero()).collect(),
            None => self.values.iter().map(|v| *v < T::zero()).collect(),
        }
    }

    /// Grid point of the largest value.
    pub fn argmax(&self) -> T {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        self.grid.values()[i]
    }
}

fn check_epsilon<T: Real>(epsilon: T) -> Result<()> {
    if epsilon > T::zero() && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::EpsilonNonPositive(epsilon.as_f64()))
    }
}

/// `sum_{n,m} rho_nm e^{-i(n-m)phi} w_n w_m` for real weights `w`.
fn weighted_phase_form<T: Real>(rho: &DensityMatrix<T>, phi: T, weights: &[T]) -> Complex<T> {
    let dim = rho.dim();
    let z: Vec<Complex<T>> = (0..dim)
        .map(|n| Complex::from_polar(weights[n], T::of(n) * phi))
        .collect();
    // z^dag rho z
    let mut acc = Complex::new(T::zero(), T::zero());
    for n in 0..dim {
        let mut row = Complex::new(T::zero(), T::zero());
        for (m, zm) in z.iter().enumerate() {
            row = row + rho.get(n, m) * *zm;
        }
        acc = acc + z[n].conj() * row;
    }
    acc
}

/// Overlap `<phi,eps| rho |phi,eps> = (1 - e^{-2 eps}) sum rho_nm e^{-i(n-m)phi} e^{-eps(n+m)}`.
pub fn cps_overlap<T: Real>(rho: &DensityMatrix<T>, phi: T, epsilon: T) -> Result<T> {
    check_epsilon(epsilon)?;
    let weights: Vec<T> = (0..rho.dim()).map(|n| (-epsilon * T::of(n)).exp()).collect();
    let prefactor = -(-T::lit(2.0) * epsilon).exp_m1();
    Ok((prefactor * weighted_phase_form(rho, phi, &weights).re).max(T::zero()))
}

/// [`cps_overlap`] without clamping at zero, for estimated matrices.
pub fn cps_overlap_signed<T: Real>(rho: &DensityMatrix<T>, phi: T, epsilon: T) -> Result<T> {
    check_epsilon(epsilon)?;
    let weights: Vec<T> = (0..rho.dim()).map(|n| (-epsilon * T::of(n)).exp()).collect();
    let prefactor = -(-T::lit(2.0) * epsilon).exp_m1();
    Ok(prefactor * weighted_phase_form(rho, phi, &weights).re)
}

/// `N(eps) = 2 pi (1 - e^{-2 eps}) sum_n rho_nn e^{-2 eps n}`.
pub fn cps_normalization<T: Real>(rho: &DensityMatrix<T>, epsilon: T) -> Result<T> {
    check_epsilon(epsilon)?;
    let prefactor = -(-T::lit(2.0) * epsilon).exp_m1();
    let diag: T = (0..rho.dim())
        .map(|n| rho.get(n, n).re * (-T::lit(2.0) * epsilon * T::of(n)).exp())
        .sum();
    Ok(T::TAU() * prefactor * diag)
}

/// Normalized CPS distribution `p(phi, eps)` on `grid`.
pub fn cps_distribution<T: Real>(rho: &DensityMatrix<T>, epsilon: T, grid: &PhaseGrid<T>) -> Result<PhaseDistribution<T>> {
    check_epsilon(epsilon)?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let norm = cps_normalization(rho, epsilon)?;
    let values = grid
        .values()
        .iter()
        .map(|&phi| cps_overlap(rho, phi, epsilon).map(|v| v / norm))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDistribution {
        grid: grid.clone(),
        values,
        stderr: None,
        epsilon,
    })
}

/// London phase distribution `sum rho_nm e^{-i(n-m)phi} / (2 pi)` of the truncated state.
pub fn london_distribution<T: Real>(rho: &DensityMatrix<T>, grid: &PhaseGrid<T>) -> Result<PhaseDistribution<T>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let weights = vec![T::one(); rho.dim()];
    let norm = T::TAU() * rho.trace();
    let values = grid
        .values()
        .iter()
        .map(|&phi| (weighted_phase_form(rho, phi, &weights).re / norm).max(T::zero()))
        .collect();
    Ok(PhaseDistribution {
        grid: grid.clone(),
        values,
        stderr: None,
        epsilon: T::zero(),
    })
}

/// Ideal quadrature density in `x` units: `sum rho_nm e^{i(n-m)phi'} psi_n(x) psi_m(x)`.
pub fn quadrature_pdf_x<T: Real>(rho: &DensityMatrix<T>, x: T, lo_phase: T) -> T {
    let dim = rho.dim();
    let mut psi = vec![T::zero(); dim];
    hermite_functions_into(x, &mut psi);
    let v: Vec<Complex<T>> = (0..dim)
        .map(|n| Complex::from_polar(psi[n], T::of(n) * lo_phase))
        .collect();
    let mut acc = T::zero();
    for n in 0..dim {
        // diagonal plus twice the real part of the upper triangle
        acc += rho.get(n, n).re * psi[n] * psi[n];
        for m in n + 1..dim {
            acc += T::lit(2.0) * (rho.get(n, m) * v[n] * v[m].conj()).re;
        }
    }
    acc.max(T::zero())
}

/// Smeared quadrature density in `x` units: the ideal density convolved with
/// a zero-mean Gaussian of variance `|s|/2`.
pub fn smeared_quadrature_pdf_x<T: Real>(rho: &DensityMatrix<T>, x: T, lo_phase: T, s: T) -> Result<T> {
    if s > T::zero() {
        return Err(Error::SParameterPositive(s.as_f64()));
    }
    if s == T::zero() {
        return Ok(quadrature_pdf_x(rho, x, lo_phase));
    }
    let var = -s / T::lit(2.0);
    let sd = var.sqrt();
    let (ys, ws) = composite_gauss_legendre(-T::lit(10.0) * sd, T::lit(10.0) * sd, 16, 16);
    let norm = T::one() / (T::TAU() * var).sqrt();
    Ok(ys
        .iter()
        .zip(&ws)
        .map(|(y, w)| *w * norm * (-*y * *y / (T::lit(2.0) * var)).exp() * quadrature_pdf_x(rho, x - *y, lo_phase))
        .sum())
}

/// Field-strength density `p(F, phi'; s)` with the default scale `|F| = 1/sqrt(2)`.
pub fn quadrature_pdf<T: Real>(rho: &DensityMatrix<T>, field: T, lo_phase: T, s: T) -> Result<T> {
    quadrature_pdf_scaled(rho, field, lo_phase, s, T::lit(DEFAULT_F_ABS))
}

/// Field-strength density `p(F, phi'; s)` for an arbitrary scale `|F|`.
pub fn quadrature_pdf_scaled<T: Real>(rho: &DensityMatrix<T>, field: T, lo_phase: T, s: T, f_abs: T) -> Result<T> {
    let jac = T::SQRT_2() * f_abs;
    Ok(smeared_quadrature_pdf_x(rho, field / jac, lo_phase, s)? / jac)
}

/// Values of `psi_n` at many points, used by tests and samplers.
pub fn hermite_table<T: Real>(n_max: usize, xs: &[T]) -> Vec<Vec<T>> {
    xs.iter().map(|&x| hermite_functions(n_max, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    #[test]
    fn vacuum_and_coherent_coefficients() {
        let vac = coherent_state(c(0.0), 4).unwrap();
        assert_eq!(vac.coeffs()[0], c(1.0));
        assert!(vac.coeffs()[1..].iter().all(|z| z.norm() == 0.0));

        let coh = coherent_state(c(1.0), 24).unwrap();
        assert_abs_diff_eq!(coh.mean_photon_number(), 1.0, epsilon = 1e-8);
        let ratio = coh.coeffs()[2].norm_sqr() / coh.coeffs()[0].norm_sqr();
        // |alpha|^4 / 2!
        assert_abs_diff_eq!(ratio, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn truncation_is_enforced() {
        assert!(matches!(
            coherent_state(c(3.0), 8),
            Err(Error::TruncationInsufficient { .. })
        ));
        assert!(matches!(
            squeezed_vacuum(1.0f64, 40),
            Err(Error::TruncationInsufficient { .. })
        ));
        let auto = coherent_state_auto(c(1.0)).unwrap();
        assert!(coherent_state(c(1.0), auto.n_max() - 1).is_err());
    }

    #[test]
    fn squeezed_vacuum_coefficients() {
        let sq = squeezed_vacuum(1.0f64, 64).unwrap();
        assert_abs_diff_eq!(sq.mean_photon_number(), 1.0, epsilon = 1e-6);
        assert_eq!(sq.coeffs()[1].norm(), 0.0);
        assert_eq!(sq.coeffs()[3].norm(), 0.0);
        // cosh(asinh 1) = sqrt(2)
        assert_abs_diff_eq!(sq.coeffs()[0].norm_sqr(), 1.0 / 2f64.sqrt(), epsilon = 1e-10);
        let vac = squeezed_vacuum(0.0f64, 6).unwrap();
        assert_eq!(vac.coeffs()[0], c(1.0));
    }

    #[test]
    fn density_from_pure_state() {
        let sq = squeezed_vacuum(1.0f64, 64).unwrap();
        let rho = pure_to_density(&sq);
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-12);
        let want = sq.coeffs()[0] * sq.coeffs()[2].conj();
        assert_eq!(rho.get(0, 2), want);
        assert!(rho.min_eigenvalue() > -1e-9);
        let vac = pure_to_density(&coherent_state(c(0.0), 3).unwrap());
        assert_eq!(vac.get(0, 0), c(1.0));
    }

    #[test]
    fn from_matrix_validates_trace() {
        let bad = vec![c(0.5), c(0.0), c(0.0), c(0.4)];
        assert!(DensityMatrix::from_matrix(1, bad).is_err());
        let ok = vec![c(0.5), Complex::new(0.1, 0.2), c(9.0), c(0.5)];
        let rho = DensityMatrix::from_matrix(1, ok).unwrap();
        assert_eq!(rho.get(1, 0), Complex::new(0.1, -0.2));
    }

    #[test]
    fn overlap_examples() {
        let vac = pure_to_density(&coherent_state(c(0.0), 5).unwrap());
        for phi in [-2.0, 0.0, 1.3] {
            assert_abs_diff_eq!(cps_overlap(&vac, phi, 0.5).unwrap(), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        }
        let coh = pure_to_density(&coherent_state(c(1.0), 24).unwrap());
        assert!(cps_overlap(&coh, 0.0, 0.1).unwrap() > cps_overlap(&coh, PI, 0.1).unwrap());
        let sq = pure_to_density(&squeezed_vacuum(1.0, 64).unwrap());
        for phi in [0.3, 1.1, 2.9] {
            let a = cps_overlap(&sq, phi, 0.1).unwrap();
            let b = cps_overlap(&sq, -phi, 0.1).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(matches!(cps_overlap(&vac, 0.0, 0.0), Err(Error::EpsilonNonPositive(_))));
    }

    #[test]
    fn distribution_errors() {
        let vac = pure_to_density(&coherent_state(c(0.0), 2).unwrap());
        assert_eq!(PhaseGrid::<f64>::uniform(0), Err(Error::EmptyGrid));
        assert!(PhaseGrid::from_values(vec![0.0, 0.0]).is_err());
        assert!(PhaseGrid::from_values(vec![PI]).is_err());
        let grid = PhaseGrid::uniform(8).unwrap();
        assert!(cps_distribution(&vac, -1.0, &grid).is_err());
    }

    #[test]
    fn quadrature_pdf_rejects_positive_s() {
        let vac = pure_to_density(&coherent_state(c(0.0), 2).unwrap());
        assert_eq!(quadrature_pdf(&vac, 0.0, 0.0, 0.1), Err(Error::SParameterPositive(0.1)));
        // ground state: e^{-x^2}/sqrt(pi)
        assert_abs_diff_eq!(quadrature_pdf(&vac, 0.7, 1.0, 0.0).unwrap(), (-0.49f64).exp() / PI.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn gaussian_moments_agree_with_matrix_moments() {
        for state in [
            squeezed_vacuum(1.0f64, 64).unwrap().rotated(0.4),
            coherent_state(Complex::new(0.8, -0.5), 30).unwrap(),
        ] {
            let g = *state.gaussian().unwrap();
            let rho = pure_to_density(&state);
            for phase in [0.0, 0.7, 2.0] {
                let (m1, v1) = g.quadrature_moments(phase);
                let (m2, v2) = rho.quadrature_moments(phase);
                assert_abs_diff_eq!(m1, m2, epsilon = 1e-8);
                assert_abs_diff_eq!(v1, v2, epsilon = 1e-8);
            }
        }
    }
}

//! The CPS sampling kernel
//!
//! ```text
//! K_eps(phi, x, phi'; s) = (1 - e^{-2 eps}) sum_{n,m} f_nm(x; s) cos((n - m)(phi + phi')) e^{-eps (n + m)}
//!                        = (1 - e^{-2 eps}) [h_0(x) + 2 sum_{d >= 1} h_d(x) cos(d (phi + phi'))],
//! h_d(x) = sum_m f_{m+d,m}(x; s) e^{-eps (2m + d)}.
//! ```

use ndarray::Array2;
use rayon::prelude::*;

use super::pattern::{check_s, trig_sign};
use super::table::{check_order, gemm, Interpolation, KernelBound, KernelTable, Stencil, URule, XGrid};
use crate::error::{Error, Result};
use crate::fock::{cps_normalization, DensityMatrix, PhaseDistribution, PhaseGrid};
use crate::num::Real;
use crate::special::{composite_gauss_legendre, hermite_functions_into, laguerre_functions_into, ln_factorials};

/// Truncation order `N` for the kernel series.
///
/// Dropped terms satisfy `|f_nm| e^{-eps(n+m)} <= B e^{-(eps - g)(n+m)}`;
/// summing over all pairs with `max(n, m) > N` gives the tail bound
/// `B_eff e^{-(eps - g) N}` with `B_eff = 2 B (1 - e^{-2 eps}) / (1 - e^{-eps})^2`.
/// Fails with `KernelDivergent` when `eps <= g`.
pub fn kernel_truncation<T: Real>(epsilon: T, tol: T, bound: KernelBound<T>) -> Result<usize> {
    if !(epsilon > T::zero()) {
        return Err(Error::EpsilonNonPositive(epsilon.as_f64()));
    }
    if !(tol > T::zero() && tol < T::one()) {
        return Err(Error::InvalidArgument(format!("truncation tolerance must lie in (0, 1), got {tol}")));
    }
    let rate = epsilon - bound.growth;
    if rate <= T::zero() {
        return Err(Error::KernelDivergent {
            epsilon: epsilon.as_f64(),
            growth: bound.growth.as_f64(),
        });
    }
    let damp = -(-epsilon).exp_m1();
    let b_eff = T::lit(2.0) * bound.sup * -(-T::lit(2.0) * epsilon).exp_m1() / (damp * damp);
    let n = ((b_eff / tol).ln() / rate).ceil();
    Ok(n.max(T::zero()).to_usize().unwrap_or(usize::MAX))
}

/// Arguments of one kernel evaluation. `field` is in units where `x = F / (sqrt(2) |F|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelQuery<T> {
    pub phi: T,
    pub field: T,
    pub lo_phase: T,
    pub epsilon: T,
    pub s: T,
    pub f_abs: T,
}

impl<T: Real> KernelQuery<T> {
    /// Query with the default scale `|F| = 1/sqrt(2)`; `lo_phase` must lie in `[0, pi)`.
    pub fn new(phi: T, field: T, lo_phase: T, epsilon: T, s: T) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::EpsilonNonPositive(epsilon.as_f64()));
        }
        if !(lo_phase >= T::zero() && lo_phase < T::PI()) {
            return Err(Error::InvalidArgument(format!("LO phase {lo_phase} outside [0, pi)")));
        }
        check_s(s)?;
        Ok(Self {
            phi,
            field,
            lo_phase,
            epsilon,
            s,
            f_abs: T::FRAC_1_SQRT_2(),
        })
    }

    pub fn x(&self) -> T {
        self.field / (T::SQRT_2() * self.f_abs)
    }

    pub fn sum_phase(&self) -> T {
        self.phi + self.lo_phase
    }
}

/// `(1 - e^{-2 eps}) [h_0 + 2 sum_d h_d cos(d sigma)]` with a Chebyshev
/// recurrence for the cosines.
#[inline]
pub(crate) fn fold_harmonics<T: Real>(h: &[T], sigma: T, prefactor: T) -> T {
    let c1 = sigma.cos();
    let two_c1 = c1 + c1;
    let (mut prev, mut cur) = (c1, T::one());
    let mut acc = h[0];
    // cur = cos(d sigma), prev = cos((d - 1) sigma)
    for &hd in &h[1..] {
        let next = two_c1 * cur - prev;
        prev = cur;
        cur = next;
        acc += T::lit(2.0) * hd * cur;
    }
    prefactor * acc
}

/// Sampling kernel from a pattern-function table with the order chosen by
/// [`kernel_truncation`] at tolerance `tol`.
pub fn sampling_kernel<T: Real>(query: &KernelQuery<T>, table: &KernelTable<T>, tol: T) -> Result<T> {
    let order = kernel_truncation(query.epsilon, tol, table.bound())?;
    if order > table.n_max() {
        return Err(Error::TruncationInsufficient {
            what: "kernel table order",
            required: order as f64,
            available: table.n_max() as f64,
        });
    }
    sampling_kernel_with_order(query, table, order)
}

/// Sampling kernel truncated at `max(n, m) <= order`.
pub fn sampling_kernel_with_order<T: Real>(query: &KernelQuery<T>, table: &KernelTable<T>, order: usize) -> Result<T> {
    if query.s != table.s() {
        return Err(Error::InvalidArgument(format!(
            "query s = {} does not match table s = {}",
            query.s,
            table.s()
        )));
    }
    if order > table.n_max() {
        return Err(Error::TruncationInsufficient {
            what: "kernel table order",
            required: order as f64,
            available: table.n_max() as f64,
        });
    }
    let x = query.x();
    let mut h = vec![T::zero(); order + 1];
    for (d, hd) in h.iter_mut().enumerate() {
        for m in 0..=order - d {
            *hd += table.value_or_compute(m + d, m, x)? * (-query.epsilon * T::of(2 * m + d)).exp();
        }
    }
    let pref = -(-T::lit(2.0) * query.epsilon).exp_m1();
    Ok(fold_harmonics(&h, query.sum_phase(), pref))
}

/// Kernel for one fixed `eps`: the harmonics `h_d(x)`, `d = 0..=order`,
/// tabulated on an `x` grid, with a direct `u`-quadrature fallback for points
/// outside the grid.
#[derive(Debug, Clone)]
pub struct EpsilonKernel<T> {
    epsilon: T,
    s: T,
    order: usize,
    grid: XGrid<T>,
    /// `(order + 1) x nx`
    h: Array2<T>,
    dh: Array2<T>,
    interpolation: Interpolation,
    rule: URule<T>,
    /// `w_j u_j e^{-s u_j^2/2} sum_m l_m^(d)(u_j^2) e^{-eps(2m+d)}` times `(2/pi) sign_d`, `(order + 1) x nodes`
    collapsed: Array2<T>,
}

impl<T: Real> EpsilonKernel<T> {
    /// Builds the harmonics directly from the `u` integral of the collapsed
    /// Laguerre sums, without forming individual pattern functions.
    pub fn build(epsilon: T, s: T, order: usize, x_grid: &[T]) -> Result<Self> {
        Self::prepare(epsilon, s, order, x_grid, None)
    }

    /// Collapses an existing pattern-function table.
    pub fn from_table(table: &KernelTable<T>, epsilon: T, order: usize) -> Result<Self> {
        if order > table.n_max() {
            return Err(Error::TruncationInsufficient {
                what: "kernel table order",
                required: order as f64,
                available: table.n_max() as f64,
            });
        }
        Self::prepare(epsilon, table.s(), order, table.x_grid(), Some(table))
            .map(|k| k.with_interpolation(table.interpolation()))
    }

    fn prepare(epsilon: T, s: T, order: usize, x_grid: &[T], table: Option<&KernelTable<T>>) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::EpsilonNonPositive(epsilon.as_f64()));
        }
        check_s(s)?;
        check_order(order, s)?;
        let grid = XGrid::new(x_grid.to_vec())?;
        let rule = URule::new(order, s, grid.abs_max().max(T::lit(24.0)), 24);
        let lf = ln_factorials::<T>(order);
        let collapsed = collapsed_weights(&rule, epsilon, s, order, &lf);
        let nx = grid.len();
        let (h, dh) = match table {
            Some(t) => {
                let mut h = Array2::zeros((order + 1, nx));
                let mut dh = Array2::zeros((order + 1, nx));
                for d in 0..=order {
                    for m in 0..=order - d {
                        let w = (-epsilon * T::of(2 * m + d)).exp();
                        let (row, slope) = (t.row(m + d, m), t.slope_row(m + d, m));
                        for i in 0..nx {
                            h[[d, i]] += w * row[i];
                            dh[[d, i]] += w * slope[i];
                        }
                    }
                }
                (h, Some(dh))
            }
            None => harmonics_at(&rule, &collapsed, grid.points(), true),
        };
        Ok(Self {
            epsilon,
            s,
            order,
            grid,
            h,
            dh: dh.unwrap_or_else(|| Array2::zeros((0, 0))),
            interpolation: Interpolation::default(),
            rule,
            collapsed,
        })
    }

    pub fn with_interpolation(mut self, mode: Interpolation) -> Self {
        self.interpolation = mode;
        self
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn s(&self) -> T {
        self.s
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> &XGrid<T> {
        &self.grid
    }

    /// `1 - e^{-2 eps}`.
    pub fn prefactor(&self) -> T {
        -(-T::lit(2.0) * self.epsilon).exp_m1()
    }

    /// `h_d` at the grid points, shape `(order + 1) x nx`.
    pub fn harmonics_on_grid(&self) -> &Array2<T> {
        &self.h
    }

    /// Harmonics at arbitrary points by direct quadrature, shape `(order + 1) x xs`.
    pub fn harmonics_direct(&self, xs: &[T]) -> Array2<T> {
        harmonics_at(&self.rule, &self.collapsed, xs, false).0
    }

    /// Writes `h_d(x)` for `d = 0..=order` into `out`.
    pub fn harmonics_into(&self, x: T, out: &mut [T]) {
        match Stencil::new(&self.grid, x, self.interpolation) {
            Some(st) if self.grid.len() > 1 => {
                let i = st.i;
                for (d, o) in out.iter_mut().enumerate().take(self.order + 1) {
                    *o = st.w[0] * self.h[[d, i]]
                        + st.w[1] * self.h[[d, i + 1]]
                        + st.w[2] * self.dh[[d, i]]
                        + st.w[3] * self.dh[[d, i + 1]];
                }
            }
            _ => {
                let direct = self.harmonics_direct(&[x]);
                for (d, o) in out.iter_mut().enumerate().take(self.order + 1) {
                    *o = direct[[d, 0]];
                }
            }
        }
    }

    /// `K_eps` at quadrature `x` and sum phase `sigma = phi + phi'`.
    pub fn eval(&self, x: T, sigma: T) -> T {
        let mut h = vec![T::zero(); self.order + 1];
        self.harmonics_into(x, &mut h);
        fold_harmonics(&h, sigma, self.prefactor())
    }

    /// Largest `|K_eps|` over the grid points and the given sum phases.
    pub fn sup_abs(&self, sum_phases: &[T]) -> T {
        let pref = self.prefactor();
        let mut col = vec![T::zero(); self.order + 1];
        let mut sup = T::zero();
        for i in 0..self.grid.len() {
            for (d, c) in col.iter_mut().enumerate() {
                *c = self.h[[d, i]];
            }
            for &sg in sum_phases {
                sup = sup.max(fold_harmonics(&col, sg, pref).abs());
            }
        }
        sup
    }
}

fn collapsed_weights<T: Real>(rule: &URule<T>, epsilon: T, s: T, order: usize, lf: &[T]) -> Array2<T> {
    let nodes = rule.len();
    let rows: Vec<Vec<T>> = (0..=order)
        .into_par_iter()
        .map(|d| {
            let count = order + 1 - d;
            let mut ell = vec![T::zero(); count];
            let pref = T::lit(2.0) / T::PI() * trig_sign::<T>(d);
            let damp: Vec<T> = (0..count).map(|m| (-epsilon * T::of(2 * m + d)).exp()).collect();
            (0..nodes)
                .map(|j| {
                    let u = rule.nodes[j];
                    laguerre_functions_into(d, u * u, lf, &mut ell);
                    let sum: T = ell.iter().zip(&damp).map(|(a, b)| *a * *b).sum();
                    pref * rule.weights[j] * u * (-s * u * u / T::lit(2.0)).exp() * sum
                })
                .collect()
        })
        .collect();
    let mut out = Array2::zeros((order + 1, nodes));
    for (d, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[[d, j]] = v;
        }
    }
    out
}

/// `h_d(x_i)` (and optionally `dh_d/dx`) from the collapsed weights.
fn harmonics_at<T: Real>(rule: &URule<T>, collapsed: &Array2<T>, xs: &[T], slopes: bool) -> (Array2<T>, Option<Array2<T>>) {
    let rows = collapsed.nrows();
    let (cos, sin) = rule.trig(xs);
    // even offsets pair with cos, odd with sin
    let mut even = collapsed.clone();
    let mut odd = collapsed.clone();
    for d in 0..rows {
        if d % 2 == 0 {
            odd.row_mut(d).fill(T::zero());
        } else {
            even.row_mut(d).fill(T::zero());
        }
    }
    let mut h = gemm(T::one(), even.view(), cos.view());
    h += &gemm(T::one(), odd.view(), sin.view());
    let dh = slopes.then(|| {
        let (ed, od) = (rule.derivative_weighted(&even), rule.derivative_weighted(&odd));
        let mut dh = gemm(-T::one(), ed.view(), sin.view());
        dh += &gemm(T::one(), od.view(), cos.view());
        dh
    });
    (h, dh)
}

/// Exact-data limit of the direct-sampling estimator: the LO phase integral
/// becomes a midpoint sum over `n_phases` phases in `[0, pi)` and each event
/// average becomes a Gauss-Legendre integral against the ideal quadrature
/// density of `rho`. Normalized by the analytic `N(eps)`.
pub fn reconstruct_cps_exact<T: Real>(
    rho: &DensityMatrix<T>,
    kernel: &EpsilonKernel<T>,
    grid: &PhaseGrid<T>,
    n_phases: usize,
) -> Result<PhaseDistribution<T>> {
    if n_phases == 0 {
        return Err(Error::InvalidArgument("need at least one LO phase".into()));
    }
    if kernel.s() != T::zero() {
        return Err(Error::InvalidArgument("exact reconstruction uses the ideal (s = 0) density".into()));
    }
    let dim = rho.dim();
    let reach = (T::lit(2.0) * T::of(dim) + T::one()).sqrt() + T::lit(9.0);
    let panels = (reach / T::lit(0.1)).ceil().to_usize().unwrap_or(1);
    let (xs, ws) = composite_gauss_legendre(-reach, reach, panels, 16);
    let nx = xs.len();

    // p(x, phi') = q_0(x) + 2 Re sum_{d>=1} q_d(x) e^{i d phi'},  q_d = sum_m rho_{m+d,m} psi_{m+d} psi_m
    let mut q_re = Array2::<T>::zeros((dim, nx));
    let mut q_im = Array2::<T>::zeros((dim, nx));
    let mut psi = vec![T::zero(); dim];
    for (i, &x) in xs.iter().enumerate() {
        hermite_functions_into(x, &mut psi);
        for d in 0..dim {
            for m in 0..dim - d {
                let r = rho.get(m + d, m);
                q_re[[d, i]] += r.re * psi[m + d] * psi[m];
                q_im[[d, i]] += r.im * psi[m + d] * psi[m];
            }
        }
    }
    let lo_phases: Vec<T> = (0..n_phases)
        .map(|k| (T::of(k) + T::lit(0.5)) * T::PI() / T::of(n_phases))
        .collect();
    let mut dens = Array2::<T>::zeros((n_phases, nx));
    for (k, &ph) in lo_phases.iter().enumerate() {
        for i in 0..nx {
            let mut p = q_re[[0, i]];
            for d in 1..dim {
                let (sn, cs) = (T::of(d) * ph).sin_cos();
                p += T::lit(2.0) * (q_re[[d, i]] * cs - q_im[[d, i]] * sn);
            }
            dens[[k, i]] = p * ws[i];
        }
    }
    let h = kernel.harmonics_direct(&xs);
    // moments P_{k,d} = int p_k(x) h_d(x) dx
    let moments = gemm(T::one(), dens.view(), h.t());
    let pref = kernel.prefactor();
    let norm = cps_normalization(rho, kernel.epsilon())?;
    let weight = T::PI() / T::of(n_phases);
    let values = grid
        .values()
        .iter()
        .map(|&phi| {
            let raw: T = lo_phases
                .iter()
                .enumerate()
                .map(|(k, &ph)| fold_harmonics(&moments.row(k).to_vec(), phi + ph, pref))
                .sum();
            weight * raw / norm
        })
        .collect();
    Ok(PhaseDistribution {
        grid: grid.clone(),
        values,
        stderr: None,
        epsilon: kernel.epsilon(),
    })
}

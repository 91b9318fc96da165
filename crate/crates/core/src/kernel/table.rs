//! Tabulated pattern functions on an `x` grid.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::pattern::{check_s, pattern_function, trig_sign, u_limit};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::special::{composite_gauss_legendre, laguerre_functions_into, ln_factorials};

/// Largest table order accepted for `s < 0`.
pub const MAX_ORDER_LOSSY: usize = 64;
/// Largest table order accepted for `s = 0`.
pub const MAX_ORDER_IDEAL: usize = 400;

/// Gauss-Legendre order per panel of the `u` rule.
const RULE_ORDER: usize = 24;
/// Order of the refined rule used for the self-check.
const CHECK_ORDER: usize = 32;

/// Lookup scheme between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    Linear,
    #[default]
    CubicHermite,
}

/// Index of the unordered pair `{n, m}`.
#[inline]
pub fn pair_index(n: usize, m: usize) -> usize {
    let (hi, lo) = (n.max(m), n.min(m));
    hi * (hi + 1) / 2 + lo
}

/// Number of unordered pairs with entries `<= n_max`.
#[inline]
pub fn pair_count(n_max: usize) -> usize {
    (n_max + 1) * (n_max + 2) / 2
}

/// Largest admissible order for a given `s`.
pub fn max_order<T: Real>(s: T) -> usize {
    if s < T::zero() {
        MAX_ORDER_LOSSY
    } else {
        MAX_ORDER_IDEAL
    }
}

pub(crate) fn check_order<T: Real>(n_max: usize, s: T) -> Result<()> {
    let cap = max_order(s);
    if n_max > cap {
        return Err(Error::TruncationInsufficient {
            what: "kernel order above the supported maximum",
            required: n_max as f64,
            available: cap as f64,
        });
    }
    Ok(())
}

/// Sorted sample points with a fast path for uniform spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct XGrid<T> {
    points: Vec<T>,
    uniform: Option<(T, T)>,
}

impl<T: Real> XGrid<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("x grid must be finite".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("x grid must be strictly increasing".into()));
        }
        let uniform = if points.len() >= 2 {
            let step = (points[points.len() - 1] - points[0]) / T::of(points.len() - 1);
            let tol = step * T::lit(1e-9);
            points
                .iter()
                .enumerate()
                .all(|(i, &x)| (x - (points[0] + step * T::of(i))).abs() <= tol)
                .then_some((points[0], step))
        } else {
            None
        };
        Ok(Self { points, uniform })
    }

    /// `count` points spaced `step` apart, starting at `start`.
    pub fn uniform(start: T, step: T, count: usize) -> Result<Self> {
        Self::new((0..count).map(|i| start + step * T::of(i)).collect())
    }

    /// Spacing 0.05 on `[-10, 10]`.
    pub fn standard() -> Self {
        Self::uniform(T::lit(-10.0), T::lit(0.05), 401).expect("valid default grid")
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.points[0] && x <= self.points[self.points.len() - 1]
    }

    pub fn abs_max(&self) -> T {
        self.points[0].abs().max(self.points[self.points.len() - 1].abs())
    }

    /// Interval index `i` and local coordinate `t` with `x = x_i + t (x_{i+1} - x_i)`.
    pub(crate) fn locate(&self, x: T) -> Option<(usize, T, T)> {
        if !self.contains(x) {
            return None;
        }
        let n = self.points.len();
        if n == 1 {
            return Some((0, T::zero(), T::zero()));
        }
        let i = match self.uniform {
            Some((x0, step)) => ((x - x0) / step).floor().to_usize().unwrap_or(0),
            None => self.points.partition_point(|p| *p <= x).saturating_sub(1),
        }
        .min(n - 2);
        let h = self.points[i + 1] - self.points[i];
        Some((i, ((x - self.points[i]) / h).max(T::zero()).min(T::one()), h))
    }
}

/// Weights applied to `(v_i, v_{i+1}, d_i, d_{i+1})` at a located point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil<T> {
    pub i: usize,
    pub w: [T; 4],
}

impl<T: Real> Stencil<T> {
    pub fn new(grid: &XGrid<T>, x: T, mode: Interpolation) -> Option<Self> {
        let (i, t, h) = grid.locate(x)?;
        if grid.len() == 1 {
            return Some(Self {
                i,
                w: [T::one(), T::zero(), T::zero(), T::zero()],
            });
        }
        let w = match mode {
            Interpolation::Linear => [T::one() - t, t, T::zero(), T::zero()],
            Interpolation::CubicHermite => {
                let (t2, t3) = (t * t, t * t * t);
                let two = T::lit(2.0);
                let three = T::lit(3.0);
                [
                    two * t3 - three * t2 + T::one(),
                    -two * t3 + three * t2,
                    (t3 - two * t2 + t) * h,
                    (t3 - t2) * h,
                ]
            }
        };
        Some(Self { i, w })
    }

    #[inline]
    pub fn apply(&self, values: &[T], slopes: &[T]) -> T {
        let i = self.i;
        if values.len() == 1 {
            return values[0];
        }
        self.w[0] * values[i] + self.w[1] * values[i + 1] + self.w[2] * slopes[i] + self.w[3] * slopes[i + 1]
    }
}

/// Composite Gauss-Legendre rule in `u` adapted to the highest order and the
/// largest `|x|` to be resolved.
#[derive(Debug, Clone)]
pub(crate) struct URule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> URule<T> {
    pub fn new(n_max: usize, s: T, x_abs_max: T, order: usize) -> Self {
        let upper = u_limit(n_max, s);
        let k_max = T::SQRT_2() * x_abs_max + T::lit(2.0) * T::of(n_max + 1).sqrt() + T::lit(2.0);
        let width = T::lit(0.5).min(T::lit(16.0) / k_max);
        let panels = (upper / width).ceil().to_usize().unwrap_or(1).max(1);
        let (nodes, weights) = composite_gauss_legendre(T::zero(), upper, panels, order);
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// `(cos, sin)` of `sqrt(2) u_j x_i`, shape `nodes x xs`.
    pub fn trig(&self, xs: &[T]) -> (Array2<T>, Array2<T>) {
        let mut c = Array2::zeros((self.len(), xs.len()));
        let mut sn = Array2::zeros((self.len(), xs.len()));
        for (j, &u) in self.nodes.iter().enumerate() {
            let k = T::SQRT_2() * u;
            for (i, &x) in xs.iter().enumerate() {
                let (sv, cv) = (k * x).sin_cos();
                c[[j, i]] = cv;
                sn[[j, i]] = sv;
            }
        }
        (c, sn)
    }

    /// Rows `m = 0..count` of `w_j u_j e^{-s u_j^2/2} l_m^(d)(u_j^2)`.
    pub fn laguerre_block(&self, d: usize, count: usize, s: T, ln_fact: &[T]) -> Array2<T> {
        let mut a = Array2::zeros((count, self.len()));
        let mut ell = vec![T::zero(); count];
        for (j, (&u, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            laguerre_functions_into(d, u * u, ln_fact, &mut ell);
            let scale = w * u * (-s * u * u / T::lit(2.0)).exp();
            for m in 0..count {
                a[[m, j]] = scale * ell[m];
            }
        }
        a
    }

    /// Copy of `a` with column `j` multiplied by `sqrt(2) u_j` (the `x`-derivative factor).
    pub fn derivative_weighted(&self, a: &Array2<T>) -> Array2<T> {
        let mut out = a.clone();
        for (j, &u) in self.nodes.iter().enumerate() {
            let k = T::SQRT_2() * u;
            out.column_mut(j).mapv_inplace(|v| v * k);
        }
        out
    }
}

/// `c = alpha * a * b`.
pub(crate) fn gemm<T: Real>(alpha: T, a: ArrayView2<T>, b: ArrayView2<T>) -> Array2<T> {
    let mut c = Array2::zeros((a.nrows(), b.ncols()));
    general_mat_mul(alpha, &a, &b, T::zero(), &mut c);
    c
}

/// For diagonal offset `d`, values and `x`-derivatives of `f_{m+d,m}` for
/// `m = 0..count`, each of shape `count x xs`.
pub(crate) fn offset_block<T: Real>(
    rule: &URule<T>,
    cos: &Array2<T>,
    sin: &Array2<T>,
    d: usize,
    count: usize,
    s: T,
    ln_fact: &[T],
) -> (Array2<T>, Array2<T>) {
    let a = rule.laguerre_block(d, count, s, ln_fact);
    let ad = rule.derivative_weighted(&a);
    let pref = T::lit(2.0) / T::PI() * trig_sign::<T>(d);
    if d.is_multiple_of(2) {
        (gemm(pref, a.view(), cos.view()), gemm(-pref, ad.view(), sin.view()))
    } else {
        (gemm(pref, a.view(), sin.view()), gemm(pref, ad.view(), cos.view()))
    }
}

/// Growth model `|f_nm| <= sup e^{growth (n + m)}` measured on a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelBound<T> {
    pub sup: T,
    pub growth: T,
}

/// Pattern functions `f_nm(x; s)` for every unordered pair `n >= m` up to
/// `n_max`, stored pair-major with `x`-derivatives for Hermite lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable<T> {
    n_max: usize,
    s: T,
    grid: XGrid<T>,
    values: Vec<T>,
    slopes: Vec<T>,
    interpolation: Interpolation,
}

/// Tabulates `f_nm(x; s)` for `0 <= m <= n <= n_max` on `x_grid`.
///
/// The `u` integral is done with a composite Gauss-Legendre rule shared by all
/// pairs of one diagonal offset, so each offset costs one matrix product. A
/// few grid columns are recomputed with a finer rule and the build fails with
/// `QuadratureNotConverged` if they disagree beyond `1e-8`.
pub fn build_kernel_table<T: Real>(n_max: usize, x_grid: &[T], s: T) -> Result<KernelTable<T>> {
    check_s(s)?;
    check_order(n_max, s)?;
    let grid = XGrid::new(x_grid.to_vec())?;
    let xs = grid.points();
    let nx = xs.len();
    let lf = ln_factorials::<T>(n_max);
    let rule = URule::new(n_max, s, grid.abs_max(), RULE_ORDER);
    let (cos, sin) = rule.trig(xs);

    let blocks: Vec<(Array2<T>, Array2<T>)> = (0..=n_max)
        .into_par_iter()
        .map(|d| offset_block(&rule, &cos, &sin, d, n_max + 1 - d, s, &lf))
        .collect();

    let mut values = vec![T::zero(); pair_count(n_max) * nx];
    let mut slopes = vec![T::zero(); pair_count(n_max) * nx];
    for (d, (v, dv)) in blocks.iter().enumerate() {
        for m in 0..=n_max - d {
            let off = pair_index(m + d, m) * nx;
            for i in 0..nx {
                values[off + i] = v[[m, i]];
                slopes[off + i] = dv[[m, i]];
            }
        }
    }

    let table = KernelTable {
        n_max,
        s,
        grid,
        values,
        slopes,
        interpolation: Interpolation::default(),
    };
    table.self_check(&lf)?;
    Ok(table)
}

impl<T: Real> KernelTable<T> {
    /// Recomputes a strided subset of columns with a finer rule.
    fn self_check(&self, lf: &[T]) -> Result<()> {
        let nx = self.grid.len();
        let stride = (nx / 6).max(1);
        let cols: Vec<usize> = (0..nx).step_by(stride).chain(std::iter::once(nx - 1)).collect();
        let xs: Vec<T> = cols.iter().map(|&i| self.grid.points()[i]).collect();
        let rule = URule::new(self.n_max, self.s, self.grid.abs_max(), CHECK_ORDER);
        let (cos, sin) = rule.trig(&xs);
        for d in 0..=self.n_max {
            let (v, _) = offset_block(&rule, &cos, &sin, d, self.n_max + 1 - d, self.s, lf);
            for m in 0..=self.n_max - d {
                let row = self.row(m + d, m);
                let scale = row.iter().fold(T::zero(), |a, b| a.max(b.abs()));
                let tol = T::lit(1e-8) + T::lit(1e-12) * scale;
                for (c, &i) in cols.iter().enumerate() {
                    let diff = (v[[m, c]] - row[i]).abs();
                    if !(diff <= tol) {
                        return Err(Error::QuadratureNotConverged(format!(
                            "table entry f_{}{} at x = {} changes by {:e} under rule refinement",
                            m + d,
                            m,
                            self.grid.points()[i],
                            diff.as_f64()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Reassembles a table from stored parts (used by the cache reader).
    pub fn from_parts(n_max: usize, s: T, x_grid: Vec<T>, values: Vec<T>, slopes: Vec<T>) -> Result<Self> {
        check_s(s)?;
        let grid = XGrid::new(x_grid)?;
        let want = pair_count(n_max) * grid.len();
        if values.len() != want || slopes.len() != want {
            return Err(Error::Format(format!(
                "kernel table needs {want} values and slopes, got {} and {}",
                values.len(),
                slopes.len()
            )));
        }
        Ok(Self {
            n_max,
            s,
            grid,
            values,
            slopes,
            interpolation: Interpolation::default(),
        })
    }

    pub fn with_interpolation(mut self, mode: Interpolation) -> Self {
        self.interpolation = mode;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn s(&self) -> T {
        self.s
    }

    pub fn grid(&self) -> &XGrid<T> {
        &self.grid
    }

    pub fn x_grid(&self) -> &[T] {
        self.grid.points()
    }

    pub fn pair_count(&self) -> usize {
        pair_count(self.n_max)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn slopes(&self) -> &[T] {
        &self.slopes
    }

    /// `f_nm` at every grid point.
    pub fn row(&self, n: usize, m: usize) -> &[T] {
        let nx = self.grid.len();
        let off = pair_index(n, m) * nx;
        &self.values[off..off + nx]
    }

    /// `d f_nm / dx` at every grid point.
    pub fn slope_row(&self, n: usize, m: usize) -> &[T] {
        let nx = self.grid.len();
        let off = pair_index(n, m) * nx;
        &self.slopes[off..off + nx]
    }

    pub fn get(&self, n: usize, m: usize, i: usize) -> T {
        self.row(n, m)[i]
    }

    fn check_pair(&self, n: usize, m: usize) -> Result<()> {
        let hi = n.max(m);
        if hi > self.n_max {
            return Err(Error::IndexOutOfRange {
                index: hi,
                len: self.n_max + 1,
            });
        }
        Ok(())
    }

    /// Interpolated `f_nm(x)`; `x` must lie inside the grid.
    pub fn value_at(&self, n: usize, m: usize, x: T) -> Result<T> {
        self.check_pair(n, m)?;
        let st = Stencil::new(&self.grid, x, self.interpolation)
            .ok_or_else(|| Error::InvalidArgument(format!("x = {x} outside the table grid")))?;
        Ok(st.apply(self.row(n, m), self.slope_row(n, m)))
    }

    /// Interpolated value inside the grid, direct evaluation outside it.
    pub fn value_or_compute(&self, n: usize, m: usize, x: T) -> Result<T> {
        self.check_pair(n, m)?;
        match Stencil::new(&self.grid, x, self.interpolation) {
            Some(st) => Ok(st.apply(self.row(n, m), self.slope_row(n, m))),
            None => pattern_function(n, m, x, self.s),
        }
    }

    /// `sup |f_nm|` over all pairs and grid points.
    pub fn sup_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |a, b| a.max(b.abs()))
    }

    fn row_sup(&self, n: usize, m: usize) -> T {
        self.row(n, m).iter().fold(T::zero(), |a, b| a.max(b.abs()))
    }

    /// Fits `ln sup|f_nn|` against `2n` over the upper half of the diagonal
    /// and bounds every pair by the resulting exponential envelope.
    pub fn bound(&self) -> KernelBound<T> {
        let lo = self.n_max / 2;
        let pts: Vec<(T, T)> = (lo..=self.n_max)
            .map(|n| (T::of(2 * n), self.row_sup(n, n).max(T::min_positive_value()).ln()))
            .collect();
        let growth = if pts.len() >= 2 {
            let k = T::of(pts.len());
            let mx = pts.iter().map(|p| p.0).sum::<T>() / k;
            let my = pts.iter().map(|p| p.1).sum::<T>() / k;
            let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            (sxy / sxx).max(T::zero())
        } else {
            T::zero()
        };
        let mut sup = T::zero();
        for n in 0..=self.n_max {
            for m in 0..=n {
                sup = sup.max(self.row_sup(n, m) * (-growth * T::of(n + m)).exp());
            }
        }
        KernelBound { sup, growth }
    }
}

/// Order of the probe table used to measure [`KernelBound`].
pub const PROBE_ORDER: usize = 24;

/// Measures the growth model of `f_nm(x; s)` on `x_grid` from a small table.
pub fn probe_bound<T: Real>(s: T, x_grid: &[T]) -> Result<KernelBound<T>> {
    Ok(build_kernel_table(PROBE_ORDER, x_grid, s)?.bound())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::pattern::pattern_function_quadrature;
    use approx::assert_abs_diff_eq;

    #[test]
    fn degenerate_table() {
        let t = build_kernel_table(0, &[0.0], 0.0).unwrap();
        assert_eq!(t.pair_count(), 1);
        assert_abs_diff_eq!(t.get(0, 0, 0), 2.0 / std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn pair_layout_and_symmetry() {
        let grid: Vec<f64> = (0..101).map(|i| -5.0 + 0.1 * i as f64).collect();
        let t = build_kernel_table(6, &grid, 0.0).unwrap();
        assert_eq!(t.pair_count(), 28);
        assert_eq!(t.values().len(), 28 * 101);
        assert_eq!(t.row(2, 5), t.row(5, 2));
        for (n, m, i) in [(0, 0, 50), (5, 2, 57), (6, 6, 3), (3, 0, 90)] {
            let want = pattern_function_quadrature(n, m, grid[i], 0.0).unwrap();
            assert_abs_diff_eq!(t.get(n, m, i), want, epsilon = 1e-8);
        }
    }

    #[test]
    fn lossy_table_matches_oracle() {
        let grid = [-2.0, -0.3, 0.0, 1.1, 4.0];
        let t = build_kernel_table(8, &grid, -0.25).unwrap();
        for (n, m, i) in [(0, 0, 2), (8, 8, 1), (7, 2, 3), (4, 1, 4)] {
            let want: f64 = pattern_function_quadrature(n, m, grid[i], -0.25).unwrap();
            assert_abs_diff_eq!(t.get(n, m, i), want, epsilon = 1e-8 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(build_kernel_table(2, &[0.0], -1.5), Err(Error::EfficiencyTooLow { .. })));
        assert_eq!(build_kernel_table::<f64>(2, &[], 0.0), Err(Error::EmptyGrid));
        assert!(matches!(build_kernel_table(2, &[1.0, 0.0], 0.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(
            build_kernel_table(65, &[0.0], -0.25),
            Err(Error::TruncationInsufficient { .. })
        ));
    }

    #[test]
    fn interpolation_error_on_standard_grid() {
        let grid = XGrid::<f64>::standard();
        let t = build_kernel_table(4, grid.points(), 0.0).unwrap();
        let linear = t.clone().with_interpolation(Interpolation::Linear);
        let mut worst_cubic = 0.0f64;
        let mut worst_linear = 0.0f64;
        for k in 0..400 {
            let x = -9.99 + 0.0497 * k as f64;
            for (n, m) in [(0, 0), (1, 0), (4, 4), (3, 1)] {
                let want = pattern_function(n, m, x, 0.0).unwrap();
                worst_cubic = worst_cubic.max((t.value_at(n, m, x).unwrap() - want).abs());
                worst_linear = worst_linear.max((linear.value_at(n, m, x).unwrap() - want).abs());
            }
        }
        assert!(worst_cubic < 1e-4, "cubic {worst_cubic}");
        // linear lookup is second order only: f_00'' = O(1) gives ~ h^2/8
        assert!(worst_linear > 1e-4 && worst_linear < 1e-2, "linear {worst_linear}");
    }

    #[test]
    fn growth_rate_separates_ideal_and_lossy() {
        let grid: Vec<f64> = (0..81).map(|i| -4.0 + 0.1 * i as f64).collect();
        let ideal = build_kernel_table(24, &grid, 0.0).unwrap().bound();
        let lossy = build_kernel_table(24, &grid, -0.25).unwrap().bound();
        assert!(ideal.growth < 0.02, "{ideal:?}");
        assert!(lossy.growth > 0.2 && lossy.growth < 0.3, "{lossy:?}");
    }
}

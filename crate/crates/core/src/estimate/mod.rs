//! Direct sampling of CPS distributions and Fock-basis density matrices from
//! homodyne data.

pub mod csv;

use ndarray::Array2;
use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{cps_normalization, cps_overlap_signed, DensityMatrix, PhaseDistribution, PhaseGrid};
use crate::homodyne::HomodyneDataset;
use crate::kernel::{
    build_kernel_table, kernel_truncation, pair_count, pair_index, pattern_function, probe_bound, EpsilonKernel,
    Interpolation, KernelTable, XGrid,
};

/// Events processed per block (bounds the size of the kernel-value matrix).
const BLOCK: usize = 4096;

/// Settings of the direct-sampling estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationConfig {
    pub epsilon: f64,
    pub phi_grid: PhaseGrid<f64>,
    /// Kernel truncation tolerance.
    pub tol: f64,
    /// Rescale the estimate so that it integrates to one on `phi_grid`.
    pub normalize: bool,
    pub x_grid: XGrid<f64>,
    pub interpolation: Interpolation,
}

impl EstimationConfig {
    pub fn new(epsilon: f64, phi_grid: PhaseGrid<f64>) -> Result<Self> {
        let cfg = Self {
            epsilon,
            phi_grid,
            tol: 1e-6,
            normalize: true,
            x_grid: XGrid::standard(),
            interpolation: Interpolation::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::EpsilonNonPositive(self.epsilon));
        }
        if self.phi_grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidArgument(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        Ok(())
    }

    /// Builds the truncated kernel for detection parameter `s`.
    pub fn kernel(&self, s: f64) -> Result<EpsilonKernel<f64>> {
        self.validate()?;
        let bound = probe_bound(s, self.x_grid.points())?;
        let order = kernel_truncation(self.epsilon, self.tol, bound)?;
        Ok(EpsilonKernel::build(self.epsilon, s, order, self.x_grid.points())?.with_interpolation(self.interpolation))
    }
}

/// Running per-column mean and centred second moment (pairwise merge).
#[derive(Debug, Clone)]
struct ColumnStats {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl ColumnStats {
    fn new(cols: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; cols],
            m2: vec![0.0; cols],
        }
    }

    /// Adds the rows of `block` (samples x columns).
    fn push_block(&mut self, block: &Array2<f64>) {
        let nb = block.nrows();
        if nb == 0 {
            return;
        }
        let n_old = self.count as f64;
        let n_new = nb as f64;
        let total = n_old + n_new;
        for (j, col) in block.columns().into_iter().enumerate() {
            let bm = col.sum() / n_new;
            let bm2: f64 = col.iter().map(|v| (v - bm) * (v - bm)).sum();
            let delta = bm - self.mean[j];
            self.mean[j] += delta * n_new / total;
            self.m2[j] += bm2 + delta * delta * n_old * n_new / total;
        }
        self.count += nb;
    }

    /// Variance of the column means (`s^2 / n`, zero for a single sample).
    fn mean_variance(&self) -> Vec<f64> {
        let n = self.count as f64;
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        self.m2.iter().map(|m2| m2 / (n - 1.0) / n).collect()
    }
}

fn check_dataset_s(ds: &HomodyneDataset, s: f64) -> Result<()> {
    if (ds.s() - s).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "kernel built for s = {s} but dataset has s = {}",
            ds.s()
        )));
    }
    Ok(())
}

/// Direct-sampling estimate of `p(phi, eps)` from a dataset; builds the kernel.
pub fn sample_cps(ds: &HomodyneDataset, config: &EstimationConfig) -> Result<PhaseDistribution<f64>> {
    let kernel = config.kernel(ds.s())?;
    sample_cps_with_kernel(ds, config, &kernel)
}

/// Same as [`sample_cps`] with the kernel collapsed from a pattern-function table.
pub fn sample_cps_with_table(
    ds: &HomodyneDataset,
    config: &EstimationConfig,
    table: &KernelTable<f64>,
) -> Result<PhaseDistribution<f64>> {
    config.validate()?;
    let order = kernel_truncation(config.epsilon, config.tol, table.bound())?;
    let kernel = EpsilonKernel::from_table(table, config.epsilon, order)?;
    sample_cps_with_kernel(ds, config, &kernel)
}

/// `p~(phi) = (pi / n_phases) sum_k mean_j K_eps(phi, x_kj, phi'_k)`, with the
/// event-level standard error; normalized on the grid if requested.
pub fn sample_cps_with_kernel(
    ds: &HomodyneDataset,
    config: &EstimationConfig,
    kernel: &EpsilonKernel<f64>,
) -> Result<PhaseDistribution<f64>> {
    config.validate()?;
    check_dataset_s(ds, kernel.s())?;
    if (kernel.epsilon() - config.epsilon).abs() > 0.0 {
        return Err(Error::InvalidArgument("kernel epsilon differs from the configured epsilon".into()));
    }
    let order = kernel.order();
    let phis = config.phi_grid.values();
    let pref = kernel.prefactor();

    let per_phase: Vec<(Vec<f64>, Vec<f64>)> = (0..ds.n_phases())
        .into_par_iter()
        .map(|k| {
            let lo = ds.phases()[k];
            // (order + 1) x grid: weight_d cos(d (phi + phi'))
            let mut cosm = Array2::<f64>::zeros((order + 1, phis.len()));
            for (g, &phi) in phis.iter().enumerate() {
                let sg = phi + lo;
                for d in 0..=order {
                    let w = if d == 0 { pref } else { 2.0 * pref };
                    cosm[[d, g]] = w * (d as f64 * sg).cos();
                }
            }
            let xs = ds.x_values(k);
            let mut stats = ColumnStats::new(phis.len());
            let mut h = vec![0.0; order + 1];
            for chunk in xs.chunks(BLOCK) {
                let mut hm = Array2::<f64>::zeros((chunk.len(), order + 1));
                for (r, &x) in chunk.iter().enumerate() {
                    kernel.harmonics_into(x, &mut h);
                    hm.row_mut(r).iter_mut().zip(&h).for_each(|(a, b)| *a = *b);
                }
                stats.push_block(&hm.dot(&cosm));
            }
            (stats.mean.clone(), stats.mean_variance())
        })
        .collect();

    let weight = std::f64::consts::PI / ds.n_phases() as f64;
    let mut raw = vec![0.0; phis.len()];
    let mut var = vec![0.0; phis.len()];
    for (mean, v) in &per_phase {
        for g in 0..phis.len() {
            raw[g] += weight * mean[g];
            var[g] += weight * weight * v[g];
        }
    }
    let scale = if config.normalize {
        let z = config.phi_grid.integrate(&raw);
        if !(z > 0.0) {
            return Err(Error::DegenerateNormalization(z));
        }
        1.0 / z
    } else {
        1.0
    };
    Ok(PhaseDistribution {
        grid: config.phi_grid.clone(),
        values: raw.iter().map(|v| v * scale).collect(),
        stderr: Some(var.iter().map(|v| v.sqrt() * scale).collect()),
        epsilon: config.epsilon,
    })
}

/// Sampled density matrix with per-element standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub n_max: usize,
    /// Row-major `(n_max + 1)^2`, Hermitian.
    pub rho_hat: Vec<Complex<f64>>,
    pub stderr: Vec<f64>,
}

impl DensityEstimate {
    pub fn get(&self, n: usize, m: usize) -> Complex<f64> {
        self.rho_hat[n * (self.n_max + 1) + m]
    }

    pub fn stderr(&self, n: usize, m: usize) -> f64 {
        self.stderr[n * (self.n_max + 1) + m]
    }

    pub fn to_density_matrix(&self) -> Result<DensityMatrix<f64>> {
        DensityMatrix::hermitian_closure(self.n_max, self.rho_hat.clone())
    }
}

/// `rho_nm = (pi / n_phases) sum_k mean_j e^{-i(n-m) phi'_k} f_nm(x_kj; s)` on the standard grid.
pub fn estimate_density(ds: &HomodyneDataset, n_max: usize) -> Result<DensityEstimate> {
    let table = build_kernel_table(n_max, XGrid::standard().points(), ds.s())?;
    estimate_density_with_table(ds, &table)
}

/// Density estimate up to the table order.
pub fn estimate_density_with_table(ds: &HomodyneDataset, table: &KernelTable<f64>) -> Result<DensityEstimate> {
    check_dataset_s(ds, table.s())?;
    let n_max = table.n_max();
    let pairs = pair_count(n_max);
    let per_phase: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..ds.n_phases())
        .into_par_iter()
        .map(|k| {
            let xs = ds.x_values(k);
            let mut stats = ColumnStats::new(pairs);
            for chunk in xs.chunks(BLOCK) {
                let mut block = Array2::<f64>::zeros((chunk.len(), pairs));
                for (r, &x) in chunk.iter().enumerate() {
                    let mut row = block.row_mut(r);
                    if table.grid().contains(x) {
                        for n in 0..=n_max {
                            for m in 0..=n {
                                row[pair_index(n, m)] = table.value_at(n, m, x)?;
                            }
                        }
                    } else {
                        for n in 0..=n_max {
                            for m in 0..=n {
                                row[pair_index(n, m)] = pattern_function(n, m, x, table.s())?;
                            }
                        }
                    }
                }
                stats.push_block(&block);
            }
            Ok((stats.mean.clone(), stats.mean_variance()))
        })
        .collect();

    let dim = n_max + 1;
    let weight = std::f64::consts::PI / ds.n_phases() as f64;
    let mut rho = vec![Complex::new(0.0, 0.0); dim * dim];
    let mut var = vec![0.0; dim * dim];
    for (k, res) in per_phase.into_iter().enumerate() {
        let (mean, v) = res?;
        let lo = ds.phases()[k];
        for n in 0..dim {
            for m in 0..=n {
                let p = pair_index(n, m);
                let phase = Complex::from_polar(1.0, -((n - m) as f64) * lo);
                rho[n * dim + m] += phase * (weight * mean[p]);
                var[n * dim + m] += weight * weight * v[p];
            }
        }
    }
    // stored lower triangle -> upper triangle, then Hermitian closure
    for n in 0..dim {
        for m in 0..n {
            rho[m * dim + n] = rho[n * dim + m].conj();
            var[m * dim + n] = var[n * dim + m];
        }
    }
    let closed = DensityMatrix::hermitian_closure(n_max, rho)?;
    Ok(DensityEstimate {
        n_max,
        rho_hat: closed.as_slice().to_vec(),
        stderr: var.iter().map(|v| v.sqrt()).collect(),
    })
}

/// CPS distribution of an estimated density matrix (two-step route).
///
/// The standard error propagates the element errors as if the unordered
/// pairs were independent; covariances between elements are ignored.
pub fn cps_from_density(est: &DensityEstimate, epsilon: f64, grid: &PhaseGrid<f64>) -> Result<PhaseDistribution<f64>> {
    let rho = est.to_density_matrix()?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let norm = cps_normalization(&rho, epsilon)?;
    if !(norm > 0.0) {
        return Err(Error::DegenerateNormalization(norm));
    }
    let values = grid
        .values()
        .iter()
        .map(|&phi| cps_overlap_signed(&rho, phi, epsilon).map(|v| v / norm))
        .collect::<Result<Vec<_>>>()?;
    let pref = -(-2.0 * epsilon).exp_m1();
    let dim = est.n_max + 1;
    let mut var = 0.0;
    for n in 0..dim {
        for m in 0..=n {
            let w = (-epsilon * (n + m) as f64).exp() * est.stderr(n, m);
            var += if n == m { w * w } else { 4.0 * w * w };
        }
    }
    let se = pref * var.sqrt() / norm;
    Ok(PhaseDistribution {
        grid: grid.clone(),
        values,
        stderr: Some(vec![se; grid.len()]),
        epsilon,
    })
}

/// Distances between two distributions on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub sup_distance: f64,
    pub integrated_abs_distance: f64,
    /// `(a - b) / sqrt(se_a^2 + se_b^2)`; zero where both agree exactly and no
    /// error bars exist, infinite where they differ without error bars.
    pub z_scores: Vec<f64>,
}

impl CompareReport {
    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().fold(0.0, |a, z| a.max(z.abs()))
    }

    /// Fraction of points with `|z| > threshold`.
    pub fn fraction_above(&self, threshold: f64) -> f64 {
        self.z_scores.iter().filter(|z| z.abs() > threshold).count() as f64 / self.z_scores.len() as f64
    }
}

pub fn compare(a: &PhaseDistribution<f64>, b: &PhaseDistribution<f64>) -> Result<CompareReport> {
    let (ga, gb) = (a.grid.values(), b.grid.values());
    if ga.len() != gb.len() || ga.iter().zip(gb).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::GridMismatch);
    }
    let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    let abs: Vec<f64> = diff.iter().map(|d| d.abs()).collect();
    let se = |d: &PhaseDistribution<f64>, i: usize| d.stderr.as_ref().map_or(0.0, |s| s[i]);
    let z_scores = diff
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let comb = (se(a, i).powi(2) + se(b, i).powi(2)).sqrt();
            if comb > 0.0 {
                d / comb
            } else if *d == 0.0 {
                0.0
            } else {
                d.signum() * f64::INFINITY
            }
        })
        .collect();
    Ok(CompareReport {
        sup_distance: abs.iter().fold(0.0, |m, v| m.max(*v)),
        integrated_abs_distance: a.grid.integrate(&abs),
        z_scores,
    })
}

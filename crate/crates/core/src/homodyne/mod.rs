//! Monte Carlo balanced homodyne detection.
//!
//! Each LO phase gets its own ChaCha20 stream (`seed`, stream = phase index),
//! so datasets are bit-identical regardless of how phases are scheduled.

pub mod format;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{quadrature_pdf_x, DensityMatrix, GaussianParams, DEFAULT_F_ABS};
use crate::kernel::s_from_eta;

/// Generator recorded in dataset files.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha 0.3, seed_from_u64, stream = phase index)";
/// Points of the tabulated CDF used for non-Gaussian states.
pub const CDF_POINTS: usize = 4096;
/// Half-width of the tabulated CDF in standard deviations.
pub const CDF_HALF_WIDTH: f64 = 8.0;

/// Phase-tagged quadrature readings `F` (field-strength units).
#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneDataset {
    phases: Vec<f64>,
    events: Vec<Vec<f64>>,
    pub eta: f64,
    pub f_abs: f64,
    pub seed: u64,
    pub rng: String,
    pub state_tag: String,
}

impl HomodyneDataset {
    pub fn new(
        phases: Vec<f64>,
        events: Vec<Vec<f64>>,
        eta: f64,
        f_abs: f64,
        seed: u64,
        rng: impl Into<String>,
        state_tag: impl Into<String>,
    ) -> Result<Self> {
        s_from_eta(eta)?;
        if phases.is_empty() {
            return Err(Error::InvalidArgument("dataset needs at least one phase".into()));
        }
        if phases.len() != events.len() {
            return Err(Error::InvalidArgument(format!(
                "{} phases but {} event lists",
                phases.len(),
                events.len()
            )));
        }
        if phases.iter().any(|p| !(*p >= 0.0 && *p < std::f64::consts::PI)) {
            return Err(Error::InvalidArgument("LO phases must lie in [0, pi)".into()));
        }
        if phases.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("LO phases must be strictly increasing".into()));
        }
        if let Some(k) = events.iter().position(|e| e.is_empty()) {
            return Err(Error::InvalidArgument(format!("phase {k} has no events")));
        }
        if events.iter().flatten().any(|f| !f.is_finite()) {
            return Err(Error::InvalidArgument("events must be finite".into()));
        }
        if !(f_abs > 0.0 && f_abs.is_finite()) {
            return Err(Error::InvalidArgument(format!("|F| must be positive, got {f_abs}")));
        }
        Ok(Self {
            phases,
            events,
            eta,
            f_abs,
            seed,
            rng: rng.into(),
            state_tag: state_tag.into(),
        })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn n_phases(&self) -> usize {
        self.phases.len()
    }

    pub fn events(&self, phase_index: usize) -> &[f64] {
        &self.events[phase_index]
    }

    pub fn event_counts(&self) -> Vec<usize> {
        self.events.iter().map(Vec::len).collect()
    }

    pub fn total_events(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    /// `s = 1 - 1/eta`.
    pub fn s(&self) -> f64 {
        1.0 - 1.0 / self.eta
    }

    /// Readings converted to `x = F / (sqrt(2) |F|)`.
    pub fn x_values(&self, phase_index: usize) -> Vec<f64> {
        let scale = 1.0 / (std::f64::consts::SQRT_2 * self.f_abs);
        self.events[phase_index].iter().map(|f| f * scale).collect()
    }
}

/// Simulation settings beyond the required arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    pub f_abs: f64,
    pub state_tag: String,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            f_abs: DEFAULT_F_ABS,
            state_tag: String::new(),
        }
    }
}

/// Midpoint LO phases `(k + 1/2) pi / n`.
pub fn midpoint_phases(n_phases: usize) -> Vec<f64> {
    (0..n_phases)
        .map(|k| (k as f64 + 0.5) * std::f64::consts::PI / n_phases as f64)
        .collect()
}

/// Simulates `events_per_phase` readings at each of `n_phases` midpoint LO
/// phases with detection efficiency `eta`.
pub fn simulate(
    rho: &DensityMatrix<f64>,
    n_phases: usize,
    events_per_phase: usize,
    eta: f64,
    seed: u64,
) -> Result<HomodyneDataset> {
    simulate_with(rho, n_phases, events_per_phase, eta, seed, &SimulationOptions::default())
}

pub fn simulate_with(
    rho: &DensityMatrix<f64>,
    n_phases: usize,
    events_per_phase: usize,
    eta: f64,
    seed: u64,
    options: &SimulationOptions,
) -> Result<HomodyneDataset> {
    let s = s_from_eta(eta)?;
    if n_phases == 0 || events_per_phase == 0 {
        return Err(Error::InvalidArgument("need at least one phase and one event per phase".into()));
    }
    let phases = midpoint_phases(n_phases);
    let noise_sd = (-s / 2.0).sqrt();
    let to_field = std::f64::consts::SQRT_2 * options.f_abs;
    let events = phases
        .par_iter()
        .enumerate()
        .map(|(k, &phase)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let sampler = Sampler::new(rho, rho.gaussian(), phase)?;
            Ok((0..events_per_phase)
                .map(|_| {
                    let mut x = sampler.draw(&mut rng);
                    if noise_sd > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        x += noise_sd * z;
                    }
                    x * to_field
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    HomodyneDataset::new(phases, events, eta, options.f_abs, seed, RNG_NAME, options.state_tag.clone())
}

/// Ideal (`s = 0`) quadrature sampler at one LO phase.
enum Sampler {
    Normal { mean: f64, sd: f64 },
    Table { xs: Vec<f64>, cdf: Vec<f64> },
}

impl Sampler {
    fn new(rho: &DensityMatrix<f64>, gaussian: Option<&GaussianParams<f64>>, phase: f64) -> Result<Self> {
        if let Some(g) = gaussian {
            let (mean, var) = g.quadrature_moments(phase);
            return Ok(Sampler::Normal { mean, sd: var.sqrt() });
        }
        let (mean, var) = rho.quadrature_moments(phase);
        let (xs, cdf) = tabulated_cdf(|x| quadrature_pdf_x(rho, x, phase), mean, var.max(1e-12).sqrt())?;
        Ok(Sampler::Table { xs, cdf })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Sampler::Table { xs, cdf } => invert_cdf(xs, cdf, rng.gen::<f64>()),
        }
    }
}

/// Trapezoidal CDF of `pdf` on `CDF_POINTS` points over `mean +- 8 sd`;
/// fails unless the tabulated mass is within `1e-6` of one.
pub fn tabulated_cdf(pdf: impl Fn(f64) -> f64, mean: f64, sd: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = (mean - CDF_HALF_WIDTH * sd, mean + CDF_HALF_WIDTH * sd);
    let step = (hi - lo) / (CDF_POINTS - 1) as f64;
    let xs: Vec<f64> = (0..CDF_POINTS).map(|i| lo + step * i as f64).collect();
    let ps: Vec<f64> = xs.iter().map(|&x| pdf(x).max(0.0)).collect();
    let mut cdf = Vec::with_capacity(CDF_POINTS);
    cdf.push(0.0);
    for i in 1..CDF_POINTS {
        cdf.push(cdf[i - 1] + 0.5 * step * (ps[i - 1] + ps[i]));
    }
    let total = cdf[CDF_POINTS - 1];
    if !((total - 1.0).abs() < 1e-6) {
        return Err(Error::SamplerNotConverged(format!("tabulated probability mass {total}")));
    }
    for c in cdf.iter_mut() {
        *c /= total;
    }
    Ok((xs, cdf))
}

/// Piecewise-linear inverse of a tabulated CDF.
pub fn invert_cdf(xs: &[f64], cdf: &[f64], u: f64) -> f64 {
    let i = cdf.partition_point(|c| *c <= u).clamp(1, cdf.len() - 1);
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
    xs[i - 1] + t * (xs[i] - xs[i - 1])
}

/// Event counts in uniform bins over one phase's readings.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub phase: f64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_width(&self, i: usize) -> f64 {
        self.bin_edges[i + 1] - self.bin_edges[i]
    }

    /// Sample variance of the bin centres weighted by counts.
    pub fn variance(&self) -> f64 {
        let n = self.total() as f64;
        let centre = |i: usize| 0.5 * (self.bin_edges[i] + self.bin_edges[i + 1]);
        let mean = self.counts.iter().enumerate().map(|(i, c)| centre(i) * *c as f64).sum::<f64>() / n;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, c)| (centre(i) - mean).powi(2) * *c as f64)
            .sum::<f64>()
            / n
    }
}

/// Uniform histogram over `[min, max]` of the readings at `phase_index`.
pub fn histogram(dataset: &HomodyneDataset, phase_index: usize, n_bins: usize) -> Result<Histogram> {
    if phase_index >= dataset.n_phases() {
        return Err(Error::IndexOutOfRange {
            index: phase_index,
            len: dataset.n_phases(),
        });
    }
    if n_bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {n_bins}")));
    }
    let ev = dataset.events(phase_index);
    let (mut lo, mut hi) = ev.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins)
        .map(|i| if i == n_bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0u64; n_bins];
    for &v in ev {
        let i = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram {
        bin_edges,
        counts,
        phase: dataset.phases()[phase_index],
    })
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Standard error of the sample variance estimated from the fourth central moment.
pub fn variance_stderr(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

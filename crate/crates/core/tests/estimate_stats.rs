use std::f64::consts::PI;

use cps_core::estimate::*;
use cps_core::fock::{cps_distribution, pure_to_density, squeezed_vacuum, DensityMatrix, PhaseGrid};
use cps_core::homodyne::{simulate, HomodyneDataset};
use cps_core::kernel::EpsilonKernel;

const SEED: u64 = 20240917;
const EPS: f64 = 0.8;

fn squeezed() -> DensityMatrix<f64> {
    pure_to_density(&squeezed_vacuum(1.0, 64).unwrap())
}

fn setup(s: f64) -> (EstimationConfig, EpsilonKernel<f64>) {
    let cfg = EstimationConfig::new(EPS, PhaseGrid::uniform(60).unwrap()).unwrap();
    let k = cfg.kernel(s).unwrap();
    (cfg, k)
}

fn mean_stderr(d: &cps_core::fock::PhaseDistribution<f64>) -> f64 {
    let se = d.stderr.as_ref().unwrap();
    se.iter().sum::<f64>() / se.len() as f64
}

#[test]
fn stderr_scales_as_inverse_root_events() {
    let rho = squeezed();
    let (cfg, k) = setup(0.0);
    let small = sample_cps_with_kernel(&simulate(&rho, 30, 2_000, 1.0, SEED).unwrap(), &cfg, &k).unwrap();
    let large = sample_cps_with_kernel(&simulate(&rho, 30, 8_000, 1.0, SEED).unwrap(), &cfg, &k).unwrap();
    let ratio = mean_stderr(&small) / mean_stderr(&large);
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "{ratio}");
}

#[test]
fn phase_count_does_not_bias() {
    let rho = squeezed();
    let (cfg, k) = setup(0.0);
    let exact = cps_distribution(&rho, EPS, &cfg.phi_grid).unwrap();
    let coarse = sample_cps_with_kernel(&simulate(&rho, 30, 8_000, 1.0, SEED).unwrap(), &cfg, &k).unwrap();
    let fine = sample_cps_with_kernel(&simulate(&rho, 120, 2_000, 1.0, SEED + 1).unwrap(), &cfg, &k).unwrap();
    for est in [&coarse, &fine] {
        let rep = compare(est, &exact).unwrap();
        assert!(rep.fraction_above(4.0) == 0.0, "max z {}", rep.max_abs_z());
    }
    let rep = compare(&coarse, &fine).unwrap();
    assert!(rep.max_abs_z() < 4.5, "{}", rep.max_abs_z());
}

#[test]
fn direct_and_two_step_routes_agree() {
    let rho = squeezed();
    let (cfg, k) = setup(0.0);
    let ds = simulate(&rho, 30, 10_000, 1.0, SEED).unwrap();
    let direct = sample_cps_with_kernel(&ds, &cfg, &k).unwrap();
    let est = estimate_density(&ds, 10).unwrap();
    let two_step = cps_from_density(&est, EPS, &cfg.phi_grid).unwrap();
    let se = mean_stderr(&direct);
    let rep = compare(&direct, &two_step).unwrap();
    // same events, so the routes differ far less than either differs from the truth
    assert!(rep.sup_distance < 3.0 * se, "{} vs se {se}", rep.sup_distance);
    let est_rho = est.to_density_matrix().unwrap();
    assert!((est_rho.trace() - 1.0).abs() < 0.05);
}

/// Data from the state rotated by `-theta`: events at LO phase `p` are those of
/// the original state at `p - theta`, wrapped into `[0, pi)` with `x -> -x`.
fn rotate_dataset(ds: &HomodyneDataset, theta: f64) -> HomodyneDataset {
    let mut rows: Vec<(f64, Vec<f64>)> = (0..ds.n_phases())
        .map(|k| {
            let p = ds.phases()[k] + theta;
            let turns = (p / PI).floor();
            let sign = if (turns as i64) % 2 == 0 { 1.0 } else { -1.0 };
            (p - turns * PI, ds.events(k).iter().map(|x| sign * x).collect())
        })
        .collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (phases, events) = rows.into_iter().unzip();
    HomodyneDataset::new(phases, events, ds.eta, ds.f_abs, ds.seed, ds.rng.clone(), "rotated").unwrap()
}

#[test]
fn rotation_equivariance() {
    let rho = squeezed();
    let (cfg, k) = setup(0.0);
    let ds = simulate(&rho, 30, 2_000, 1.0, SEED).unwrap();
    let base = sample_cps_with_kernel(&ds, &cfg, &k).unwrap();
    // five grid steps of 2 pi / 60
    let shift = 5;
    let theta = 2.0 * PI * shift as f64 / 60.0;
    let rotated = sample_cps_with_kernel(&rotate_dataset(&ds, theta), &cfg, &k).unwrap();
    for j in 0..60 {
        let want = base.values[(j + shift) % 60];
        assert!((rotated.values[j] - want).abs() < 1e-10, "{j}: {} vs {want}", rotated.values[j]);
    }
    // the analytic distribution shifts the same way
    let exact = cps_distribution(&rho, EPS, &cfg.phi_grid).unwrap();
    let exact_rot = cps_distribution(&rho.rotated(-theta), EPS, &cfg.phi_grid).unwrap();
    for j in 0..60 {
        assert!((exact_rot.values[j] - exact.values[(j + shift) % 60]).abs() < 1e-10);
    }
}

#[test]
fn lossy_data_estimate_is_unbiased() {
    let rho = squeezed();
    let (cfg, k) = setup(-0.25);
    let ds = simulate(&rho, 30, 10_000, 0.8, SEED).unwrap();
    let est = sample_cps_with_kernel(&ds, &cfg, &k).unwrap();
    let exact = cps_distribution(&rho, EPS, &cfg.phi_grid).unwrap();
    let rep = compare(&est, &exact).unwrap();
    assert!(rep.fraction_above(4.0) == 0.0, "max z {}", rep.max_abs_z());
    // mismatched detection parameter is rejected
    let (_, ideal_kernel) = setup(0.0);
    assert!(sample_cps_with_kernel(&ds, &cfg, &ideal_kernel).is_err());
}

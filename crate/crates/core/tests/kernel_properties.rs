use std::f64::consts::PI;

use cps_core::fock::{cps_distribution, pure_to_density, squeezed_vacuum, PhaseGrid};
use cps_core::kernel::*;
use cps_core::Error;
use proptest::prelude::*;

const SAMPLE_X: [f64; 5] = [-3.0, -1.0, 0.0, 0.4, 2.7];

fn field_grid() -> Vec<f64> {
    (0..=120).map(|i| -6.0 + 0.1 * i as f64).collect()
}

#[test]
fn fast_path_matches_oracle() {
    let mut worst = 0.0f64;
    for &x in &SAMPLE_X {
        let fast = pattern_matrix_fast(10, x);
        for n in 0..=10 {
            for m in 0..=n {
                let oracle = pattern_function_quadrature(n, m, x, 0.0).unwrap();
                worst = worst.max((fast[n * 11 + m] - oracle).abs());
                assert_eq!(pattern_function_fast(n, m, x), pattern_function_fast(m, n, x));
            }
        }
    }
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn pattern_functions_are_symmetric() {
    for &x in &SAMPLE_X {
        for n in 0..=10 {
            for m in 0..n {
                let a = pattern_function(n, m, x, 0.0).unwrap();
                let b = pattern_function(m, n, x, 0.0).unwrap();
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
    let a = pattern_function(2, 5, 0.7f64, -0.25).unwrap();
    let b = pattern_function(5, 2, 0.7, -0.25).unwrap();
    assert!((a - b).abs() < 1e-10);
}

/// Least-squares slope of `ln|f_nm|` against `ln x` on `[6, 12]`.
fn tail_slope(n: usize, m: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (0..=12)
        .map(|i| {
            let x = 6.0 + 0.5 * i as f64;
            (x.ln(), pattern_function(n, m, x, 0.0).unwrap().abs().ln())
        })
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn power_law_tails() {
    for (n, m) in [(0, 1), (0, 2), (1, 3)] {
        let want = -((n as f64 - m as f64).abs() + 2.0);
        let slope = tail_slope(n, m);
        assert!((slope - want).abs() <= 0.1 * want.abs(), "({n},{m}): {slope}");
    }
    // |f_01(8)| <= C 8^-3 with C fitted on [6, 12]
    let c = (6..=12)
        .map(|x| pattern_function(0, 1, x as f64, 0.0).unwrap().abs() * (x as f64).powi(3))
        .fold(0.0, f64::max);
    assert!(pattern_function(0, 1, 8.0f64, 0.0).unwrap().abs() <= c * 8f64.powi(-3) + 1e-15);
}

#[test]
fn truncation_doubling_is_stable() {
    let grid = field_grid();
    let bound = probe_bound(0.0, XGrid::<f64>::standard().points()).unwrap();
    let sigmas: Vec<f64> = (0..64).map(|k| 2.0 * PI * k as f64 / 64.0).collect();
    for eps in [0.1, 0.3] {
        let n = kernel_truncation(eps, 1e-6, bound).unwrap();
        let k1 = EpsilonKernel::build(eps, 0.0, n, &grid).unwrap();
        let k2 = EpsilonKernel::build(eps, 0.0, (2 * n).min(MAX_ORDER_IDEAL), &grid).unwrap();
        let mut worst = 0.0f64;
        for &x in &grid {
            for &sg in &sigmas {
                worst = worst.max((k1.eval(x, sg) - k2.eval(x, sg)).abs());
            }
        }
        assert!(worst < 1e-5, "eps {eps}: {worst}");
        let (s1, s2) = (k1.sup_abs(&sigmas), k2.sup_abs(&sigmas));
        assert!(s1.is_finite() && (s1 - s2).abs() < 1e-5);
    }
}

#[test]
fn smooth_kernel_at_large_smoothing() {
    // eps = 0.8: no structure finer than the oscillator scale
    let grid = field_grid();
    let k = EpsilonKernel::build(0.8, 0.0, 20, &grid).unwrap();
    let h = 0.05;
    let mut max_curv = 0.0f64;
    for i in 1..240 {
        let x = -6.0 + h * i as f64;
        for sg in [0.0, 1.0, 2.0, PI] {
            let c = (k.eval(x + h, sg) - 2.0 * k.eval(x, sg) + k.eval(x - h, sg)) / (h * h);
            max_curv = max_curv.max(c.abs());
        }
    }
    assert!(max_curv < 10.0, "{max_curv}");
}

#[test]
fn lossy_kernel_limits() {
    let grid = XGrid::<f64>::standard();
    let bound = probe_bound(-0.25, grid.points()).unwrap();
    assert!(matches!(kernel_truncation(0.1, 1e-6, bound), Err(Error::KernelDivergent { .. })));
    let n = kernel_truncation(0.8, 1e-6, bound).unwrap();
    assert!(n <= MAX_ORDER_LOSSY);
    let k = EpsilonKernel::build(0.8, -0.25, n, &field_grid()).unwrap();
    assert!(k.sup_abs(&[0.0, 1.0, PI]).is_finite());
    let n03 = kernel_truncation(0.3, 1e-6, bound).unwrap();
    assert!(matches!(
        EpsilonKernel::build(0.3, -0.25, n03, &field_grid()),
        Err(Error::TruncationInsufficient { .. })
    ));
}

#[test]
fn reconstruction_identity_moderate_smoothing() {
    let rho = pure_to_density(&squeezed_vacuum(1.0, 64).unwrap());
    let grid = PhaseGrid::uniform(96).unwrap();
    let bound = probe_bound(0.0, XGrid::<f64>::standard().points()).unwrap();
    let n = kernel_truncation(0.3, 1e-6, bound).unwrap();
    let k = EpsilonKernel::build(0.3, 0.0, n, XGrid::<f64>::standard().points()).unwrap();
    let got = reconstruct_cps_exact(&rho, &k, &grid, 128).unwrap();
    let want = cps_distribution(&rho, 0.3, &grid).unwrap();
    let worst = got.values.iter().zip(&want.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn single_precision_table() {
    let grid: Vec<f32> = (0..41).map(|i| -2.0 + 0.1 * i as f32).collect();
    let t = build_kernel_table(4, &grid, 0.0f32);
    // the f32 refinement check is too strict for single precision sums
    match t {
        Ok(t) => assert!((t.get(0, 0, 20) - 2.0 / std::f32::consts::PI).abs() < 1e-4),
        Err(e) => assert!(matches!(e, Error::QuadratureNotConverged(_))),
    }
    let v: f32 = pattern_function(1, 0, 0.3f32, 0.0).unwrap();
    assert!((v as f64 - pattern_function(1, 0, 0.3f64, 0.0).unwrap()).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_even_and_periodic_in_sum_phase(x in -6.0f64..6.0, sigma in -10.0f64..10.0) {
        let grid = field_grid();
        let k = EpsilonKernel::build(0.8, 0.0, 20, &grid).unwrap();
        let a = k.eval(x, sigma);
        prop_assert!((a - k.eval(x, -sigma)).abs() < 1e-10);
        prop_assert!((a - k.eval(x, sigma + 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn kernel_depends_on_sum_phase(phi in -PI..PI, lo in 0.0f64..PI, theta in -1.0f64..1.0, field in -5.0f64..5.0) {
        prop_assume!(lo - theta >= 0.0 && lo - theta < PI);
        let grid: Vec<f64> = (0..=100).map(|i| -5.0 + 0.1 * i as f64).collect();
        let table = build_kernel_table(20, &grid, 0.0).unwrap();
        let q1 = KernelQuery::new(phi, field, lo, 0.8, 0.0).unwrap();
        let q2 = KernelQuery::new(phi + theta, field, lo - theta, 0.8, 0.0).unwrap();
        let a = sampling_kernel_with_order(&q1, &table, 20).unwrap();
        let b = sampling_kernel_with_order(&q2, &table, 20).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn pattern_symmetry_random(n in 0usize..12, m in 0usize..12, x in -4.0f64..4.0) {
        let a = pattern_function(n, m, x, 0.0).unwrap();
        let b = pattern_function(m, n, x, 0.0).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
        // parity: f_nm(-x) = (-1)^(n-m) f_nm(x)
        let c = pattern_function(n, m, -x, 0.0).unwrap();
        let sign = if (n + m) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((c - sign * a).abs() < 1e-9);
    }
}

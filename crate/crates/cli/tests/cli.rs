use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_cps");

fn cps(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env_remove("CPS_KERNEL_CACHE")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, body: &str) {
    fs::write(dir.join("run.toml"), body).unwrap();
}

const SMALL: &str = r#"
seed = 7

[state]
kind = "squeezed_vacuum"
mean_photon_number = 1.0

[grid]
n_phi = 64

[simulate]
n_phases = 8
events_per_phase = 500

[estimate]
epsilon = 0.8
"#;

/// Numeric rows of a CSV, skipping `#` comments and the header.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "[state]\nkind = \"vacuum\"\n[simulate]\neta = 0.3\n");
    let o = cps(dir.path(), &["--config", "run.toml", "simulate"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("simulate.eta"));
    assert!(!dir.path().join("out").exists(), "no work before validation");

    write_config(dir.path(), "[state]\nkind = \"vacuum\"\n[analytic]\nepsilons = [0.0]\n");
    let o = cps(dir.path(), &["--config", "run.toml", "analytic"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("analytic.epsilons[0]"));

    write_config(dir.path(), "[state]\nkind = \"vacuum\"\n[grid]\nn_phi = 0\n");
    assert_eq!(code(&cps(dir.path(), &["--config", "run.toml", "analytic"])), 2);
    assert_eq!(code(&cps(dir.path(), &["analytic"])), 2);
    assert_eq!(code(&cps(dir.path(), &["bogus"])), 2);
}

#[test]
fn io_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cps(dir.path(), &["--config", "missing.toml", "analytic"])), 4);
    write_config(dir.path(), SMALL);
    let o = cps(dir.path(), &["--config", "run.toml", "estimate", "--dataset", "nope.csv"]);
    assert_eq!(code(&o), 4);
    assert_eq!(code(&cps(dir.path(), &["check"])), 4);
}

#[test]
fn vacuum_analytic_curves_are_flat() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "[state]\nkind = \"vacuum\"\n[analytic]\nepsilons = [0.8, 0.1]\n");
    let o = cps(dir.path(), &["--config", "run.toml", "analytic"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["cps_eps0.8.csv", "cps_eps0.1.csv", "london.csv"] {
        let r = rows(&dir.path().join("out").join(f));
        assert_eq!(r.len(), 128);
        for row in r {
            assert!((row[1] - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
        }
    }
}

#[test]
fn simulate_estimate_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SMALL);
    assert_eq!(code(&cps(dir.path(), &["--config", "run.toml", "simulate"])), 0);
    let ds = fs::read_to_string(dir.path().join("out/dataset.csv")).unwrap();
    assert_eq!(ds.lines().filter(|l| !l.starts_with('#')).count(), 8 * 500);
    assert_eq!(rows(&dir.path().join("out/variances.csv")).len(), 8);
    assert!(dir.path().join("out/histograms/phase_007.csv").exists());

    let o = cps(dir.path(), &["--config", "run.toml", "estimate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("out/compare_analytic.txt")).unwrap();
    assert!(report.contains("fraction_abs_z_above_3"));
    let sampled = fs::read_to_string(dir.path().join("out/cps_sampled.csv")).unwrap();
    assert!(sampled.contains("# dataset_sha256 = "));
    assert!(sampled.contains("phi,p,stderr,flag_negative"));

    // reference on another grid
    write_config(dir.path(), "[state]\nkind = \"vacuum\"\n[grid]\nn_phi = 32\n[analytic]\nepsilons = [0.8]\nlondon = false\n");
    assert_eq!(code(&cps(dir.path(), &["--config", "run.toml", "--out", "ref", "analytic"])), 0);
    let o = cps(dir.path(), &["compare", "out/cps_sampled.csv", "ref/cps_eps0.8.csv"]);
    assert_eq!(code(&o), 2);
    write_config(dir.path(), SMALL);
    let o = cps(dir.path(), &["--config", "run.toml", "estimate", "--reference", "ref/cps_eps0.8.csv"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("estimate.reference"));

    let o = cps(dir.path(), &["compare", "out/cps_sampled.csv", "out/cps_reference.csv"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("sup_distance"));
}

#[test]
fn minimal_dataset_and_vacuum_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[state]\nkind = \"vacuum\"\n[grid]\nn_phi = 32\n[simulate]\nn_phases = 1\nevents_per_phase = 1\n";
    write_config(dir.path(), cfg);
    assert_eq!(code(&cps(dir.path(), &["--config", "run.toml", "simulate"])), 0);
    let ds = fs::read_to_string(dir.path().join("out/dataset.csv")).unwrap();
    assert_eq!(ds.lines().filter(|l| !l.starts_with('#')).count(), 1);

    // a vacuum estimate at large smoothing is flat up to noise
    let cfg = "[state]\nkind = \"vacuum\"\n[grid]\nn_phi = 32\n[simulate]\nn_phases = 10\nevents_per_phase = 4000\n[estimate]\nepsilon = 0.8\n";
    write_config(dir.path(), cfg);
    assert_eq!(code(&cps(dir.path(), &["--config", "run.toml", "--out", "v", "simulate"])), 0);
    assert_eq!(code(&cps(dir.path(), &["--config", "run.toml", "--out", "v", "estimate"])), 0);
    for r in rows(&dir.path().join("v/cps_sampled.csv")) {
        assert!((r[1] - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 4.0 * r[2] + 1e-3, "{r:?}");
    }
}

#[test]
fn divergent_kernel_exits_3_after_writing_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{SMALL}\n[kernel]\nn_field = 11\nn_sum_phase = 8\n[[kernel.cases]]\nepsilon = 0.8\neta = 1.0\n[[kernel.cases]]\nepsilon = 0.1\neta = 0.8\n"
    );
    write_config(dir.path(), &cfg);
    let o = cps(dir.path(), &["--config", "run.toml", "kernel"]);
    assert_eq!(code(&o), 3);
    let report = fs::read_to_string(dir.path().join("out/kernel_report.txt")).unwrap();
    assert!(report.contains("status = converged"));
    assert!(report.contains("status = divergent"));
    let surf = rows(&dir.path().join("out/kernel_eps0.8_eta1.csv"));
    assert_eq!(surf.len(), 88);
    // evenness in the sum phase: rows k and n-k share the field grid
    for k in 1..8 {
        for f in 0..11 {
            let (a, b) = (surf[k * 11 + f][2], surf[(8 - k) * 11 + f][2]);
            assert!((a - b).abs() < 1e-10);
        }
    }
    assert!(fs::read_to_string(dir.path().join("out/MANIFEST")).unwrap().contains("kernel_report.txt"));
}

#[test]
fn cache_env_and_thread_count_do_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SMALL);
    assert_eq!(code(&cps(dir.path(), &["--config", "run.toml", "simulate"])), 0);
    let run = |out: &str, threads: &str, cache: Option<&str>| {
        let mut c = Command::new(BIN);
        c.current_dir(dir.path())
            .env_remove("CPS_KERNEL_CACHE")
            .args(["--config", "run.toml", "--out", out, "--threads", threads])
            .args(["estimate", "--dataset", "out/dataset.csv"]);
        if let Some(p) = cache {
            c.env("CPS_KERNEL_CACHE", p);
        }
        let o = c.output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(dir.path().join(out).join("cps_sampled.csv")).unwrap()
    };
    let plain = run("a", "1", None);
    let cached = run("b", "4", Some("cache"));
    let hit = run("c", "0", Some("cache"));
    assert_eq!(plain, cached);
    assert_eq!(plain, hit);
    assert_eq!(fs::read_dir(dir.path().join("cache")).unwrap().count(), 1);
}

#[test]
fn check_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SMALL);
    assert_eq!(code(&cps(dir.path(), &["--config", "run.toml", "simulate"])), 0);
    assert_eq!(code(&cps(dir.path(), &["--config", "run.toml", "estimate"])), 0);
    let o = cps(dir.path(), &["check"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    fs::write(dir.path().join("out/variances.csv"), "changed").unwrap();
    let o = cps(dir.path(), &["check"]);
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("MISMATCH variances.csv"));
}

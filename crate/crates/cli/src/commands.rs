//! The subcommands. Each writes into the run directory and returns the files
//! it produced (relative paths) so they can be hashed into the manifest.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use cps_core::estimate::csv::{read_distribution_csv, write_density_csv, write_distribution_csv, CsvMeta};
use cps_core::estimate::{compare, estimate_density, sample_cps_with_kernel, CompareReport, EstimationConfig};
use cps_core::fock::{cps_distribution, london_distribution, PhaseDistribution, PhaseGrid};
use cps_core::homodyne::format::{read_dataset, write_dataset, write_histogram_csv};
use cps_core::homodyne::{histogram, sample_variance, simulate_with, variance_stderr, HomodyneDataset};
use cps_core::homodyne::SimulationOptions;
use cps_core::kernel::cache::load_or_build;
use cps_core::kernel::{
    build_kernel_table, kernel_truncation, max_order, probe_bound, s_from_eta, EpsilonKernel, KernelTable, XGrid,
};
use cps_core::Error;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::hash_file;

pub const DATASET: &str = "dataset.csv";

/// Resolved settings shared by all commands.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub kernel_cache: Option<PathBuf>,
}

/// Files written, plus a failure to report after they were recorded.
pub type Outcome = (Vec<String>, Option<CliError>);

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

/// Runs a core writer, reporting failures against `path`.
fn write_with(
    path: &Path,
    f: impl FnOnce(BufWriter<File>) -> cps_core::Result<()>,
) -> Result<(), CliError> {
    let w = create(path)?;
    f(w).map_err(|e| match e {
        Error::Io(m) | Error::Format(m) => io_err(path, m),
        other => other.into(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn base_meta(ctx: &Context, command: &str) -> CsvMeta {
    CsvMeta::new()
        .with("command", command)
        .with("state", ctx.config.state.tag())
        .with("seed", ctx.config.seed)
}

impl Context {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.config.estimate.dataset.clone().unwrap_or_else(|| self.path(DATASET))
    }

    /// Pattern-function table of order `n_max`, from the cache directory when set.
    pub fn table(&self, n_max: usize, grid: &XGrid<f64>, s: f64) -> Result<KernelTable<f64>, CliError> {
        let interp = self.config.estimate.interpolation.into();
        let table = match &self.kernel_cache {
            Some(dir) => load_or_build(dir, n_max, grid.points(), s)
                .map_err(|e| match e {
                    Error::Io(m) => io_err(dir, m),
                    other => other.into(),
                })?
                .0,
            None => build_kernel_table(n_max, grid.points(), s)?,
        };
        Ok(table.with_interpolation(interp))
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

/// One CSV per smoothing parameter plus the London limit.
pub fn analytic(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let rho = cfg.state.build()?;
    let grid = cfg.phase_grid()?;
    let mut files = Vec::new();
    for &eps in &cfg.analytic.epsilons {
        let dist = cps_distribution(&rho, eps, &grid)?;
        let name = format!("cps_eps{}.csv", fmt_f(eps));
        let meta = base_meta(ctx, "analytic").with("n_max", rho.n_max()).with("epsilon", eps);
        write_with(&ctx.path(&name), |w| write_distribution_csv(&dist, &meta, w))?;
        files.push(name);
    }
    if cfg.analytic.london {
        let dist = london_distribution(&rho, &grid)?;
        let name = "london.csv".to_string();
        let meta = base_meta(ctx, "analytic").with("n_max", rho.n_max()).with("epsilon", 0);
        write_with(&ctx.path(&name), |w| write_distribution_csv(&dist, &meta, w))?;
        files.push(name);
    }
    Ok((files, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KernelStatus {
    Converged,
    Divergent,
    OrderCap,
}

impl KernelStatus {
    fn label(self) -> &'static str {
        match self {
            KernelStatus::Converged => "converged",
            KernelStatus::Divergent => "divergent",
            KernelStatus::OrderCap => "order_cap",
        }
    }
}

fn kernel_sup(k: &EpsilonKernel<f64>, fields: &[f64], sigmas: &[f64]) -> f64 {
    let mut sup = 0.0f64;
    for &s in sigmas {
        for &f in fields {
            sup = sup.max(k.eval(f, s).abs());
        }
    }
    sup
}

/// Kernel surfaces `K(sum_phase, F)` and a convergence report.
///
/// Cases whose series does not converge within the order cap are still
/// emitted at the cap, marked in the report, and make the command fail with
/// a numeric error after all files are written.
pub fn kernel(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let kc = &cfg.kernel;
    let xg = cfg.x_grid()?;
    let step = (kc.field_max - kc.field_min) / (kc.n_field - 1) as f64;
    let fields: Vec<f64> = (0..kc.n_field).map(|i| kc.field_min + step * i as f64).collect();
    let sigmas = PhaseGrid::<f64>::uniform(kc.n_sum_phase)?.values().to_vec();
    // x = F / (sqrt(2) |F|) with the default |F| = 1/sqrt(2)
    let f_scale = 1.0 / (std::f64::consts::SQRT_2 * cps_core::fock::DEFAULT_F_ABS);

    let mut plans = Vec::new();
    for (i, case) in kc.cases.iter().enumerate() {
        let s = s_from_eta(case.eta).map_err(|e| CliError::Config(format!("kernel.cases[{i}].eta: {e}")))?;
        let bound = probe_bound(s, xg.points())?;
        let cap = max_order(s);
        let (order, status) = match kernel_truncation(case.epsilon, kc.tol, bound) {
            Ok(n) if n <= cap => (n, KernelStatus::Converged),
            Ok(_) => (cap, KernelStatus::OrderCap),
            Err(Error::KernelDivergent { .. }) => (cap, KernelStatus::Divergent),
            Err(e) => return Err(e.into()),
        };
        plans.push((*case, s, bound, order, status));
    }

    let mut report = String::new();
    writeln!(report, "# kernel convergence report").unwrap();
    writeln!(report, "# tol = {}", kc.tol).unwrap();
    writeln!(report, "# x_grid = [{}, {}] step {}", xg.points()[0], xg.abs_max(), cfg.estimate.x_step).unwrap();
    let mut files = Vec::new();
    let mut failed = Vec::new();
    // one table per detection parameter, at the largest order any case needs
    let mut needs: Vec<(f64, usize)> = Vec::new();
    for &(_, s, _, order, _) in &plans {
        match needs.iter_mut().find(|(t, _)| t.to_bits() == s.to_bits()) {
            Some(entry) => entry.1 = entry.1.max(order.max(10)),
            None => needs.push((s, order.max(10))),
        }
    }
    let tables = needs
        .iter()
        .map(|&(s, n)| Ok((s.to_bits(), ctx.table(n, &xg, s)?)))
        .collect::<Result<Vec<(u64, KernelTable<f64>)>, CliError>>()?;
    for (case, s, bound, order, status) in plans {
        let table = &tables.iter().find(|(bits, _)| *bits == s.to_bits()).unwrap().1;
        let k = EpsilonKernel::from_table(table, case.epsilon, order)?;
        let k_prev = EpsilonKernel::from_table(table, case.epsilon, order.saturating_sub(10))?;
        let mut even_defect = 0.0f64;
        let mut last_change = 0.0f64;
        let mut body = String::with_capacity(64 * fields.len() * sigmas.len());
        writeln!(body, "sum_phase,F,K").unwrap();
        for &sg in &sigmas {
            for &f in &fields {
                let x = f * f_scale;
                let v = k.eval(x, sg);
                even_defect = even_defect.max((v - k.eval(x, -sg)).abs());
                last_change = last_change.max((v - k_prev.eval(x, sg)).abs());
                writeln!(body, "{sg:.16e},{f:.16e},{v:.16e}").unwrap();
            }
        }
        let sup = kernel_sup(&k, &fields.iter().map(|f| f * f_scale).collect::<Vec<_>>(), &sigmas);
        let name = format!("kernel_eps{}_eta{}.csv", fmt_f(case.epsilon), fmt_f(case.eta));
        let mut head = String::new();
        for (key, val) in [
            ("command", "kernel".to_string()),
            ("epsilon", fmt_f(case.epsilon)),
            ("eta", fmt_f(case.eta)),
            ("s", fmt_f(s)),
            ("order", order.to_string()),
            ("status", status.label().to_string()),
        ] {
            writeln!(head, "# {key} = {val}").unwrap();
        }
        write_text(&ctx.path(&name), &(head + &body))?;
        files.push(name.clone());

        writeln!(
            report,
            "epsilon = {} eta = {} s = {} status = {} order = {} bound_sup = {:.6e} growth = {:.6e} sup_abs = {:.6e} change_last_10_orders = {:.3e} even_defect = {:.3e} file = {}",
            fmt_f(case.epsilon),
            fmt_f(case.eta),
            fmt_f(s),
            status.label(),
            order,
            bound.sup,
            bound.growth,
            sup,
            last_change,
            even_defect,
            name
        )
        .unwrap();
        if status != KernelStatus::Converged {
            let partial: Vec<String> = [order / 4, order / 2, order]
                .iter()
                .filter(|&&n| n > 0)
                .map(|&n| {
                    let kn = EpsilonKernel::from_table(table, case.epsilon, n)?;
                    let sf: Vec<f64> = fields.iter().map(|f| f * f_scale).collect();
                    Ok(format!("N={n}: {:.3e}", kernel_sup(&kn, &sf, &sigmas)))
                })
                .collect::<Result<_, CliError>>()?;
            writeln!(report, "  partial-sum sup_abs {}", partial.join(", ")).unwrap();
            failed.push(format!(
                "kernel at epsilon = {} eta = {} not converged, status {} (growth rate {:.4} per unit n+m)",
                fmt_f(case.epsilon),
                fmt_f(case.eta),
                status.label(),
                bound.growth
            ));
        }
    }
    write_text(&ctx.path("kernel_report.txt"), &report)?;
    files.push("kernel_report.txt".into());
    let failure = (!failed.is_empty()).then(|| CliError::Numeric(failed.join("; ")));
    Ok((files, failure))
}

/// Dataset, per-phase variances and histograms.
pub fn simulate(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let sim = &cfg.simulate;
    let rho = cfg.state.build()?;
    let opts = SimulationOptions {
        state_tag: cfg.state.tag(),
        ..SimulationOptions::default()
    };
    let ds = simulate_with(&rho, sim.n_phases, sim.events_per_phase, sim.eta, cfg.seed, &opts)?;
    let mut files = vec![DATASET.to_string()];
    write_with(&ctx.path(DATASET), |w| write_dataset(&ds, w))?;

    let noise = ds.s().abs() / 2.0;
    let mut text = String::new();
    writeln!(text, "# command = simulate").unwrap();
    writeln!(text, "# eta = {}", sim.eta).unwrap();
    writeln!(text, "# seed = {}", cfg.seed).unwrap();
    writeln!(text, "# units = x").unwrap();
    writeln!(text, "phase,variance,stderr,expected").unwrap();
    for k in 0..ds.n_phases() {
        let x = ds.x_values(k);
        let phase = ds.phases()[k];
        let expected = rho.quadrature_moments(phase).1 + noise;
        writeln!(
            text,
            "{phase:.16e},{:.16e},{:.16e},{expected:.16e}",
            sample_variance(&x),
            variance_stderr(&x)
        )
        .unwrap();
    }
    write_text(&ctx.path("variances.csv"), &text)?;
    files.push("variances.csv".into());

    for k in 0..ds.n_phases() {
        let h = histogram(&ds, k, sim.histogram_bins)?;
        let name = format!("histograms/phase_{k:03}.csv");
        write_with(&ctx.path(&name), |w| write_histogram_csv(&h, w))?;
        files.push(name);
    }
    Ok((files, None))
}

fn local_maxima(d: &PhaseDistribution<f64>) -> Vec<f64> {
    let v = &d.values;
    let n = v.len();
    let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..n)
        .filter(|&i| {
            let (l, r) = (v[(i + n - 1) % n], v[(i + 1) % n]);
            v[i] > l && v[i] >= r && v[i] > 0.5 * top
        })
        .map(|i| d.grid.values()[i])
        .collect()
}

/// `key = value` summary of a comparison.
pub fn report_text(a: &str, b: &str, rep: &CompareReport, est: Option<&PhaseDistribution<f64>>) -> String {
    let mut t = String::new();
    writeln!(t, "# a = {a}").unwrap();
    writeln!(t, "# b = {b}").unwrap();
    writeln!(t, "points = {}", rep.z_scores.len()).unwrap();
    writeln!(t, "sup_distance = {:e}", rep.sup_distance).unwrap();
    writeln!(t, "integrated_abs_distance = {:e}", rep.integrated_abs_distance).unwrap();
    writeln!(t, "max_abs_z = {}", rep.max_abs_z()).unwrap();
    writeln!(t, "fraction_abs_z_above_3 = {}", rep.fraction_above(3.0)).unwrap();
    if let Some(d) = est {
        let peaks: Vec<String> = local_maxima(d).iter().map(|p| format!("{p:.6}")).collect();
        writeln!(t, "local_maxima_a = {}", peaks.join(" ")).unwrap();
    }
    t
}

fn load_dataset(path: &Path) -> Result<(HomodyneDataset, String), CliError> {
    let ds = read_dataset(open(path)?).map_err(|e| io_err(path, e))?;
    Ok((ds, hash_file(path)?))
}

fn load_distribution(path: &Path) -> Result<PhaseDistribution<f64>, CliError> {
    Ok(read_distribution_csv(open(path)?).map_err(|e| io_err(path, e))?.0)
}

/// Direct sampling of the CPS distribution from a dataset, with optional
/// comparisons and density-matrix estimate.
pub fn estimate(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let ec = &cfg.estimate;
    let path = ctx.dataset_path();
    let (ds, sha) = load_dataset(&path)?;
    let grid = cfg.phase_grid()?;
    let xg = cfg.x_grid()?;
    let est_cfg = EstimationConfig {
        epsilon: ec.epsilon,
        phi_grid: grid.clone(),
        tol: ec.tol,
        normalize: ec.normalize,
        x_grid: xg.clone(),
        interpolation: ec.interpolation.into(),
    };
    est_cfg.validate()?;
    let s = ds.s();
    let order = kernel_truncation(ec.epsilon, ec.tol, probe_bound(s, xg.points())?)?;
    if order > max_order(s) {
        return Err(CliError::Numeric(format!(
            "epsilon = {} needs kernel order {order}, above the cap {} for s = {s}",
            ec.epsilon,
            max_order(s)
        )));
    }
    let table = ctx.table(order, &xg, s)?;
    let kernel = EpsilonKernel::from_table(&table, ec.epsilon, order)?;
    let dist = sample_cps_with_kernel(&ds, &est_cfg, &kernel)?;
    let meta = CsvMeta::new()
        .with("command", "estimate")
        .with("epsilon", ec.epsilon)
        .with("eta", ds.eta)
        .with("seed", ds.seed)
        .with("state", &ds.state_tag)
        .with("dataset_sha256", &sha)
        .with("kernel_order", order)
        .with("n_phases", ds.n_phases())
        .with("events", ds.total_events())
        .with("normalized", ec.normalize);
    let mut files = vec!["cps_sampled.csv".to_string()];
    write_with(&ctx.path("cps_sampled.csv"), |w| write_distribution_csv(&dist, &meta, w))?;

    if ec.analytic_reference {
        let rho = cfg.state.build()?;
        let exact = cps_distribution(&rho, ec.epsilon, &grid)?;
        let meta = base_meta(ctx, "estimate").with("n_max", rho.n_max()).with("epsilon", ec.epsilon);
        write_with(&ctx.path("cps_reference.csv"), |w| write_distribution_csv(&exact, &meta, w))?;
        let rep = compare(&dist, &exact)?;
        write_text(
            &ctx.path("compare_analytic.txt"),
            &report_text("cps_sampled.csv", "cps_reference.csv", &rep, Some(&dist)),
        )?;
        files.push("cps_reference.csv".into());
        files.push("compare_analytic.txt".into());
    }
    if let Some(reference) = &ec.reference {
        let other = load_distribution(reference)?;
        let rep = compare(&dist, &other).map_err(|e| match e {
            Error::GridMismatch => CliError::Config(format!(
                "estimate.reference: {} is on a different phase grid",
                reference.display()
            )),
            other => other.into(),
        })?;
        write_text(
            &ctx.path("compare_reference.txt"),
            &report_text("cps_sampled.csv", &reference.display().to_string(), &rep, Some(&dist)),
        )?;
        files.push("compare_reference.txt".into());
    }
    if let Some(n_max) = ec.density_n_max {
        let est = estimate_density(&ds, n_max)?;
        let meta = CsvMeta::new()
            .with("command", "estimate")
            .with("eta", ds.eta)
            .with("seed", ds.seed)
            .with("dataset_sha256", &sha)
            .with("n_max", n_max);
        write_with(&ctx.path("density.csv"), |w| write_density_csv(&est, &meta, w))?;
        files.push("density.csv".into());
    }
    Ok((files, None))
}

/// Compares two distribution files; grids must match.
pub fn compare_files(ctx: &Context, a: &Path, b: &Path) -> Result<(Outcome, String), CliError> {
    let (da, db) = (load_distribution(a)?, load_distribution(b)?);
    let rep = compare(&da, &db).map_err(|e| match e {
        Error::GridMismatch => CliError::Config(format!(
            "{} and {} are on different phase grids",
            a.display(),
            b.display()
        )),
        other => other.into(),
    })?;
    let text = report_text(&a.display().to_string(), &b.display().to_string(), &rep, Some(&da));
    write_text(&ctx.path("compare.txt"), &text)?;
    Ok(((vec!["compare.txt".into()], None), text))
}

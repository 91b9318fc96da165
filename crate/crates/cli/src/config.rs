//! Run configuration: a TOML file with one section per command.
//!
//! Every field has a default except `[state]`, so a minimal file is
//!
//! ```toml
//! [state]
//! kind = "squeezed_vacuum"
//! mean_photon_number = 1.0
//! ```

use std::path::{Path, PathBuf};

use cps_core::fock::{coherent_state, coherent_state_auto, squeezed_vacuum, squeezed_vacuum_auto, DensityMatrix};
use cps_core::fock::{pure_to_density, FockState, PhaseGrid};
use cps_core::kernel::{Interpolation, XGrid};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_cache: Option<PathBuf>,
    pub state: StateSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub analytic: AnalyticSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub estimate: EstimateSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Vacuum,
    Coherent,
    SqueezedVacuum,
    Number,
}

/// Input state. Coherent states take either `alpha = [re, im]` or a real
/// amplitude from `mean_photon_number`; `n_max` is chosen automatically when
/// omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub kind: StateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_photon_number: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
}

/// `n_phi` uniform points on `[-pi, pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_phi: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_phi: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticSection {
    pub epsilons: Vec<f64>,
    pub london: bool,
}

impl Default for AnalyticSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.8, 0.3, 0.1],
            london: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub n_phases: usize,
    pub events_per_phase: usize,
    pub eta: f64,
    pub histogram_bins: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            n_phases: 30,
            events_per_phase: 10_000,
            eta: 1.0,
            histogram_bins: 61,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCase {
    pub epsilon: f64,
    pub eta: f64,
}

/// Kernel surfaces over `field in [field_min, field_max]` and `n_sum_phase`
/// sum phases on `[-pi, pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    pub cases: Vec<KernelCase>,
    pub field_min: f64,
    pub field_max: f64,
    pub n_field: usize,
    pub n_sum_phase: usize,
    pub tol: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        let case = |epsilon, eta| KernelCase { epsilon, eta };
        Self {
            cases: vec![case(0.1, 1.0), case(0.3, 1.0), case(0.8, 1.0), case(0.1, 0.8)],
            field_min: -6.0,
            field_max: 6.0,
            n_field: 121,
            n_sum_phase: 128,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationKind {
    Linear,
    Cubic,
}

impl From<InterpolationKind> for Interpolation {
    fn from(k: InterpolationKind) -> Self {
        match k {
            InterpolationKind::Linear => Interpolation::Linear,
            InterpolationKind::Cubic => Interpolation::CubicHermite,
        }
    }
}

/// Direct sampling settings. `dataset` defaults to the simulate output in the
/// run directory; `reference` names a distribution CSV to compare against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSection {
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    /// Compare against the analytic distribution of `[state]`.
    pub analytic_reference: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_n_max: Option<usize>,
    pub tol: f64,
    pub normalize: bool,
    pub x_half_width: f64,
    pub x_step: f64,
    pub interpolation: InterpolationKind,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            dataset: None,
            reference: None,
            analytic_reference: true,
            density_n_max: None,
            tol: 1e-6,
            normalize: true,
            x_half_width: 10.0,
            x_step: 0.05,
            interpolation: InterpolationKind::Cubic,
        }
    }
}

fn default_seed() -> u64 {
    20240917
}

fn bad(field: impl Into<String>, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {msg}", field.into()))
}

fn check_epsilon(field: String, eps: f64) -> Result<(), CliError> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("smoothing parameter must be > 0, got {eps}")))
    }
}

fn check_eta(field: String, eta: f64) -> Result<(), CliError> {
    if eta > 0.5 && eta <= 1.0 {
        Ok(())
    } else {
        Err(bad(field, format!("detection efficiency must lie in (1/2, 1], got {eta}")))
    }
}

fn check_tol(field: &str, tol: f64) -> Result<(), CliError> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(bad(field, format!("must lie in (0, 1), got {tol}")))
    }
}

impl RunConfig {
    /// Default sections around the given state.
    pub fn new(state: StateSpec) -> Self {
        Self {
            seed: default_seed(),
            out: None,
            kernel_cache: None,
            state,
            grid: GridSpec::default(),
            analytic: AnalyticSection::default(),
            simulate: SimulateSection::default(),
            kernel: KernelSection::default(),
            estimate: EstimateSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks every section, naming the first offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        self.state.build()?;
        if self.grid.n_phi == 0 {
            return Err(bad("grid.n_phi", "phase grid is empty"));
        }
        for (i, &e) in self.analytic.epsilons.iter().enumerate() {
            check_epsilon(format!("analytic.epsilons[{i}]"), e)?;
        }
        let sim = &self.simulate;
        if sim.n_phases == 0 {
            return Err(bad("simulate.n_phases", "need at least one phase"));
        }
        if sim.events_per_phase == 0 {
            return Err(bad("simulate.events_per_phase", "need at least one event"));
        }
        check_eta("simulate.eta".into(), sim.eta)?;
        if sim.histogram_bins < 2 {
            return Err(bad("simulate.histogram_bins", "need at least 2 bins"));
        }
        let k = &self.kernel;
        for (i, c) in k.cases.iter().enumerate() {
            check_epsilon(format!("kernel.cases[{i}].epsilon"), c.epsilon)?;
            check_eta(format!("kernel.cases[{i}].eta"), c.eta)?;
        }
        if !(k.field_min < k.field_max) || !k.field_min.is_finite() || !k.field_max.is_finite() {
            return Err(bad("kernel.field_min", "need finite field_min < field_max"));
        }
        if k.n_field < 2 {
            return Err(bad("kernel.n_field", "need at least 2 field values"));
        }
        if k.n_sum_phase == 0 {
            return Err(bad("kernel.n_sum_phase", "sum-phase grid is empty"));
        }
        check_tol("kernel.tol", k.tol)?;
        let e = &self.estimate;
        check_epsilon("estimate.epsilon".into(), e.epsilon)?;
        check_tol("estimate.tol", e.tol)?;
        self.x_grid()?;
        Ok(())
    }

    pub fn phase_grid(&self) -> Result<PhaseGrid<f64>, CliError> {
        PhaseGrid::uniform(self.grid.n_phi).map_err(|e| bad("grid.n_phi", e))
    }

    /// Field grid of the kernel tables, symmetric about zero.
    pub fn x_grid(&self) -> Result<XGrid<f64>, CliError> {
        let e = &self.estimate;
        if !(e.x_step > 0.0 && e.x_half_width > 0.0 && e.x_half_width.is_finite()) {
            return Err(bad("estimate.x_step", "need positive x_step and x_half_width"));
        }
        let half_steps = (e.x_half_width / e.x_step).round() as usize;
        if half_steps == 0 || half_steps > 100_000 {
            return Err(bad("estimate.x_step", format!("{half_steps} half-grid steps out of range")));
        }
        let start = -(half_steps as f64) * e.x_step;
        XGrid::uniform(start, e.x_step, 2 * half_steps + 1).map_err(|err| bad("estimate.x_step", err))
    }
}

impl StateSpec {
    pub fn squeezed_vacuum(mean_photon_number: f64) -> Self {
        Self {
            kind: StateKind::SqueezedVacuum,
            mean_photon_number: Some(mean_photon_number),
            alpha: None,
            n: None,
            n_max: None,
        }
    }

    pub fn coherent(alpha: [f64; 2]) -> Self {
        Self {
            kind: StateKind::Coherent,
            mean_photon_number: None,
            alpha: Some(alpha),
            n: None,
            n_max: None,
        }
    }

    pub fn vacuum() -> Self {
        Self {
            kind: StateKind::Vacuum,
            mean_photon_number: None,
            alpha: None,
            n: None,
            n_max: None,
        }
    }

    fn mean_n(&self) -> Result<f64, CliError> {
        match self.mean_photon_number {
            Some(v) if v >= 0.0 && v.is_finite() => Ok(v),
            Some(v) => Err(bad("state.mean_photon_number", format!("must be finite and >= 0, got {v}"))),
            None => Err(bad("state.mean_photon_number", "required for this state kind")),
        }
    }

    /// Short description recorded in output headers.
    pub fn tag(&self) -> String {
        match self.kind {
            StateKind::Vacuum => "vacuum".into(),
            StateKind::Coherent => match self.alpha {
                Some([re, im]) => format!("coherent(alpha={re}{im:+}i)"),
                None => format!("coherent(mean_photon_number={})", self.mean_photon_number.unwrap_or(0.0)),
            },
            StateKind::SqueezedVacuum => {
                format!("squeezed_vacuum(mean_photon_number={})", self.mean_photon_number.unwrap_or(0.0))
            }
            StateKind::Number => format!("number(n={})", self.n.unwrap_or(0)),
        }
    }

    pub fn build(&self) -> Result<DensityMatrix<f64>, CliError> {
        let named = |field: &'static str| move |e: cps_core::Error| bad(field, e);
        let state: FockState<f64> = match self.kind {
            StateKind::Vacuum => FockState::number_state(0, self.n_max.unwrap_or(0)).map_err(named("state.n_max"))?,
            StateKind::Number => {
                let n = self.n.ok_or_else(|| bad("state.n", "required for number states"))?;
                FockState::number_state(n, self.n_max.unwrap_or(n)).map_err(named("state.n_max"))?
            }
            StateKind::Coherent => {
                let alpha = match (self.alpha, self.mean_photon_number) {
                    (Some(_), Some(_)) => {
                        return Err(bad("state.alpha", "give either alpha or mean_photon_number, not both"))
                    }
                    (Some([re, im]), None) if re.is_finite() && im.is_finite() => Complex::new(re, im),
                    (Some(_), None) => return Err(bad("state.alpha", "must be finite")),
                    (None, _) => Complex::new(self.mean_n()?.sqrt(), 0.0),
                };
                match self.n_max {
                    Some(n_max) => coherent_state(alpha, n_max).map_err(named("state.n_max"))?,
                    None => coherent_state_auto(alpha).map_err(named("state.alpha"))?,
                }
            }
            StateKind::SqueezedVacuum => {
                let mean = self.mean_n()?;
                match self.n_max {
                    Some(n_max) => squeezed_vacuum(mean, n_max).map_err(named("state.n_max"))?,
                    None => squeezed_vacuum_auto(mean).map_err(named("state.mean_photon_number"))?,
                }
            }
        };
        Ok(pure_to_density(&state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = RunConfig::from_toml("[state]\nkind = \"squeezed_vacuum\"\nmean_photon_number = 1.0\n").unwrap();
        assert_eq!(cfg.simulate.n_phases, 30);
        assert_eq!(cfg.kernel.cases.len(), 4);
        assert_eq!(cfg.grid.n_phi, 128);
        assert_eq!(cfg.x_grid().unwrap(), XGrid::standard());
    }

    #[test]
    fn errors_name_the_field() {
        let base = "[state]\nkind = \"vacuum\"\n";
        for (extra, field) in [
            ("[simulate]\neta = 0.4\n", "simulate.eta"),
            ("[simulate]\neta = 1.2\n", "simulate.eta"),
            ("[estimate]\nepsilon = 0.0\n", "estimate.epsilon"),
            ("[analytic]\nepsilons = [0.3, -1.0]\n", "analytic.epsilons[1]"),
            ("[grid]\nn_phi = 0\n", "grid.n_phi"),
            ("[[kernel.cases]]\nepsilon = 0.1\neta = 0.5\n", "kernel.cases[0].eta"),
        ] {
            let err = RunConfig::from_toml(&format!("{base}{extra}")).unwrap_err();
            assert!(matches!(err, CliError::Config(_)));
            assert!(err.to_string().contains(field), "{err} lacks {field}");
        }
        let err = RunConfig::from_toml("[state]\nkind = \"squeezed_vacuum\"\n").unwrap_err();
        assert!(err.to_string().contains("state.mean_photon_number"));
        let err = RunConfig::from_toml("[state]\nkind = \"squeezed_vacuum\"\nmean_photon_number = 1.0\nn_max = 40\n")
            .unwrap_err();
        assert!(err.to_string().contains("state.n_max"));
        assert!(RunConfig::from_toml("bogus = 1\n[state]\nkind = \"vacuum\"\n").is_err());
    }

    fn arb_state() -> impl Strategy<Value = StateSpec> {
        prop_oneof![
            Just(StateSpec::vacuum()),
            (0.0f64..4.0).prop_map(StateSpec::squeezed_vacuum),
            (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| StateSpec::coherent([a, b])),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn round_trips_losslessly(
            state in arb_state(),
            seed in any::<u64>(),
            eps in proptest::collection::vec(1e-3f64..5.0, 0..5),
            eta in 0.5001f64..=1.0,
            n_phi in 1usize..500,
            density in proptest::option::of(0usize..20),
        ) {
            let mut cfg = RunConfig::new(state);
            cfg.seed = seed;
            cfg.analytic.epsilons = eps;
            cfg.simulate.eta = eta;
            cfg.grid.n_phi = n_phi;
            cfg.estimate.density_n_max = density;
            cfg.estimate.reference = Some(PathBuf::from("ref dir/p.csv"));
            let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}

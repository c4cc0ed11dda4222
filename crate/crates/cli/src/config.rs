use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use nucspin::experiments::ShuttleVariant;
use nucspin::hyperfine::K_HF_DEFAULT;
use nucspin::pulse::ShuttleSettings;
use nucspin::readout::NuclearReadoutConfig;
use nucspin::spin::{DurationErrorShape, NoiseModel, SpinSystemParams};
use nucspin::vanvleck::{ElectrodeGeometry, Orientation, SpinSpecies};
use nucspin::experiments::NmrSettings;

use crate::CliError;

/// Top-level config file: shared defaults plus one or more `[[run]]` tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<SpinSystemParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(rename = "run")]
    pub runs: Vec<RunSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Spectrum,
    Chevron,
    Rabi,
    Ramsey,
    Hahn,
    Bell,
    ErrorBudget,
    Shuttle,
    ReadoutFidelity,
    HyperfineMc,
    Vanvleck,
    Fit,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Chevron => "chevron",
            Experiment::Rabi => "rabi",
            Experiment::Ramsey => "ramsey",
            Experiment::Hahn => "hahn",
            Experiment::Bell => "bell",
            Experiment::ErrorBudget => "error-budget",
            Experiment::Shuttle => "shuttle",
            Experiment::ReadoutFidelity => "readout-fidelity",
            Experiment::HyperfineMc => "hyperfine-mc",
            Experiment::Vanvleck => "vanvleck",
            Experiment::Fit => "fit",
        }
    }

    /// Whether results are a sweep (CSV) or a scalar summary (JSON) by default.
    pub fn default_format(self) -> Format {
        match self {
            Experiment::Spectrum | Experiment::Bell | Experiment::ErrorBudget | Experiment::Fit => Format::Json,
            _ => Format::Csv,
        }
    }

    fn uses_noise(self) -> bool {
        matches!(
            self,
            Experiment::Chevron
                | Experiment::Rabi
                | Experiment::Ramsey
                | Experiment::Hahn
                | Experiment::Bell
                | Experiment::ErrorBudget
                | Experiment::Shuttle
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub name: String,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<SpinSystemParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chevron: Option<ChevronJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi: Option<RabiJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramsey: Option<RamseyJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hahn: Option<HahnJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bell: Option<BellJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuttle: Option<ShuttleJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<ReadoutJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperfine: Option<HyperfineJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vanvleck: Option<VanvleckJob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitJob>,
}

impl RunSpec {
    pub fn new(name: &str, experiment: Experiment) -> Self {
        Self {
            name: name.to_string(),
            experiment,
            seed: None,
            trials: None,
            format: None,
            params: None,
            noise: None,
            chevron: None,
            rabi: None,
            ramsey: None,
            hahn: None,
            bell: None,
            shuttle: None,
            readout: None,
            hyperfine: None,
            vanvleck: None,
            fit: None,
        }
    }

    /// Names of the job sections present, for the one-section check.
    fn sections(&self) -> Vec<&'static str> {
        let mut s = Vec::new();
        if self.chevron.is_some() { s.push("chevron"); }
        if self.rabi.is_some() { s.push("rabi"); }
        if self.ramsey.is_some() { s.push("ramsey"); }
        if self.hahn.is_some() { s.push("hahn"); }
        if self.bell.is_some() { s.push("bell"); }
        if self.shuttle.is_some() { s.push("shuttle"); }
        if self.readout.is_some() { s.push("readout"); }
        if self.hyperfine.is_some() { s.push("hyperfine"); }
        if self.vanvleck.is_some() { s.push("vanvleck"); }
        if self.fit.is_some() { s.push("fit"); }
        s
    }

    fn section_for(experiment: Experiment) -> Option<&'static str> {
        Some(match experiment {
            Experiment::Spectrum => return None,
            Experiment::Chevron => "chevron",
            Experiment::Rabi => "rabi",
            Experiment::Ramsey => "ramsey",
            Experiment::Hahn => "hahn",
            Experiment::Bell | Experiment::ErrorBudget => "bell",
            Experiment::Shuttle => "shuttle",
            Experiment::ReadoutFidelity => "readout",
            Experiment::HyperfineMc => "hyperfine",
            Experiment::Vanvleck => "vanvleck",
            Experiment::Fit => "fit",
        })
    }

    /// Fills the job section with defaults if it is missing.
    pub fn with_default_section(mut self) -> Self {
        match self.experiment {
            Experiment::Spectrum => {}
            Experiment::Chevron => { self.chevron.get_or_insert_with(Default::default); }
            Experiment::Rabi => { self.rabi.get_or_insert_with(Default::default); }
            Experiment::Ramsey => { self.ramsey.get_or_insert_with(Default::default); }
            Experiment::Hahn => { self.hahn.get_or_insert_with(Default::default); }
            Experiment::Bell | Experiment::ErrorBudget => { self.bell.get_or_insert_with(Default::default); }
            Experiment::Shuttle => { self.shuttle.get_or_insert_with(Default::default); }
            Experiment::ReadoutFidelity => { self.readout.get_or_insert_with(Default::default); }
            Experiment::HyperfineMc => { self.hyperfine.get_or_insert_with(Default::default); }
            Experiment::Vanvleck => { self.vanvleck.get_or_insert_with(Default::default); }
            Experiment::Fit => { self.fit.get_or_insert_with(Default::default); }
        }
        self
    }
}

/// Named noise model with optional per-field overrides. Widths in kHz,
/// coherence times in μs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub preset: NoisePreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_rabi_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_star_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_star_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_ix: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_iz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_sz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectator_flip_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_length_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_length_shape: Option<DurationErrorShape>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePreset {
    #[default]
    Noiseless,
    /// Widths derived from `t2_rabi_n`, `t2_star_n`, `t2_star_e`.
    Coherence,
    Entanglement,
}

impl NoiseSpec {
    pub fn entanglement() -> Self {
        Self { preset: NoisePreset::Entanglement, ..Default::default() }
    }

    pub fn resolve(&self, seed: u64) -> Result<NoiseModel, CliError> {
        let mut m = match self.preset {
            NoisePreset::Noiseless => {
                if self.t2_rabi_n.is_some() || self.t2_star_n.is_some() || self.t2_star_e.is_some() {
                    return Err(CliError::invalid("coherence times need preset = \"coherence\""));
                }
                NoiseModel::noiseless()
            }
            NoisePreset::Entanglement => NoiseModel::entanglement_defaults(),
            NoisePreset::Coherence => {
                let need = |v: Option<f64>, name: &str| {
                    v.ok_or_else(|| CliError::invalid(format!("preset \"coherence\" needs {name}")))
                };
                // A missing time means that channel is noiseless.
                let t = |v: Option<f64>| v.unwrap_or(f64::INFINITY);
                need(self.t2_star_n.or(self.t2_rabi_n).or(self.t2_star_e), "at least one of t2_rabi_n, t2_star_n, t2_star_e")?;
                NoiseModel::from_coherence_times(t(self.t2_rabi_n), t(self.t2_star_n), t(self.t2_star_e))
            }
        };
        if let Some(v) = self.sigma_ix { m.sigma_ix = v; }
        if let Some(v) = self.sigma_iz { m.sigma_iz = v; }
        if let Some(v) = self.sigma_sz { m.sigma_sz = v; }
        if let Some(v) = self.spectator_flip_prob { m.spectator_flip_prob = v; }
        if let Some(v) = self.pulse_length_error { m.pulse_length_error = v; }
        if let Some(v) = self.pulse_length_shape { m.pulse_length_shape = v; }
        m.seed = seed;
        m.validate()?;
        Ok(m)
    }
}

/// Inclusive sweep axis: either explicit `values`, or `start`/`stop` with
/// `points` or `step`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

const MAX_GRID_POINTS: usize = 1_000_000;

impl Grid {
    pub fn values(values: Vec<f64>) -> Self {
        Self { values: Some(values), ..Default::default() }
    }

    pub fn linspace(start: f64, stop: f64, points: usize) -> Self {
        Self { start: Some(start), stop: Some(stop), points: Some(points), ..Default::default() }
    }

    pub fn stepped(start: f64, stop: f64, step: f64) -> Self {
        Self { start: Some(start), stop: Some(stop), step: Some(step), ..Default::default() }
    }

    pub fn expand(&self, what: &str) -> Result<Vec<f64>, CliError> {
        let bad = |msg: &str| CliError::invalid(format!("{what}: {msg}"));
        let v = match (&self.values, self.start, self.stop, self.points, self.step) {
            (Some(v), None, None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n), None) => {
                if n == 0 || n > MAX_GRID_POINTS {
                    return Err(bad("points must be in 1..=1000000"));
                }
                if n == 1 {
                    vec![a]
                } else {
                    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
                }
            }
            (None, Some(a), Some(b), None, Some(h)) => {
                if !(h > 0.0) || b < a {
                    return Err(bad("step must be > 0 with stop ≥ start"));
                }
                let n = ((b - a) / h + 1e-9).floor() as usize + 1;
                if n > MAX_GRID_POINTS {
                    return Err(bad("too many points"));
                }
                (0..n).map(|k| a + h * k as f64).collect()
            }
            _ => return Err(bad("give either `values`, or `start`, `stop` and one of `points`/`step`")),
        };
        if v.is_empty() {
            return Err(bad("no values"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(bad("values must be finite"));
        }
        Ok(v)
    }
}

/// NMR frequency × duration map. Detuning is relative to the bare line f_n⁰.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChevronJob {
    pub detuning_khz: Grid,
    pub duration_us: Grid,
    pub nmr: NmrSettings,
}

impl Default for ChevronJob {
    fn default() -> Self {
        Self {
            detuning_khz: Grid::linspace(-10.0, 10.0, 41),
            duration_us: Grid::linspace(25.0, 1000.0, 40),
            nmr: NmrSettings::default(),
        }
    }
}

/// Detuning is relative to the configured NMR line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RabiJob {
    pub duration_us: Grid,
    pub detuning_khz: f64,
    pub nmr: NmrSettings,
}

impl Default for RabiJob {
    fn default() -> Self {
        Self {
            duration_us: Grid::linspace(25.0, 2000.0, 80),
            detuning_khz: 0.0,
            nmr: NmrSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RamseyJob {
    pub tau_us: Grid,
    pub detuning_khz: f64,
    pub nmr: NmrSettings,
}

impl Default for RamseyJob {
    fn default() -> Self {
        Self {
            tau_us: Grid::stepped(0.0, 15000.0, 125.0),
            detuning_khz: 0.6,
            nmr: NmrSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HahnJob {
    pub tau_us: Grid,
    pub nmr: NmrSettings,
}

impl Default for HahnJob {
    fn default() -> Self {
        Self {
            tau_us: Grid::stepped(0.0, 24000.0, 500.0),
            nmr: NmrSettings::default(),
        }
    }
}

/// Bell tomography, also used by `error-budget`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BellJob {
    /// Apply the asymmetric electron readout and correct it by inversion.
    pub readout_correction: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preparations: Option<u64>,
    pub calibration_points: usize,
    pub curve_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub esr_rabi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmr_rabi: Option<f64>,
}

impl Default for BellJob {
    fn default() -> Self {
        Self {
            readout_correction: false,
            preparations: None,
            calibration_points: 12,
            curve_points: 13,
            esr_rabi: None,
            nmr_rabi: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShuttleJob {
    pub variant: ShuttleVariant,
    /// t_load (μs), cycle counts, or readout phases (deg).
    pub values: Grid,
    pub tau_0: f64,
    pub t_ramp: f64,
    pub settings: ShuttleSettings,
}

impl Default for ShuttleJob {
    fn default() -> Self {
        Self {
            variant: ShuttleVariant::Phase,
            values: Grid::stepped(0.0, 20.0, 0.25),
            tau_0: 500.0,
            t_ramp: 1.0,
            settings: ShuttleSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutJob {
    pub model: NuclearReadoutConfig,
    /// Inclusive shot-count range `A..B`; when set the output is the curve.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_m: Option<String>,
}

impl Default for ReadoutJob {
    fn default() -> Self {
        Self { model: NuclearReadoutConfig::default(), scan_m: None }
    }
}

/// Parses `A..B` (inclusive) into a shot-count range.
pub fn parse_m_range(s: &str) -> Result<(u32, u32), CliError> {
    let bad = || CliError::invalid(format!("scan range must look like 1..50, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a < 1 || b < a {
        return Err(CliError::invalid("scan range needs 1 ≤ A ≤ B"));
    }
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperfineMode {
    /// Mean number of sites with |A| ≥ threshold at one diameter.
    Count,
    /// P(at least one site ≥ threshold) versus diameter.
    Curves,
    /// Largest lattice coupling versus diameter and field.
    MaxCoupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperfineJob {
    pub mode: HyperfineMode,
    pub diameter_nm: Grid,
    /// Vertical field (MV/m); a grid only in `max_coupling` mode.
    pub field_mv_per_m: Grid,
    pub ppm: f64,
    pub thresholds_khz: Vec<f64>,
    pub k_hf: f64,
    /// Defaults to the run's trial count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
}

impl Default for HyperfineJob {
    fn default() -> Self {
        Self {
            mode: HyperfineMode::Count,
            diameter_nm: Grid::values(vec![8.0]),
            field_mv_per_m: Grid::values(vec![10.0]),
            ppm: 800.0,
            thresholds_khz: vec![100.0],
            k_hf: K_HF_DEFAULT,
            draws: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VanvleckJob {
    pub geometry: ElectrodeGeometry,
    pub standoff_nm: Grid,
    pub species: SpinSpecies,
    pub orientation: Orientation,
}

impl Default for VanvleckJob {
    fn default() -> Self {
        Self {
            geometry: ElectrodeGeometry::default(),
            standoff_nm: Grid::values(vec![2.0, 5.0, 10.0, 20.0, 40.0]),
            species: SpinSpecies::default(),
            orientation: Orientation::SingleCrystal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Sinusoid,
    Ramsey,
    Hahn,
    CoherenceDecay,
    Esr,
    FlipIntervals,
}

/// Input is a CSV file, or synthetic data drawn from the run seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitJob {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<FitModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Defaults to the first column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_column: Option<String>,
    /// Defaults to the first `p_` column, else the second column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic_esr: Option<SyntheticEsr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic_intervals: Option<SyntheticIntervals>,
}

/// ESR centre frequencies drawn from four Gaussians at f0 ± a1 ± a2 (kHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticEsr {
    pub f0: f64,
    pub a1: f64,
    pub a2: f64,
    pub sigma: f64,
    pub weights: [f64; 4],
    pub samples: usize,
}

/// Exponential waiting times with the given mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticIntervals {
    pub mean: f64,
    pub samples: usize,
}

/// A run with every default and override applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedRun {
    pub spec: RunSpec,
    pub seed: u64,
    pub trials: usize,
    pub format: Format,
    pub params: SpinSystemParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub format: Option<Format>,
}

pub const DEFAULT_TRIALS: usize = 100;

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let c: RunConfig = toml::from_str(text).map_err(|e| CliError::invalid(format!("{origin}: {e}")))?;
        if c.runs.is_empty() {
            return Err(CliError::invalid(format!("{origin}: config has no [[run]] tables")));
        }
        Ok(c)
    }

    pub fn single(run: RunSpec) -> Self {
        Self {
            figure: None,
            description: String::new(),
            seed: None,
            trials: None,
            params: None,
            noise: None,
            runs: vec![run],
        }
    }

    pub fn resolve(&self, ov: &Overrides) -> Result<Vec<ResolvedRun>, CliError> {
        let mut names = std::collections::HashSet::new();
        self.runs
            .iter()
            .map(|r| {
                if r.name.is_empty() || !r.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) {
                    return Err(CliError::invalid(format!("run name {:?} must be non-empty [A-Za-z0-9_.-]", r.name)));
                }
                if !names.insert(r.name.clone()) {
                    return Err(CliError::invalid(format!("duplicate run name {:?}", r.name)));
                }
                self.resolve_run(r, ov).map_err(|e| match e {
                    CliError::Invalid(m) => CliError::Invalid(format!("run {:?}: {m}", r.name)),
                    e => e,
                })
            })
            .collect()
    }

    fn resolve_run(&self, r: &RunSpec, ov: &Overrides) -> Result<ResolvedRun, CliError> {
        let present = r.sections();
        let expected = RunSpec::section_for(r.experiment);
        if let Some(extra) = present.iter().find(|s| Some(**s) != expected) {
            return Err(CliError::invalid(format!(
                "section [{extra}] does not apply to experiment {:?}",
                r.experiment.name()
            )));
        }
        let spec = r.clone().with_default_section();
        let seed = ov.seed.or(r.seed).or(self.seed).unwrap_or(0);
        let trials = ov.trials.or(r.trials).or(self.trials).unwrap_or(DEFAULT_TRIALS);
        if trials < 1 {
            return Err(CliError::invalid("trials must be ≥ 1"));
        }
        let params = r.params.or(self.params).unwrap_or_default();
        params.validate()?;
        let noise = if r.experiment.uses_noise() {
            let fallback = match r.experiment {
                Experiment::Bell | Experiment::ErrorBudget => NoiseSpec::entanglement(),
                _ => NoiseSpec::default(),
            };
            Some(r.noise.or(self.noise).unwrap_or(fallback).resolve(seed)?)
        } else {
            if r.noise.is_some() {
                return Err(CliError::invalid(format!("experiment {:?} takes no noise model", r.experiment.name())));
            }
            None
        };
        let format = ov.format.or(r.format).unwrap_or(r.experiment.default_format());
        let run = ResolvedRun { spec, seed, trials, format, params, noise };
        crate::run::validate(&run)?;
        Ok(run)
    }

    /// Runs matching `experiment`; an error if there are none.
    pub fn only(mut self, experiment: Experiment) -> Result<Self, CliError> {
        self.runs.retain(|r| r.experiment == experiment);
        if self.runs.is_empty() {
            return Err(CliError::invalid(format!("config has no run with experiment = {:?}", experiment.name())));
        }
        Ok(self)
    }
}

impl ResolvedRun {
    /// Canonical text of the resolved run, hashed into the provenance block.
    pub fn canonical(&self) -> Result<String, CliError> {
        serde_json::to_string(self).map_err(|e| CliError::invalid(e.to_string()))
    }
}

/// Bundled figure configs, embedded at build time.
pub const FIGURES: [(&str, &str); 11] = [
    ("2e", include_str!("../configs/2e.toml")),
    ("2f", include_str!("../configs/2f.toml")),
    ("2g-j", include_str!("../configs/2g-j.toml")),
    ("3c-e", include_str!("../configs/3c-e.toml")),
    ("4b", include_str!("../configs/4b.toml")),
    ("4d", include_str!("../configs/4d.toml")),
    ("4f", include_str!("../configs/4f.toml")),
    ("ext1", include_str!("../configs/ext1.toml")),
    ("s1", include_str!("../configs/s1.toml")),
    ("s2", include_str!("../configs/s2.toml")),
    ("m-opt", include_str!("../configs/m-opt.toml")),
];

pub fn figure(id: &str) -> Result<RunConfig, CliError> {
    let id = id.to_ascii_lowercase();
    let id = match id.as_str() {
        "2g" | "2h" | "2i" | "2j" => "2g-j",
        "3c" | "3d" | "3e" => "3c-e",
        other => other,
    };
    let (name, text) = FIGURES
        .iter()
        .find(|(n, _)| *n == id)
        .ok_or_else(|| {
            let known: Vec<&str> = FIGURES.iter().map(|(n, _)| *n).collect();
            CliError::invalid(format!("unknown figure {id:?}; known: {}", known.join(", ")))
        })?;
    RunConfig::parse(text, &format!("configs/{name}.toml"))
}

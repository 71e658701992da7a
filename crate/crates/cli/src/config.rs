//! Run configuration: one TOML file with global keys and per-command
//! sections, validated against a closed schema (unknown keys are rejected).
//! Command-line flags override the matching keys, and the fully resolved
//! configuration is embedded in every run manifest as JSON.

use crate::io::sha256_hex;
use crate::{Failure, Overrides};
use dah_core::competitors::CompetitorKind;
use dah_core::trajectory::DahDefinition;
use dah_core::trial::default_sample_grid;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Master seed for every random stream in the run.
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub calibrate: CalibrateSection,
    #[serde(default)]
    pub power: PowerSection,
}

/// Follow-up window and outcome definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    /// Follow-up length in days.
    pub u: i64,
    /// Protocol hospital stay length in days.
    pub ptilde: i64,
    /// "dah" or "dooh".
    pub definition: String,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self { u: 90, ptilde: 4, definition: "dah".into() }
    }
}

/// Which generating/fitted model the command works with.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// dnc | zabb | zab | flognormal | zifpoisson | fnb.
    pub kind: String,
    /// Support shift (days) for benchmark models; ignored by dnc.
    pub shift: i64,
    /// Treatment coefficient used when generating two-arm scenarios.
    pub effect: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { kind: "dnc".into(), shift: 0, effect: -1.35 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// Information-criterion penalty per parameter.
    pub gaic_k: f64,
    /// Select covariates by stepwise search instead of fitting the full
    /// reference structure.
    pub stepwise: bool,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { gaic_k: 2.0, stepwise: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Cohort size.
    pub n: usize,
    /// "components" (one row per patient) or "trajectories" (one row per
    /// patient-day; composite model only).
    pub output: String,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { n: 500, output: "components".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseSection {
    /// Bootstrap replicates for the Q-Q envelope.
    pub replicates: usize,
    /// Number of probability grid points.
    pub grid: usize,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self { replicates: 500, grid: 250 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    /// Bootstrap replicates for each model's Q-Q envelope.
    pub replicates: usize,
    /// Number of probability grid points.
    pub grid: usize,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self { replicates: 500, grid: 250 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateSection {
    /// Target between-arm difference in median outcome (days).
    pub target: f64,
    /// Treatment-coefficient grid: start, stop, and step.
    pub grid_start: f64,
    pub grid_stop: f64,
    pub grid_step: f64,
    /// Simulated patients per arm per grid point.
    pub sim_n: usize,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self { target: 2.0, grid_start: -2.2, grid_stop: 0.0, grid_step: 0.1, sim_n: 200_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerSection {
    /// Total sample sizes to evaluate; empty means the default design grid
    /// (100 to 450 by 50, then 500 to 2000 by 100).
    pub n_grid: Vec<usize>,
    /// Monte Carlo replicates per grid point.
    pub reps: usize,
    /// Test size.
    pub alpha: f64,
    /// Power level the minimum sample size must reach.
    pub target_power: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self { n_grid: Vec::new(), reps: 10_000, alpha: 0.05, target_power: 0.9 }
    }
}

/// The model a command operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    /// The composite (divide-and-conquer) model.
    Composite,
    /// One of the single-distribution benchmark models.
    Competitor(CompetitorKind),
}

impl ModelChoice {
    pub fn parse(code: &str) -> Result<Self, Failure> {
        Ok(match code {
            "dnc" => ModelChoice::Composite,
            "zabb" => ModelChoice::Competitor(CompetitorKind::ZeroAdjustedBetaBinomial),
            "zab" => ModelChoice::Competitor(CompetitorKind::ZeroAdjustedBeta),
            "flognormal" => ModelChoice::Competitor(CompetitorKind::FlippedLogNormal),
            "zifpoisson" => ModelChoice::Competitor(CompetitorKind::ZeroInflatedFlippedPoisson),
            "fnb" => ModelChoice::Competitor(CompetitorKind::FlippedNegativeBinomial),
            other => {
                return Err(Failure::Config(format!(
                    "unknown model {other:?}; expected dnc, zabb, zab, flognormal, zifpoisson, or fnb"
                )))
            }
        })
    }

    pub fn code(&self) -> &'static str {
        match self {
            ModelChoice::Composite => "dnc",
            ModelChoice::Competitor(CompetitorKind::ZeroAdjustedBetaBinomial) => "zabb",
            ModelChoice::Competitor(CompetitorKind::ZeroAdjustedBeta) => "zab",
            ModelChoice::Competitor(CompetitorKind::FlippedLogNormal) => "flognormal",
            ModelChoice::Competitor(CompetitorKind::ZeroInflatedFlippedPoisson) => "zifpoisson",
            ModelChoice::Competitor(CompetitorKind::FlippedNegativeBinomial) => "fnb",
        }
    }
}

/// Short code used in output tables for a benchmark model.
pub fn competitor_code(kind: CompetitorKind) -> &'static str {
    ModelChoice::Competitor(kind).code()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulateOutput {
    Components,
    Trajectories,
}

#[derive(Debug, Clone)]
pub struct ReplicateSettings {
    pub replicates: usize,
    pub grid: usize,
}

#[derive(Debug, Clone)]
pub struct CalibrateSettings {
    pub target: f64,
    pub grid: Vec<f64>,
    pub sim_n: usize,
}

#[derive(Debug, Clone)]
pub struct PowerSettings {
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub alpha: f64,
    pub target_power: f64,
}

/// Everything a command needs, resolved from the config file plus flags.
#[derive(Debug, Clone)]
pub struct Settings {
    pub command: &'static str,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub data: Option<PathBuf>,
    pub u: i64,
    pub p_tilde: i64,
    pub definition: DahDefinition,
    pub model: ModelChoice,
    pub shift: i64,
    pub model_effect: f64,
    pub gaic_k: f64,
    pub stepwise: bool,
    pub simulate_n: usize,
    pub simulate_output: SimulateOutput,
    pub diagnose: ReplicateSettings,
    pub compare: ReplicateSettings,
    pub calibrate: CalibrateSettings,
    pub power: PowerSettings,
    /// The resolved configuration as JSON, for the manifest.
    pub resolved: serde_json::Value,
    pub config_sha256: String,
}

fn load_raw(overrides: &Overrides) -> Result<ScenarioConfig, Failure> {
    match &overrides.config {
        None => Ok(ScenarioConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::Config(format!("cannot read config file {}: {e}", path.display()))
            })?;
            toml::from_str(&text).map_err(|e| {
                Failure::Config(format!("invalid config file {}: {e}", path.display()))
            })
        }
    }
}

fn apply_overrides(raw: &mut ScenarioConfig, overrides: &Overrides) {
    if let Some(seed) = overrides.seed {
        raw.seed = Some(seed);
    }
    if let Some(dir) = &overrides.out_dir {
        raw.out_dir = Some(dir.clone());
    }
    if let Some(reps) = overrides.reps {
        raw.power.reps = reps;
    }
    if let Some(alpha) = overrides.alpha {
        raw.power.alpha = alpha;
    }
    if let Some(k) = overrides.gaic_k {
        raw.fit.gaic_k = k;
    }
    if let Some(def) = &overrides.dah_definition {
        raw.window.definition = def.clone();
    }
    if let Some(p) = overrides.ptilde {
        raw.window.ptilde = p;
    }
    if let Some(model) = &overrides.model {
        raw.model.kind = model.clone();
    }
}

fn config_err(msg: String) -> Failure {
    Failure::Config(msg)
}

/// Build the coefficient grid from (start, stop, step) by index, so float
/// accumulation cannot shorten or lengthen it.
fn calibration_grid(section: &CalibrateSection) -> Result<Vec<f64>, Failure> {
    let CalibrateSection { grid_start, grid_stop, grid_step, .. } = *section;
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(config_err(format!("calibrate.grid_step {grid_step} must be positive")));
    }
    if !(grid_start < grid_stop) {
        return Err(config_err(format!(
            "calibrate grid start {grid_start} must lie below stop {grid_stop}"
        )));
    }
    let steps = ((grid_stop - grid_start) / grid_step).round() as usize;
    if steps < 1 {
        return Err(config_err("calibrate grid needs at least two points".into()));
    }
    Ok((0..=steps).map(|i| grid_start + i as f64 * grid_step).collect())
}

pub fn resolve(command: &'static str, overrides: &Overrides) -> Result<Settings, Failure> {
    let mut raw = load_raw(overrides)?;
    apply_overrides(&mut raw, overrides);

    let seed = raw.seed.ok_or_else(|| {
        config_err("a master seed is required; set `seed` in the config or pass --seed".into())
    })?;
    let out_dir = raw.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));

    let u = raw.window.u;
    if u <= 0 {
        return Err(config_err(format!("window.u {u} must be positive")));
    }
    let p_tilde = raw.window.ptilde;
    if !(0..=u).contains(&p_tilde) {
        return Err(config_err(format!("window.ptilde {p_tilde} outside 0..={u}")));
    }
    let definition = DahDefinition::from_str(&raw.window.definition)
        .map_err(|e| config_err(e.to_string()))?;

    let model = ModelChoice::parse(&raw.model.kind)?;
    let shift = raw.model.shift;
    if !(0..=u).contains(&shift) {
        return Err(config_err(format!("model.shift {shift} outside 0..={u}")));
    }
    if !raw.model.effect.is_finite() {
        return Err(config_err(format!("model.effect {} must be finite", raw.model.effect)));
    }

    if !(raw.fit.gaic_k > 0.0 && raw.fit.gaic_k.is_finite()) {
        return Err(config_err(format!("fit.gaic_k {} must be positive", raw.fit.gaic_k)));
    }

    if raw.simulate.n == 0 {
        return Err(config_err("simulate.n must be positive".into()));
    }
    let simulate_output = match raw.simulate.output.as_str() {
        "components" => SimulateOutput::Components,
        "trajectories" => SimulateOutput::Trajectories,
        other => {
            return Err(config_err(format!(
                "unknown simulate.output {other:?}; expected components or trajectories"
            )))
        }
    };
    if simulate_output == SimulateOutput::Trajectories && model != ModelChoice::Composite {
        return Err(config_err(
            "benchmark models generate outcome totals only; trajectory output needs model dnc"
                .into(),
        ));
    }

    for (label, section) in
        [("diagnose", (raw.diagnose.replicates, raw.diagnose.grid)), ("compare", (raw.compare.replicates, raw.compare.grid))]
    {
        if section.0 == 0 || section.1 == 0 {
            return Err(config_err(format!(
                "{label}.replicates and {label}.grid must be positive"
            )));
        }
    }

    if !raw.calibrate.target.is_finite() {
        return Err(config_err(format!(
            "calibrate.target {} must be finite",
            raw.calibrate.target
        )));
    }
    if raw.calibrate.sim_n == 0 {
        return Err(config_err("calibrate.sim_n must be positive".into()));
    }
    let grid = calibration_grid(&raw.calibrate)?;

    let n_grid = if raw.power.n_grid.is_empty() {
        default_sample_grid()
    } else {
        raw.power.n_grid.clone()
    };
    if n_grid.iter().any(|&n| n < 2) {
        return Err(config_err("every power.n_grid entry must be at least 2".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err("power.n_grid must be strictly increasing".into()));
    }
    if raw.power.reps < 100 {
        return Err(config_err(format!(
            "power.reps {} cannot estimate a rejection rate; use at least 100",
            raw.power.reps
        )));
    }
    if !(raw.power.alpha > 0.0 && raw.power.alpha < 1.0) {
        return Err(config_err(format!("power.alpha {} outside (0, 1)", raw.power.alpha)));
    }
    if !(raw.power.target_power > 0.0 && raw.power.target_power < 1.0) {
        return Err(config_err(format!(
            "power.target_power {} outside (0, 1)",
            raw.power.target_power
        )));
    }
    if let Some(threads) = overrides.threads {
        if threads == 0 {
            return Err(config_err("--threads must be positive".into()));
        }
    }

    let resolved = serde_json::to_value(&raw)
        .map_err(|e| Failure::Io(format!("cannot serialize resolved config: {e}")))?;
    let config_sha256 = sha256_hex(
        serde_json::to_vec(&resolved)
            .map_err(|e| Failure::Io(format!("cannot serialize resolved config: {e}")))?
            .as_slice(),
    );

    Ok(Settings {
        command,
        seed,
        out_dir,
        threads: overrides.threads,
        data: overrides.data.clone(),
        u,
        p_tilde,
        definition,
        model,
        shift,
        model_effect: raw.model.effect,
        gaic_k: raw.fit.gaic_k,
        stepwise: raw.fit.stepwise,
        simulate_n: raw.simulate.n,
        simulate_output,
        diagnose: ReplicateSettings { replicates: raw.diagnose.replicates, grid: raw.diagnose.grid },
        compare: ReplicateSettings { replicates: raw.compare.replicates, grid: raw.compare.grid },
        calibrate: CalibrateSettings {
            target: raw.calibrate.target,
            grid,
            sim_n: raw.calibrate.sim_n,
        },
        power: PowerSettings {
            n_grid,
            reps: raw.power.reps,
            alpha: raw.power.alpha,
            target_power: raw.power.target_power,
        },
        resolved,
        config_sha256,
    })
}

impl Settings {
    /// The input data path, required by fit/diagnose/compare.
    pub fn data_path(&self) -> Result<&PathBuf, Failure> {
        self.data.as_ref().ok_or_else(|| {
            Failure::Config(format!("the {} command needs --data <FILE>", self.command))
        })
    }
}

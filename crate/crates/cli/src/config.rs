//! Run configuration as read from TOML.
//!
//! Frequencies in files are ω/2π in GHz and times are in ns; the loader
//! converts to the rad/s and s used by the library. Filter and etalon
//! bandwidths are plain FWHM frequencies in GHz (no factor 2π).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qdsaw_core::units::{ghz, ns};
use qdsaw_core::{SolverConfig, SystemParams, TimeGrid};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub system: SystemConfig,
    pub pulse: PulseConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverFileConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_omega_saw() -> f64 {
    3.5881
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub delta_ghz: f64,
    #[serde(default = "default_omega_saw")]
    pub omega_saw_ghz: f64,
    #[serde(default)]
    pub g_ghz: f64,
    #[serde(default)]
    pub phi_rad: f64,
    #[serde(default)]
    pub gamma_qd_ghz: f64,
    #[serde(default)]
    pub gamma_z_ghz: f64,
}

impl SystemConfig {
    pub fn to_params(&self) -> CliResult<SystemParams> {
        let p = SystemParams {
            delta: ghz(self.delta_ghz),
            omega_saw: ghz(self.omega_saw_ghz),
            g: ghz(self.g_ghz),
            phi: self.phi_rad,
            gamma_qd: ghz(self.gamma_qd_ghz),
            gamma_z: ghz(self.gamma_z_ghz),
            g0: None,
            n_phonons: None,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    /// Registered shape name.
    pub shape: String,
    pub peak_rabi_ghz: f64,
    #[serde(default)]
    pub start_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ns: Option<f64>,
    #[serde(default)]
    pub rise_ns: f64,
    #[serde(default)]
    pub fall_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etalon_bandwidth_ghz: Option<f64>,
    /// Envelope file for `measured`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t0_ns: f64,
    pub t_end_ns: f64,
    pub dt_ns: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t0_ns: 0.0,
            t_end_ns: 3.0,
            dt_ns: 0.001,
        }
    }
}

impl GridConfig {
    pub fn to_grid(&self) -> CliResult<TimeGrid> {
        Ok(TimeGrid::spanning(ns(self.t0_ns), ns(self.t_end_ns), ns(self.dt_ns))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverFileConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step_ns: f64,
    pub output_dt_ns: f64,
}

impl Default for SolverFileConfig {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            max_step_ns: d.max_step * 1e9,
            output_dt_ns: d.output_dt * 1e9,
        }
    }
}

impl SolverFileConfig {
    pub fn to_solver(&self) -> CliResult<SolverConfig> {
        let c = SolverConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: ns(self.max_step_ns),
            output_dt: ns(self.output_dt_ns),
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Ground,
    Excited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of mechanical phases averaged; 1 runs the configured φ only.
    pub n_phases: usize,
    #[serde(default)]
    pub initial: InitialState,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_phases: 1,
            initial: InitialState::Ground,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    CwScattering,
    Excitation,
    FilteredTime,
    IntegratedFiltered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub kind: SpectrumKind,
    #[serde(default = "default_lo")]
    pub detuning_min_ghz: f64,
    #[serde(default = "default_hi")]
    pub detuning_max_ghz: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_center_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_bandwidth_ghz: Option<f64>,
    #[serde(default = "default_window")]
    pub window_ns: f64,
    #[serde(default = "default_period_samples")]
    pub n_period_samples: usize,
}

fn default_lo() -> f64 {
    -8.0
}
fn default_hi() -> f64 {
    8.0
}
fn default_points() -> usize {
    321
}
fn default_window() -> f64 {
    20.0
}
fn default_period_samples() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub points: usize,
    /// Relative (multiplicative) Gaussian noise.
    pub noise: f64,
    /// True value of the model parameter used to generate the data.
    pub truth: f64,
    #[serde(default = "default_dbm_lo")]
    pub min_dbm: f64,
    #[serde(default = "default_dbm_hi")]
    pub max_dbm: f64,
}

fn default_dbm_lo() -> f64 {
    -50.0
}
fn default_dbm_hi() -> f64 {
    -35.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Registered calibration model name.
    pub model: String,
    /// Data table relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default = "default_readout")]
    pub readout_ns: f64,
    #[serde(default = "default_bin")]
    pub bin_ns: f64,
    /// Power [W] giving `reference_rabi_ghz`, for the occupancy model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_power_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_rabi_ghz: Option<f64>,
}

fn default_readout() -> f64 {
    0.14
}
fn default_bin() -> f64 {
    0.016
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    /// `min_bare_occupancy` or `max_enhancement`.
    pub objective: String,
    pub readout_delay_ns: f64,
    pub search_min_ns: f64,
    pub search_max_ns: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_phases")]
    pub n_phases: usize,
}

fn default_floor() -> f64 {
    qdsaw_core::experiments::DEFAULT_FLOOR
}
fn default_phases() -> usize {
    qdsaw_core::experiments::DEFAULT_PHASES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Dotted path of a numeric field, e.g. `system.g_ghz`.
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config(format!("at `{}`: {}", e.path(), e.inner().message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        // make file references independent of the working directory
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(f) = cfg.pulse.file.as_mut() {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        if let Some(c) = cfg.calibration.as_mut() {
            if let Some(d) = c.data.as_mut() {
                if d.is_relative() {
                    *d = base.join(&*d);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "at `schema_version`: unsupported version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.system.to_params()?;
        self.grid.to_grid()?;
        self.solver.to_solver()?;
        if self.experiment.n_phases == 0 {
            return Err(CliError::Config("at `experiment.n_phases`: must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 of the canonical JSON form; independent of formatting and key
    /// order in the source file.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config is always representable as JSON");
        hex::encode(Sha256::digest(&canonical))
    }

    /// Copy of the config with the numeric field at `path` replaced.
    pub fn with_field(&self, path: &str, value: f64) -> CliResult<Self> {
        let mut tree = serde_json::to_value(self).map_err(|e| CliError::Config(e.to_string()))?;
        let mut node = &mut tree;
        for key in path.split('.') {
            node = node
                .get_mut(key)
                .ok_or_else(|| CliError::Config(format!("sweep axis `{path}` does not resolve (at `{key}`)")))?;
        }
        if !(node.is_number() || node.is_null()) {
            return Err(CliError::Config(format!("sweep axis `{path}` is not a numeric field")));
        }
        *node = if node.is_u64() {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(CliError::Config(format!(
                    "sweep axis `{path}` needs non-negative integers"
                )));
            }
            serde_json::json!(value as u64)
        } else {
            serde_json::json!(value)
        };
        let cfg: RunConfig = serde_json::from_value(tree).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

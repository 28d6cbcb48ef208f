//! Scenario files. Strict JSON: unknown keys are rejected, and every
//! dimensional key carries its unit (`_GHz`, `_ps`, `_nW`, `_nm`, `_rad`).
//! Frequencies are ordinary GHz at the boundary and become rad/ns on
//! resolution (ω = 2πf).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use jcsim_core::detection::{rabi_from_power, BackgroundModel};
use jcsim_core::hilbert::RateSet;
use jcsim_core::twolaser::{LadderConfig, ModelKind, TwoLaserScenario};
use jcsim_core::units::ghz_to_rad_ns;

use crate::CliError;

pub const DEFAULT_N_MAX: usize = 10;
pub const DEFAULT_ETA_DET: f64 = jcsim_core::correlator::DEFAULT_ETA_DET;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Command the file is meant for. `validate` uses it to pick which
    /// checks apply; other commands warn on a mismatch.
    pub task: Option<Task>,
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub basis: BasisConfig,
    pub drive: Option<DriveConfig>,
    #[serde(default)]
    pub background: BackgroundConfig,
    #[serde(default)]
    pub detection: DetectionConfig,
    pub tau: Option<TauConfig>,
    pub sweep: Option<SweepConfig>,
    pub two_laser: Option<TwoLaserConfig>,
    pub tmm: Option<TmmConfig>,
    pub fit: Option<FitConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Spectrum,
    G2,
    G2spec,
    Oracle,
    Tmm,
    Fit,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Spectrum => "spectrum",
            Task::G2 => "g2",
            Task::G2spec => "g2spec",
            Task::Oracle => "oracle",
            Task::Tmm => "tmm",
            Task::Fit => "fit",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "g_GHz")]
    pub g_ghz: f64,
    #[serde(rename = "kappa_GHz")]
    pub kappa_ghz: Option<f64>,
    #[serde(rename = "gamma_GHz")]
    pub gamma_ghz: Option<f64>,
    pub g_over_kappa: Option<f64>,
    pub g_over_gamma: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub n_max: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { n_max: DEFAULT_N_MAX }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(rename = "omega_rabi_GHz")]
    pub omega_rabi_ghz: Option<f64>,
    #[serde(rename = "power_nW")]
    pub power_nw: Option<f64>,
    #[serde(rename = "P0_nW")]
    pub p0_nw: Option<f64>,
    #[serde(rename = "delta_L_GHz", default)]
    pub delta_l_ghz: f64,
    #[serde(rename = "delta_C_GHz", default)]
    pub delta_c_ghz: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundModeConfig {
    #[default]
    Off,
    FixedSbr,
    PowerProportional,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundConfig {
    #[serde(default)]
    pub background_mode: BackgroundModeConfig,
    pub sbr: Option<f64>,
    #[serde(default)]
    pub background_phase_rad: f64,
    /// Background |α|² for fixed-SBR mode. Defaults to the background-free
    /// ⟨a†a⟩ with the laser on the lower first-rung polariton.
    pub alpha_abs2: Option<f64>,
    /// Second-splitter coefficient for power-proportional mode.
    pub eta2: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    #[serde(default = "default_eta")]
    pub eta_det: f64,
    pub tau_det_ps: Option<f64>,
}

fn default_eta() -> f64 {
    DEFAULT_ETA_DET
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { eta_det: DEFAULT_ETA_DET, tau_det_ps: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauConfig {
    pub step_ps: f64,
    pub span_ps: f64,
}

/// Either `{start, stop, points}` or an explicit list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range(RangeGrid),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self, field: &str) -> Result<Vec<f64>, CliError> {
        let v = match self {
            Grid::List(v) => v.clone(),
            Grid::Range(r) => {
                if r.points < 2 || !(r.stop > r.start) {
                    return Err(CliError::config(field, "range needs stop > start and at least 2 points"));
                }
                // Snapped to 12 significant digits so CSVs echo `-1.7`, not
                // `-1.7000000000000002`.
                (0..r.points)
                    .map(|k| r.start + (r.stop - r.start) * k as f64 / (r.points - 1) as f64)
                    .map(|v| format!("{v:.11e}").parse().expect("formatted float parses"))
                    .collect()
            }
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::config(field, "grid must be non-empty and finite"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "delta_L_GHz")]
    pub delta_l_ghz: Option<Grid>,
    #[serde(rename = "delta_C_GHz")]
    pub delta_c_ghz: Option<Grid>,
    #[serde(rename = "power_nW")]
    pub power_nw: Option<Grid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderConfigName {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLaserConfig {
    pub config: LadderConfigName,
    #[serde(rename = "omega1_GHz")]
    pub omega1_ghz: f64,
    #[serde(rename = "omega2_GHz")]
    pub omega2_ghz: f64,
    #[serde(rename = "delta1_GHz")]
    pub delta1_ghz: f64,
    #[serde(rename = "delta_C_GHz")]
    pub delta_c_ghz: f64,
    #[serde(rename = "delta2_GHz")]
    pub delta2_ghz: Grid,
    #[serde(default)]
    pub model: ModelName,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    #[default]
    LeadingOrder,
    /// Same four levels with exact dressed energies and matrix elements.
    Exact,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmmConfig {
    pub stack_path: PathBuf,
    pub wavelength_nm: Grid,
    /// Optional Fabry-Pérot estimate using this stack as both mirrors.
    pub cavity: Option<CavityConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub gap_nm: f64,
    pub wavelength_nm: f64,
    #[serde(default)]
    pub extra_loss_ppm: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// CSV with `delta_L_GHz, delta_C_GHz, signal_cts_per_s`.
    pub data_path: PathBuf,
    pub initial: SystemConfig,
}

/// Parses a scenario file, reporting JSON errors with their location.
pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: cannot read: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("line {} column {}: {e}", e.line(), e.column())))
}

/// Resolves paths in the config relative to the config file's directory.
pub fn resolve_path(config_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(field, &format!("must be finite and > 0, got {v}")))
    }
}

impl SystemConfig {
    /// Rates in rad/ns.
    pub fn rates(&self, prefix: &str) -> Result<RateSet, CliError> {
        let g = ghz_to_rad_ns(positive(&format!("{prefix}.g_GHz"), self.g_ghz)?);
        let kappa = match (self.kappa_ghz, self.g_over_kappa) {
            (Some(k), None) => ghz_to_rad_ns(positive(&format!("{prefix}.kappa_GHz"), k)?),
            (None, Some(r)) => g / positive(&format!("{prefix}.g_over_kappa"), r)?,
            _ => return Err(CliError::config(prefix, "give exactly one of kappa_GHz or g_over_kappa")),
        };
        let gamma = match (self.gamma_ghz, self.g_over_gamma) {
            (Some(x), None) => ghz_to_rad_ns(positive(&format!("{prefix}.gamma_GHz"), x)?),
            (None, Some(r)) => g / positive(&format!("{prefix}.g_over_gamma"), r)?,
            _ => return Err(CliError::config(prefix, "give exactly one of gamma_GHz or g_over_gamma")),
        };
        RateSet::new(g, kappa, gamma).map_err(|e| CliError::config(prefix, &e.to_string()))
    }
}

/// How the drive amplitude is specified after validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveAmplitude {
    Rabi(f64),
    Power { power_nw: f64, p0_nw: f64 },
}

impl DriveConfig {
    /// Exactly one amplitude specification: `omega_rabi_GHz`, or
    /// `power_nW` with `P0_nW`. When `allow_power_sweep` is set, `P0_nW`
    /// alone is accepted and the powers come from the sweep block.
    pub fn amplitude(&self, allow_power_sweep: bool) -> Result<Option<DriveAmplitude>, CliError> {
        match (self.omega_rabi_ghz, self.power_nw, self.p0_nw) {
            (Some(o), None, None) => {
                if !(o.is_finite() && o >= 0.0) {
                    return Err(CliError::config("drive.omega_rabi_GHz", "must be finite and >= 0"));
                }
                Ok(Some(DriveAmplitude::Rabi(ghz_to_rad_ns(o))))
            }
            (None, Some(p), Some(p0)) => {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(CliError::config("drive.power_nW", "must be finite and >= 0"));
                }
                Ok(Some(DriveAmplitude::Power { power_nw: p, p0_nw: positive("drive.P0_nW", p0)? }))
            }
            (None, None, Some(p0)) if allow_power_sweep => {
                positive("drive.P0_nW", p0)?;
                Ok(None)
            }
            (None, Some(_), None) => Err(CliError::config("drive", "power_nW needs P0_nW")),
            _ => Err(CliError::config(
                "drive",
                "give exactly one drive amplitude: omega_rabi_GHz, or power_nW with P0_nW",
            )),
        }
    }

    pub fn delta_l(&self) -> f64 {
        ghz_to_rad_ns(self.delta_l_ghz)
    }

    pub fn delta_c(&self) -> f64 {
        ghz_to_rad_ns(self.delta_c_ghz)
    }
}

impl DriveAmplitude {
    pub fn omega(&self, rates: &RateSet) -> Result<f64, CliError> {
        match *self {
            DriveAmplitude::Rabi(o) => Ok(o),
            DriveAmplitude::Power { power_nw, p0_nw } => {
                rabi_from_power(power_nw, p0_nw, rates).map_err(|e| CliError::config("drive", &e.to_string()))
            }
        }
    }
}

impl BackgroundConfig {
    /// Builds the background model. `resonant_photons` supplies the default
    /// |α|² for fixed-SBR mode and is only evaluated when needed.
    pub fn model(
        &self,
        power_nw: Option<f64>,
        resonant_photons: impl FnOnce() -> Result<f64, CliError>,
    ) -> Result<BackgroundModel, CliError> {
        let phase = self.background_phase_rad;
        if !phase.is_finite() {
            return Err(CliError::config("background.background_phase_rad", "must be finite"));
        }
        let err = |e: jcsim_core::Error| CliError::config("background", &e.to_string());
        match self.background_mode {
            BackgroundModeConfig::Off => {
                if self.sbr.is_some() || self.alpha_abs2.is_some() || self.eta2.is_some() {
                    return Err(CliError::config(
                        "background",
                        "background_mode is off but background parameters are set",
                    ));
                }
                Ok(BackgroundModel::none())
            }
            BackgroundModeConfig::FixedSbr => {
                let sbr = self.sbr.ok_or_else(|| CliError::config("background.sbr", "required for fixed_sbr"))?;
                let alpha = match self.alpha_abs2 {
                    Some(a) => a,
                    None => resonant_photons()?,
                };
                BackgroundModel::fixed_sbr(sbr, alpha, phase).map_err(err)
            }
            BackgroundModeConfig::PowerProportional => {
                let eta2 =
                    self.eta2.ok_or_else(|| CliError::config("background.eta2", "required for power_proportional"))?;
                let p = power_nw.ok_or_else(|| {
                    CliError::config("drive.power_nW", "power_proportional background needs a drive power")
                })?;
                BackgroundModel::power_proportional(p, eta2, phase).map_err(err)
            }
        }
    }
}

impl DetectionConfig {
    pub fn eta(&self) -> Result<f64, CliError> {
        if self.eta_det > 0.0 && self.eta_det <= 1.0 {
            Ok(self.eta_det)
        } else {
            Err(CliError::config("detection.eta_det", "must lie in (0, 1]"))
        }
    }
}

impl TwoLaserConfig {
    pub fn scenario(&self) -> TwoLaserScenario {
        TwoLaserScenario {
            omega1: ghz_to_rad_ns(self.omega1_ghz),
            omega2: ghz_to_rad_ns(self.omega2_ghz),
            delta1: ghz_to_rad_ns(self.delta1_ghz),
            delta2: 0.0,
            delta_c: ghz_to_rad_ns(self.delta_c_ghz),
            config: match self.config {
                LadderConfigName::Lower => LadderConfig::Lower,
                LadderConfigName::Upper => LadderConfig::Upper,
            },
        }
    }
}

impl ModelName {
    pub fn kind(self) -> ModelKind {
        match self {
            ModelName::LeadingOrder => ModelKind::LeadingOrder,
            ModelName::Exact => ModelKind::Exact,
        }
    }
}

impl ScenarioConfig {
    pub fn system(&self) -> Result<&SystemConfig, CliError> {
        self.system.as_ref().ok_or_else(|| CliError::config("system", "block is required for this command"))
    }

    pub fn rates(&self) -> Result<RateSet, CliError> {
        self.system()?.rates("system")
    }

    pub fn drive(&self) -> Result<&DriveConfig, CliError> {
        self.drive.as_ref().ok_or_else(|| CliError::config("drive", "block is required for this command"))
    }

    pub fn n_max(&self) -> Result<usize, CliError> {
        match self.basis.n_max {
            0 => Err(CliError::config("basis.n_max", "must be >= 1")),
            n if n > 40 => Err(CliError::config("basis.n_max", "above 40 the dense superoperator is impractical")),
            n => Ok(n),
        }
    }
}

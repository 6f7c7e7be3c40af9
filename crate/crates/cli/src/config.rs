//! JSON scenario configuration.
//!
//! Lengths are in multiples of `x0 = sqrt(hbar / (m omega0))`, momenta in
//! multiples of `p0 = hbar / x0`, times in `1/omega0`, frequencies in
//! `omega0` and energies in `hbar omega0`. Every field has a default, so `{}`
//! is the reference quench scenario.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use speedlimit_core::bounds::{BddotConvention, ClassicalModel, GridSpec, Scenario};
use speedlimit_core::brackets::MoyalOrder;
use speedlimit_core::dynamics::{FrequencyProfile, ProfileKind};
use speedlimit_core::phasegrid::{Measure, UnitSystem, MIN_NODES};
use speedlimit_core::states::GaussianSpec;

pub const MAX_NODES: usize = speedlimit_core::bounds::MAX_NODES;

#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}",
            self.path.display(),
            self.line,
            self.column,
            self.message
        )
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub units: UnitsConfig,
    pub grid: GridConfig,
    pub profile: ProfileConfig,
    pub state: StateConfig,
    pub time: TimeConfig,
    pub toggles: Toggles,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            units: UnitsConfig::default(),
            grid: GridConfig::default(),
            profile: ProfileConfig::SuddenQuench,
            state: StateConfig::default(),
            time: TimeConfig::default(),
            toggles: Toggles::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUnits")]
pub struct UnitsConfig {
    pub hbar: f64,
    pub mass: f64,
    pub omega0: f64,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawUnits {
    hbar: f64,
    mass: f64,
    omega0: f64,
}

impl Default for RawUnits {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            omega0: 1.0,
        }
    }
}

impl TryFrom<RawUnits> for UnitsConfig {
    type Error = String;

    fn try_from(r: RawUnits) -> Result<Self, String> {
        UnitSystem::new(r.hbar, r.mass, r.omega0).map_err(|e| e.to_string())?;
        Ok(Self {
            hbar: r.hbar,
            mass: r.mass,
            omega0: r.omega0,
        })
    }
}

impl Default for UnitsConfig {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            omega0: 1.0,
        }
    }
}

impl UnitsConfig {
    pub fn system(&self) -> UnitSystem {
        UnitSystem::new(self.hbar, self.mass, self.omega0).expect("validated on load")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeasureConfig {
    #[default]
    PaperGamma,
    Plain,
}

impl From<MeasureConfig> for Measure {
    fn from(m: MeasureConfig) -> Self {
        match m {
            MeasureConfig::PaperGamma => Measure::PaperGamma,
            MeasureConfig::Plain => Measure::Plain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GridConfig {
    /// Half-width of the `q` box in `x0`.
    pub q_extent: f64,
    /// Half-width of the `p` box in `p0`.
    pub p_extent: f64,
    pub n_q: usize,
    pub n_p: usize,
    pub measure: MeasureConfig,
    pub widen: bool,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawGrid {
    q_extent: f64,
    p_extent: f64,
    n_q: usize,
    n_p: usize,
    measure: MeasureConfig,
    widen: bool,
}

impl Default for RawGrid {
    fn default() -> Self {
        let g = GridConfig::default();
        Self {
            q_extent: g.q_extent,
            p_extent: g.p_extent,
            n_q: g.n_q,
            n_p: g.n_p,
            measure: g.measure,
            widen: g.widen,
        }
    }
}

impl TryFrom<RawGrid> for GridConfig {
    type Error = String;

    fn try_from(r: RawGrid) -> Result<Self, String> {
        for (name, n) in [("n_q", r.n_q), ("n_p", r.n_p)] {
            if !(MIN_NODES..=MAX_NODES).contains(&n) {
                return Err(format!(
                    "{name} must be in [{MIN_NODES}, {MAX_NODES}], got {n}"
                ));
            }
        }
        for (name, v) in [("q_extent", r.q_extent), ("p_extent", r.p_extent)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(Self {
            q_extent: r.q_extent,
            p_extent: r.p_extent,
            n_q: r.n_q,
            n_p: r.n_p,
            measure: r.measure,
            widen: r.widen,
        })
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            q_extent: 6.0,
            p_extent: 6.0,
            n_q: 512,
            n_p: 512,
            measure: MeasureConfig::PaperGamma,
            widen: true,
        }
    }
}

/// `omega(t)` in units of `omega0`, times in `1/omega0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    SuddenQuench,
    Constant,
    LinearRamp { omega_final: f64, ramp_time: f64 },
    Tabulated { times: Vec<f64>, omegas: Vec<f64> },
}

impl ProfileConfig {
    fn build(&self, omega0: f64) -> speedlimit_core::Result<FrequencyProfile> {
        let kind = match self {
            ProfileConfig::SuddenQuench => ProfileKind::SuddenQuench,
            ProfileConfig::Constant => ProfileKind::Constant,
            ProfileConfig::LinearRamp {
                omega_final,
                ramp_time,
            } => ProfileKind::LinearRamp {
                omega_final: omega_final * omega0,
                ramp_time: ramp_time / omega0,
            },
            ProfileConfig::Tabulated { times, omegas } => ProfileKind::Tabulated {
                times: times.iter().map(|t| t / omega0).collect(),
                omegas: omegas.iter().map(|w| w * omega0).collect(),
            },
        };
        FrequencyProfile::new(kind, omega0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct StateConfig {
    /// Oscillator eigenstate carried by the Wigner function.
    pub eigenstate: u32,
    pub classical: ClassicalConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassicalConfig {
    /// `rho = 2 pi hbar W^2`.
    #[default]
    FromWigner,
    /// Widths in `x0` and `p0`, center in `(x0, p0)`.
    Gaussian {
        sigma_q: f64,
        sigma_p: f64,
        #[serde(default)]
        center: (f64, f64),
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTime")]
pub struct TimeConfig {
    /// End of the window in `1/omega0`.
    pub t_end: f64,
    pub n_times: usize,
    pub ermakov_substeps: usize,
    pub characteristic_steps: usize,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawTime {
    t_end: f64,
    n_times: usize,
    ermakov_substeps: usize,
    characteristic_steps: usize,
}

impl Default for RawTime {
    fn default() -> Self {
        let t = TimeConfig::default();
        Self {
            t_end: t.t_end,
            n_times: t.n_times,
            ermakov_substeps: t.ermakov_substeps,
            characteristic_steps: t.characteristic_steps,
        }
    }
}

impl TryFrom<RawTime> for TimeConfig {
    type Error = String;

    fn try_from(r: RawTime) -> Result<Self, String> {
        if !(r.t_end.is_finite() && r.t_end > 0.0) {
            return Err(format!("t_end must be positive, got {}", r.t_end));
        }
        if !(2..=MAX_NODES * 4).contains(&r.n_times) {
            return Err(format!(
                "n_times must be in [2, {}], got {}",
                MAX_NODES * 4,
                r.n_times
            ));
        }
        if r.ermakov_substeps == 0 || r.characteristic_steps == 0 {
            return Err("ermakov_substeps and characteristic_steps must be positive".into());
        }
        Ok(Self {
            t_end: r.t_end,
            n_times: r.n_times,
            ermakov_substeps: r.ermakov_substeps,
            characteristic_steps: r.characteristic_steps,
        })
    }
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_end: 3.0,
            n_times: 257,
            ermakov_substeps: 4,
            characteristic_steps: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MoyalOrderConfig {
    #[serde(rename = "hbar0")]
    Hbar0,
    #[default]
    #[serde(rename = "hbar2")]
    Hbar2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub moyal_order: MoyalOrderConfig,
    /// Use `b'' = omega0^2` in the published closed-form velocity.
    pub paper_bddot: bool,
    /// Reference energy in `hbar omega0`.
    pub e0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for the output files, relative to the working directory.
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(path: &Path, text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        // Cross-field checks have no single position; anchor them at the top.
        config.scenario().map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: e.to_string(),
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
        Self::from_json(path, &text)
    }

    pub fn scenario(&self) -> speedlimit_core::Result<Scenario> {
        let units = self.units.system();
        let classical = match self.state.classical {
            ClassicalConfig::FromWigner => ClassicalModel::FromWigner,
            ClassicalConfig::Gaussian {
                sigma_q,
                sigma_p,
                center,
            } => ClassicalModel::Gaussian(GaussianSpec::new(
                sigma_q * units.x0(),
                sigma_p * units.p0(),
                (center.0 * units.x0(), center.1 * units.p0()),
            )?),
        };
        let scenario = Scenario {
            units,
            grid: GridSpec {
                q_extent: self.grid.q_extent,
                p_extent: self.grid.p_extent,
                n_q: self.grid.n_q,
                n_p: self.grid.n_p,
                measure: self.grid.measure.into(),
                widen: self.grid.widen,
            },
            profile: self.profile.build(units.omega0)?,
            eigenstate: self.state.eigenstate,
            classical,
            t_end: self.time.t_end / units.omega0,
            n_times: self.time.n_times,
            ermakov_substeps: self.time.ermakov_substeps,
            characteristic_steps: self.time.characteristic_steps,
            moyal_order: match self.toggles.moyal_order {
                MoyalOrderConfig::Hbar0 => MoyalOrder::Hbar0,
                MoyalOrderConfig::Hbar2 => MoyalOrder::Hbar2,
            },
            bddot: if self.toggles.paper_bddot {
                BddotConvention::PaperConstant
            } else {
                BddotConvention::Ermakov
            },
            e0: self.toggles.e0 * units.hbar * units.omega0,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

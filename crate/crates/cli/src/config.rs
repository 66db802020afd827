//! Run configuration.
//!
//! A TOML file with the sections below; every field has a default, so an
//! empty file is valid. Unknown keys are rejected.
//!
//! ```toml
//! seed = 0
//!
//! [fluids]
//! permeability = 1.0
//! viscosity_minus = 1.0
//! viscosity_plus = 1.0
//! varpi = -0.5            # density jump g(ρ₊ - ρ₋); overrides the three below
//! density_minus = 0.0
//! density_plus = 0.0
//! gravity = 0.0
//! surface_tension = 1.0
//!
//! [boundary]              # g1 on the bottom wall, g2 (flux) on the top wall
//! g1_mean = 0.0
//! g2_mean = 0.0
//! g2_perturbation = [{ amplitude = 0.1, mode = 0, frequency = 1.0, phase = 0.0 }]
//!
//! [grid]
//! modes = 64              # M; 2M nodes in x
//! vertical_nodes = 32     # N per strip
//!
//! [time]
//! final_time = 5.0
//! dt = 0.01               # omitted: stability-based default
//! stepper = "imex2"       # imex1 | imex2 | explicit-rk4
//! output_stride = 1
//! allow_illposed = false
//!
//! [initial]
//! kind = "cosine"         # flat | cosine | random
//! amplitude = 1e-3
//! mode = 1
//! random_modes = 8        # random: modes 1..=random_modes, phases from the seed
//!
//! [analysis]
//! m_max = 16
//! jacobian_eps = 1e-6
//! derivative_eps = 1e-4
//! tolerance = 1e-8        # oracle-check relative tolerance
//! decay_window = [1.0, 5.0]
//!
//! [continuation]
//! branch = 1
//! detect_up_to = 8
//! fit_window = [0.01, 0.05]
//! eigen_modes = 16
//! eigen_eps = 1e-6
//! eigen_stride = 1
//! eps0 = 1e-3
//! ds_initial = 1e-3
//! ds_min = 1e-4
//! ds_max = 5e-3
//! ds_abort = 1e-8
//! newton_tolerance = 1e-10
//! newton_max_iterations = 25
//! max_points = 200
//! eps_max = 0.1
//!
//! [moving_frame]
//! velocity = 0.5
//! c = 0.0
//! residual_tolerance = 1e-8
//! residual_stride = 1
//!
//! [illposed]
//! modes = [1, 2, 4, 8]
//! amplitude = 1e-6
//! horizon = 1.0
//! steps_per_efold = 40.0
//! samples = 20
//!
//! [output]
//! modes = 8               # Fourier modes written to trajectory files
//!
//! [solver]                # elliptic tolerances
//! tolerance = 1e-14
//! ```

use muskat::linear::GrowthProbe;
use muskat::steady::{ContinuationSettings, EigenSettings};
use muskat::{BoundaryData, FluidParams, MovingFrameConfig, SolverSettings, SpectralGrid, Stepper};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// Failures before any numerics run.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config: {0}")]
    Parse(String),
    #[error("override `{0}`: expected key=value")]
    Override(String),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub fluids: Fluids,
    pub boundary: BoundaryData,
    pub grid: Grid,
    pub time: Time,
    pub initial: Initial,
    pub analysis: Analysis,
    pub continuation: Continuation,
    pub moving_frame: MovingFrame,
    pub illposed: Illposed,
    pub output: Output,
    pub solver: SolverSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fluids {
    pub permeability: f64,
    pub viscosity_minus: f64,
    pub viscosity_plus: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub varpi: Option<f64>,
    pub density_minus: f64,
    pub density_plus: f64,
    pub gravity: f64,
    pub surface_tension: f64,
}

impl Default for Fluids {
    fn default() -> Self {
        Self {
            permeability: 1.0,
            viscosity_minus: 1.0,
            viscosity_plus: 1.0,
            varpi: Some(-0.5),
            density_minus: 0.0,
            density_plus: 0.0,
            gravity: 0.0,
            surface_tension: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    pub modes: usize,
    pub vertical_nodes: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            modes: 64,
            vertical_nodes: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Time {
    pub final_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub stepper: Stepper,
    pub output_stride: usize,
    pub allow_illposed: bool,
}

impl Default for Time {
    fn default() -> Self {
        Self {
            final_time: 5.0,
            dt: None,
            stepper: Stepper::Imex2,
            output_stride: 1,
            allow_illposed: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Flat,
    Cosine,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Initial {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub mode: usize,
    pub random_modes: usize,
}

impl Default for Initial {
    fn default() -> Self {
        Self {
            kind: InitialKind::Cosine,
            amplitude: 1e-3,
            mode: 1,
            random_modes: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Analysis {
    pub m_max: u32,
    pub jacobian_eps: f64,
    pub derivative_eps: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_window: Option<[f64; 2]>,
}

impl Default for Analysis {
    fn default() -> Self {
        Self {
            m_max: 16,
            jacobian_eps: 1e-6,
            derivative_eps: 1e-4,
            tolerance: 1e-8,
            decay_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Continuation {
    pub branch: usize,
    pub detect_up_to: usize,
    pub fit_window: [f64; 2],
    pub eigen_modes: usize,
    pub eigen_eps: f64,
    pub eigen_stride: usize,
    pub eps0: f64,
    pub ds_initial: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub ds_abort: f64,
    pub newton_tolerance: f64,
    pub newton_max_iterations: usize,
    pub max_points: usize,
    pub eps_max: f64,
}

impl Default for Continuation {
    fn default() -> Self {
        let s = ContinuationSettings::default();
        Self {
            branch: 1,
            detect_up_to: 8,
            fit_window: [0.01, 0.05],
            eigen_modes: 16,
            eigen_eps: 1e-6,
            eigen_stride: 1,
            eps0: s.eps0,
            ds_initial: s.ds_initial,
            ds_min: s.ds_min,
            ds_max: 5e-3,
            ds_abort: s.ds_abort,
            newton_tolerance: s.newton_tolerance,
            newton_max_iterations: s.newton_max_iterations,
            max_points: s.max_points,
            eps_max: 0.1,
        }
    }
}

impl Continuation {
    pub fn settings(&self) -> ContinuationSettings {
        ContinuationSettings {
            eps0: self.eps0,
            ds_initial: self.ds_initial,
            ds_min: self.ds_min,
            ds_max: self.ds_max,
            ds_abort: self.ds_abort,
            newton_tolerance: self.newton_tolerance,
            newton_max_iterations: self.newton_max_iterations,
            max_points: self.max_points,
            eps_max: self.eps_max,
        }
    }

    pub fn eigen(&self) -> EigenSettings {
        EigenSettings {
            modes: self.eigen_modes,
            eps: self.eigen_eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MovingFrame {
    pub velocity: f64,
    pub c: f64,
    pub residual_tolerance: f64,
    pub residual_stride: usize,
}

impl Default for MovingFrame {
    fn default() -> Self {
        Self {
            velocity: 0.5,
            c: 0.0,
            residual_tolerance: 1e-8,
            residual_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Illposed {
    pub modes: Vec<u32>,
    pub amplitude: f64,
    pub horizon: f64,
    pub steps_per_efold: f64,
    pub samples: usize,
}

impl Default for Illposed {
    fn default() -> Self {
        let p = GrowthProbe::default();
        Self {
            modes: vec![1, 2, 4, 8],
            amplitude: p.amplitude,
            horizon: p.horizon,
            steps_per_efold: p.steps_per_efold,
            samples: p.samples,
        }
    }
}

impl Illposed {
    pub fn probe(&self) -> GrowthProbe {
        GrowthProbe {
            amplitude: self.amplitude,
            horizon: self.horizon,
            steps_per_efold: self.steps_per_efold,
            samples: self.samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub modes: usize,
}

impl Default for Output {
    fn default() -> Self {
        Self { modes: 8 }
    }
}

/// Parse the override value as a TOML value; bare words become strings.
fn parse_value(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn apply_override(table: &mut Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if key.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(assignment.to_string()));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Invalid(format!("`{part}` in `{key}` is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl Config {
    /// Parse `text`, then apply `key=value` overrides with dotted keys.
    pub fn from_str_with_overrides(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Config = Table::try_into(table).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.display().to_string(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_str_with_overrides(&text, overrides)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.fluid_params()?;
        self.spectral_grid()?;
        if !(self.time.final_time > 0.0) {
            return Err(ConfigError::Invalid("time.final_time must be positive".into()));
        }
        if self.time.dt.is_some_and(|dt| !(dt > 0.0)) {
            return Err(ConfigError::Invalid("time.dt must be positive".into()));
        }
        if self.output.modes > self.grid.modes {
            return Err(ConfigError::Invalid(format!(
                "output.modes = {} exceeds grid.modes = {}",
                self.output.modes, self.grid.modes
            )));
        }
        MovingFrameConfig::new(self.moving_frame.velocity, self.moving_frame.c)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// `analysis.m_max`, checked against the dealiased band of the grid.
    pub fn resolved_m_max(&self) -> Result<u32, ConfigError> {
        let cutoff = self.spectral_grid()?.fourier().dealias_cutoff();
        if self.analysis.m_max == 0 || self.analysis.m_max as usize > cutoff {
            return Err(ConfigError::Invalid(format!(
                "analysis.m_max must lie in 1..={cutoff} for grid.modes = {}",
                self.grid.modes
            )));
        }
        Ok(self.analysis.m_max)
    }

    /// Eigenvalue settings, with `eigen_modes` checked against the grid.
    pub fn resolved_eigen(&self) -> Result<EigenSettings, ConfigError> {
        let cutoff = self.spectral_grid()?.fourier().dealias_cutoff();
        if self.continuation.eigen_modes == 0 || self.continuation.eigen_modes > cutoff {
            return Err(ConfigError::Invalid(format!(
                "continuation.eigen_modes must lie in 1..={cutoff} for grid.modes = {}",
                self.grid.modes
            )));
        }
        Ok(self.continuation.eigen())
    }

    pub fn fluid_params(&self) -> Result<FluidParams, ConfigError> {
        let f = &self.fluids;
        let p = match f.varpi {
            Some(varpi) => FluidParams::with_varpi(
                f.permeability,
                f.viscosity_minus,
                f.viscosity_plus,
                varpi,
                f.surface_tension,
            ),
            None => FluidParams::new(
                f.permeability,
                f.viscosity_minus,
                f.viscosity_plus,
                f.density_minus,
                f.density_plus,
                f.gravity,
                f.surface_tension,
            ),
        };
        p.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn spectral_grid(&self) -> Result<SpectralGrid, ConfigError> {
        SpectralGrid::new(self.grid.modes, self.grid.vertical_nodes).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn moving_frame_config(&self) -> MovingFrameConfig {
        MovingFrameConfig::new(self.moving_frame.velocity, self.moving_frame.c).expect("validated")
    }

    /// Resolved configuration as TOML text.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::from_str_with_overrides("", &[]).unwrap();
        assert_eq!(c, Config::default());
    }

    #[test]
    fn overrides_and_round_trip() {
        let c = Config::from_str_with_overrides(
            "[fluids]\nvarpi = 1.0\n",
            &["fluids.surface_tension=0.25".into(), "time.stepper=explicit-rk4".into(), "seed=7".into()],
        )
        .unwrap();
        assert_eq!(c.fluids.surface_tension, 0.25);
        assert_eq!(c.time.stepper, Stepper::ExplicitRk4);
        assert_eq!(c.seed, 7);
        let again = Config::from_str_with_overrides(&c.to_toml(), &[]).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = Config::from_str_with_overrides("[fluids]\nviscosity = 2\n", &[]).unwrap_err();
        assert!(err.to_string().contains("viscosity"), "{err}");
        let err = Config::from_str_with_overrides("", &["grid.size=3".into()]).unwrap_err();
        assert!(err.to_string().contains("size"), "{err}");
        assert!(Config::from_str_with_overrides("", &["novalue".into()]).is_err());
        assert!(Config::from_str_with_overrides("", &["fluids.permeability=-1".into()]).is_err());
    }
}

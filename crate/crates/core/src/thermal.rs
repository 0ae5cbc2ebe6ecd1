//! Building envelope, heating system and hot-water tank dynamics.
//!
//! The envelope is a discrete-time linear state-space model
//! `x_t = A·x_{t-1} + B·q_t + E_t` with `x` the thermal-state temperatures
//! (°C), `q` the space-heating power delivered per zone (kW thermal) and `E`
//! the exogenous gains already expressed in °C per step.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

pub const BUILDING_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ThermalError {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    Dimension {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: &'static str, reason: String },
    #[error("state matrix A is unstable: spectral radius {0}")]
    Unstable(f64),
    #[error("building model JSON error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

fn dim(field: &'static str, expected: usize, found: usize) -> Result<(), ThermalError> {
    if expected == found {
        Ok(())
    } else {
        Err(ThermalError::Dimension {
            field,
            expected,
            found,
        })
    }
}

fn param(field: &'static str, reason: impl Into<String>) -> ThermalError {
    ThermalError::Parameter {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankParams {
    /// Thermal conductance to the surroundings (kW/°C).
    #[serde(rename = "G")]
    pub g: f64,
    /// Thermal capacity of tank and contents (kWh/°C).
    #[serde(rename = "C")]
    pub c: f64,
    /// Surroundings temperature (°C).
    #[serde(rename = "T_env")]
    pub t_env: f64,
    pub volume_l: f64,
}

impl TankParams {
    /// Tank of `volume_l` liters of water.
    pub fn water(volume_l: f64, g: f64, t_env: f64) -> Self {
        // 4.186 kJ/(kg·K) and 1 kg/l, in kWh/K
        let c = volume_l * 4.186 / 3600.0;
        Self {
            g,
            c,
            t_env,
            volume_l,
        }
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(param("tank.C", format!("must be > 0, got {}", self.c)));
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(param("tank.G", format!("must be >= 0, got {}", self.g)));
        }
        if !self.t_env.is_finite() {
            return Err(param("tank.T_env", "must be finite"));
        }
        Ok(())
    }
}

/// Space-heating coefficient of performance.
///
/// `AmbientAffine` makes the COP depend on outdoor temperature; since the
/// ambient series is known ahead of time the LP stays linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CopModel {
    Constant(f64),
    Schedule(Vec<f64>),
    AmbientAffine { intercept: f64, slope: f64, min: f64 },
}

impl CopModel {
    pub fn at(&self, step: usize, ambient: f64) -> f64 {
        match self {
            CopModel::Constant(c) => *c,
            CopModel::Schedule(s) => s[step.min(s.len() - 1)],
            CopModel::AmbientAffine {
                intercept,
                slope,
                min,
            } => (intercept + slope * ambient).max(*min),
        }
    }

    fn validate(&self) -> Result<(), ThermalError> {
        let ok = |c: f64| c >= 1.0 && c.is_finite();
        match self {
            CopModel::Constant(c) if !ok(*c) => Err(param("cop_sh", format!("must be >= 1, got {c}"))),
            CopModel::Schedule(s) if s.is_empty() => Err(param("cop_sh", "empty schedule")),
            CopModel::Schedule(s) => match s.iter().find(|c| !ok(**c)) {
                Some(c) => Err(param("cop_sh", format!("schedule entry {c} < 1"))),
                None => Ok(()),
            },
            CopModel::AmbientAffine { min, .. } if !ok(*min) => {
                Err(param("cop_sh", format!("affine floor must be >= 1, got {min}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingModel {
    #[serde(default = "schema_v1")]
    pub schema_version: u32,
    pub id: String,
    pub n_states: usize,
    pub n_zones: usize,
    /// State matrix, dimensionless per step.
    #[serde(rename = "A")]
    pub a: Matrix,
    /// Heat-input gain, °C per kW-step, `n_states × n_zones`.
    #[serde(rename = "B")]
    pub b: Matrix,
    pub cop_sh: CopModel,
    pub cop_hw: f64,
    /// Heat-pump electrical capacity (kW).
    pub p_hp_max: f64,
    /// Auxiliary-heater electrical capacity (kW).
    pub p_a_max: f64,
    pub tank: TankParams,
    /// Zone whose comfort bounds apply to each state; `null` for unconstrained states.
    pub zone_of_state: Vec<Option<usize>>,
    /// Increment of `E` (°C per step) while the building is occupied.
    #[serde(default)]
    pub occupancy_gain: Vec<f64>,
}

fn schema_v1() -> u32 {
    BUILDING_SCHEMA_VERSION
}

impl BuildingModel {
    pub fn validate(&self) -> Result<(), ThermalError> {
        let n = self.n_states;
        if n == 0 {
            return Err(param("n_states", "must be >= 1"));
        }
        if self.n_zones == 0 {
            return Err(param("n_zones", "must be >= 1"));
        }
        dim("A.rows", n, self.a.rows())?;
        dim("A.cols", n, self.a.cols())?;
        dim("B.rows", n, self.b.rows())?;
        dim("B.cols", self.n_zones, self.b.cols())?;
        dim("zone_of_state", n, self.zone_of_state.len())?;
        if !self.occupancy_gain.is_empty() {
            dim("occupancy_gain", n, self.occupancy_gain.len())?;
        }
        if !self.a.is_finite() {
            return Err(param("A", "non-finite entry"));
        }
        if !self.b.is_finite() {
            return Err(param("B", "non-finite entry"));
        }
        if let Some(z) = self.zone_of_state.iter().flatten().find(|z| **z >= self.n_zones) {
            return Err(param("zone_of_state", format!("zone {z} out of range")));
        }
        self.cop_sh.validate()?;
        if !(self.cop_hw >= 1.0 && self.cop_hw.is_finite()) {
            return Err(param("cop_hw", format!("must be >= 1, got {}", self.cop_hw)));
        }
        if !(self.p_hp_max > 0.0 && self.p_hp_max.is_finite()) {
            return Err(param("p_hp_max", format!("must be > 0, got {}", self.p_hp_max)));
        }
        if !(self.p_a_max >= 0.0 && self.p_a_max.is_finite()) {
            return Err(param("p_a_max", format!("must be >= 0, got {}", self.p_a_max)));
        }
        self.tank.validate()?;
        let rho = spectral_radius(&self.a);
        if rho >= 1.0 + 1e-9 {
            return Err(ThermalError::Unstable(rho));
        }
        Ok(())
    }

    /// First state mapped to `zone`, the measurable air temperature of that zone.
    pub fn air_state_of_zone(&self, zone: usize) -> Option<usize> {
        self.zone_of_state.iter().position(|z| *z == Some(zone))
    }

    pub fn from_json_str(s: &str) -> Result<Self, ThermalError> {
        let model: BuildingModel = serde_json::from_str(s).map_err(|e| ThermalError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if model.schema_version != BUILDING_SCHEMA_VERSION {
            return Err(param(
                "schema_version",
                format!("unsupported version {}", model.schema_version),
            ));
        }
        model.validate()?;
        Ok(model)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("building model serializes")
    }
}

pub fn spectral_radius(a: &Matrix) -> f64 {
    if a.rows() == 0 {
        return 0.0;
    }
    a.to_nalgebra()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Exogenous inputs over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule {
    /// `E[t][state]`, °C per step.
    pub e: Vec<Vec<f64>>,
    /// Hot-water thermal draw (kW).
    pub hw_draw: Vec<f64>,
    /// Outdoor temperature (°C).
    pub ambient: Vec<f64>,
    pub dt_hours: f64,
}

impl GainSchedule {
    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn validate(&self, n_states: usize) -> Result<(), ThermalError> {
        let n = self.e.len();
        dim("gains.hw_draw", n, self.hw_draw.len())?;
        dim("gains.ambient", n, self.ambient.len())?;
        for row in &self.e {
            dim("gains.E", n_states, row.len())?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(param("gains.E", "non-finite entry"));
            }
        }
        if !(self.dt_hours > 0.0 && self.dt_hours.is_finite()) {
            return Err(param("gains.dt_hours", format!("must be > 0, got {}", self.dt_hours)));
        }
        if let Some(d) = self.hw_draw.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(param("gains.hw_draw", format!("must be >= 0, got {d}")));
        }
        if self.ambient.iter().any(|v| !v.is_finite()) {
            return Err(param("gains.ambient", "non-finite entry"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub t_sh: Vec<f64>,
    pub t_hw: f64,
}

impl ThermalState {
    pub fn validate(&self, n_states: usize) -> Result<(), ThermalError> {
        dim("state.t_sh", n_states, self.t_sh.len())?;
        if self.t_sh.iter().any(|v| !v.is_finite()) || !self.t_hw.is_finite() {
            return Err(param("state", "non-finite temperature"));
        }
        Ok(())
    }
}

/// One envelope step: `A·x + B·q + e`.
pub fn step_thermal(model: &BuildingModel, x: &[f64], q: &[f64], e: &[f64]) -> Result<Vec<f64>, ThermalError> {
    let n = model.n_states;
    dim("A.rows", n, model.a.rows())?;
    dim("A.cols", n, model.a.cols())?;
    dim("B.rows", n, model.b.rows())?;
    dim("x", n, x.len())?;
    dim("q_sh", model.b.cols(), q.len())?;
    dim("E", n, e.len())?;
    let ax = model.a.mul_vec(x);
    let bq = model.b.mul_vec(q);
    Ok((0..n).map(|i| ax[i] + bq[i] + e[i]).collect())
}

/// One tank step with the loss term evaluated at the new temperature:
/// `t = t_prev − (dt·G/C)(t − T_env) + (dt/C)(cop·p_hp + p_a − draw)`,
/// solved for `t`.
pub fn step_tank(
    tank: &TankParams,
    t_prev: f64,
    p_hp_hw: f64,
    p_a_hw: f64,
    draw: f64,
    cop_hw: f64,
    dt: f64,
) -> Result<f64, ThermalError> {
    if !(tank.c > 0.0) {
        return Err(param("tank.C", format!("must be > 0, got {}", tank.c)));
    }
    if !(dt > 0.0) {
        return Err(param("dt", format!("must be > 0, got {dt}")));
    }
    let loss = dt * tank.g / tank.c;
    let heat = dt / tank.c * (cop_hw * p_hp_hw + p_a_hw - draw);
    Ok((t_prev + loss * tank.t_env + heat) / (1.0 + loss))
}

//! Run configuration: a sectioned TOML file. Every field has a default, so
//! an empty file is a valid config.

use std::path::{Path, PathBuf};

use bmdp_core::inputs::read_gains_csv;
use bmdp_core::markov::{BinningSpec, Fallback, PowerVar, StateMode};
use bmdp_core::mdp::{ControlParams, DEFAULT_MDP_HORIZON, DEFAULT_POWER_FACTOR};
use bmdp_core::occupancy::{ComfortSetpoints, InitialPresence, OccupancyParams};
use bmdp_core::scenario::{
    ScenarioTemplate, SyntheticOptions, DEFAULT_DT_HOURS, DEFAULT_HORIZON_STEPS, DEFAULT_LOOKAHEAD_STEPS,
    DEFAULT_MASTER_SEED, DEFAULT_N_PROFILES, DEFAULT_WEATHER_SEED, DEFAULT_WINDOW_STEPS,
};
use bmdp_core::thermal::{BuildingModel, ThermalState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const OUTPUT_DIR_ENV: &str = "BMDP_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub paths: Paths,
    pub scenario: ScenarioSection,
    pub comfort: ComfortSetpoints,
    pub occupancy: OccupancySection,
    pub binning: BinningSection,
    pub mdp: MdpSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Building model JSON; the synthetic building when absent.
    pub building: Option<PathBuf>,
    /// Gains CSV (`step, E_1..E_n, ambient, hw_draw`); required with `building`.
    pub gains: Option<PathBuf>,
    /// Price CSV (`step, price`); the synthetic tariff when absent.
    pub prices: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub horizon_steps: usize,
    pub dt_hours: f64,
    pub n_profiles: usize,
    pub master_seed: u64,
    pub weather_seed: u64,
    pub window_steps: usize,
    pub lookahead_steps: usize,
    pub initial_t_sh: Option<Vec<f64>>,
    pub initial_t_hw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OccupancySection {
    pub mean_absence_hours: f64,
    pub occupied_fraction: f64,
    pub initial: InitialPresence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BinningSection {
    pub power_var: PowerVar,
    pub mode: StateMode,
    pub n_temp_bins: usize,
    pub n_power_bins: usize,
    pub temp_source: usize,
    pub temp_range: Option<[f64; 2]>,
    pub power_range: Option<[f64; 2]>,
    pub fallback: Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdpSection {
    pub horizon: usize,
    pub power_factor: f64,
    pub utility_weight: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            paths: Paths::default(),
            scenario: ScenarioSection::default(),
            comfort: ComfortSetpoints::default(),
            occupancy: OccupancySection::default(),
            binning: BinningSection::default(),
            mdp: MdpSection::default(),
        }
    }
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            building: None,
            gains: None,
            prices: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            horizon_steps: DEFAULT_HORIZON_STEPS,
            dt_hours: DEFAULT_DT_HOURS,
            n_profiles: DEFAULT_N_PROFILES,
            master_seed: DEFAULT_MASTER_SEED,
            weather_seed: DEFAULT_WEATHER_SEED,
            window_steps: DEFAULT_WINDOW_STEPS,
            lookahead_steps: DEFAULT_LOOKAHEAD_STEPS,
            initial_t_sh: None,
            initial_t_hw: None,
        }
    }
}

impl Default for OccupancySection {
    fn default() -> Self {
        Self {
            mean_absence_hours: 8.0,
            occupied_fraction: 0.6,
            initial: InitialPresence::Stationary,
        }
    }
}

impl Default for BinningSection {
    fn default() -> Self {
        Self {
            power_var: PowerVar::HeatPump,
            mode: StateMode::Product,
            n_temp_bins: 10,
            n_power_bins: 10,
            temp_source: 0,
            temp_range: None,
            power_range: None,
            fallback: Fallback::SelfLoop,
        }
    }
}

impl Default for MdpSection {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_MDP_HORIZON,
            power_factor: DEFAULT_POWER_FACTOR,
            utility_weight: 1.0,
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        // Relative input paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.building, &mut cfg.paths.gains, &mut cfg.paths.prices].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the effective config, hex encoded.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(bad(format!("schema_version {} is not supported", self.schema_version)));
        }
        let s = &self.scenario;
        if !(s.dt_hours > 0.0 && s.dt_hours <= 24.0) {
            return Err(bad(format!("scenario.dt_hours must be in (0, 24], got {}", s.dt_hours)));
        }
        if s.horizon_steps == 0 || s.n_profiles == 0 || s.window_steps == 0 {
            return Err(bad("scenario.horizon_steps, n_profiles and window_steps must be >= 1"));
        }
        let o = &self.occupancy;
        if !(o.mean_absence_hours > 0.0) {
            return Err(bad("occupancy.mean_absence_hours must be > 0"));
        }
        if !(o.occupied_fraction > 0.0 && o.occupied_fraction < 1.0) {
            return Err(bad("occupancy.occupied_fraction must be in (0, 1)"));
        }
        for (i, z) in self.comfort.zones.iter().enumerate() {
            if !(z.occupied_lo < z.occupied_hi) {
                return Err(bad(format!("comfort.zones[{i}]: occupied_lo must be below occupied_hi")));
            }
        }
        if !(self.comfort.hw_lo < self.comfort.hw_hi) {
            return Err(bad("comfort.hw_lo must be below comfort.hw_hi"));
        }
        self.binning_spec().validate().map_err(|e| bad(e.to_string()))?;
        let m = &self.mdp;
        if m.horizon == 0 {
            return Err(bad("mdp.horizon must be >= 1"));
        }
        if !(m.power_factor > 0.0 && m.power_factor <= 1.0) {
            return Err(bad(format!("mdp.power_factor must be in (0, 1], got {}", m.power_factor)));
        }
        if !m.utility_weight.is_finite() {
            return Err(bad("mdp.utility_weight must be finite"));
        }
        for p in [&self.paths.building, &self.paths.gains, &self.paths.prices].into_iter().flatten() {
            if !p.is_file() {
                return Err(bad(format!("{}: file not found", p.display())));
            }
        }
        if self.paths.building.is_some() && self.paths.gains.is_none() {
            return Err(bad("paths.gains is required with paths.building"));
        }
        Ok(())
    }

    /// Precedence: explicit flag, then the environment, then the config.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.paths.output_dir.clone(),
        }
    }

    pub fn binning_spec(&self) -> BinningSpec {
        let b = &self.binning;
        BinningSpec {
            power_var: b.power_var,
            temp_source: b.temp_source,
            n_temp_bins: if b.mode == StateMode::Marginal { 1 } else { b.n_temp_bins },
            n_power_bins: b.n_power_bins,
            temp_range: b.temp_range.map(|[lo, hi]| (lo, hi)),
            power_range: b.power_range.map(|[lo, hi]| (lo, hi)),
            mode: b.mode,
        }
    }

    pub fn control_params(&self) -> ControlParams {
        ControlParams {
            horizon: self.mdp.horizon,
            power_factor: self.mdp.power_factor,
            utility_weight: self.mdp.utility_weight,
        }
    }

    fn occupancy_params(&self) -> OccupancyParams {
        let o = &self.occupancy;
        OccupancyParams {
            initial: o.initial,
            ..OccupancyParams::from_absence(o.mean_absence_hours, o.occupied_fraction, self.scenario.dt_hours)
        }
    }

    pub fn template(&self) -> Result<ScenarioTemplate, CliError> {
        let s = &self.scenario;
        let data = |e: String| CliError::Data(e);
        let mut tpl = match &self.paths.building {
            None => ScenarioTemplate::synthetic(&SyntheticOptions {
                dt_hours: s.dt_hours,
                horizon_steps: s.horizon_steps,
                weather_seed: s.weather_seed,
                setpoints: self.comfort.clone(),
                occupancy: self.occupancy_params(),
                window_steps: s.window_steps,
                lookahead_steps: s.lookahead_steps,
            }),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                let building = BuildingModel::from_json_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))?;
                let t_sh = (0..building.n_states)
                    .map(|i| {
                        let z = building.zone_of_state[i].unwrap_or(0).min(self.comfort.zones.len().saturating_sub(1));
                        self.comfort.zones.get(z).map_or(20.0, |z| z.occupied_lo + 0.5)
                    })
                    .collect();
                ScenarioTemplate {
                    initial_state: ThermalState { t_sh, t_hw: 55.0 },
                    base_gains: bmdp_core::thermal::GainSchedule {
                        e: vec![],
                        hw_draw: vec![],
                        ambient: vec![],
                        dt_hours: s.dt_hours,
                    },
                    building,
                    setpoints: self.comfort.clone(),
                    occupancy: self.occupancy_params(),
                    horizon_steps: s.horizon_steps,
                    window_steps: s.window_steps.min(s.horizon_steps),
                    lookahead_steps: s.lookahead_steps,
                }
            }
        };
        if let Some(path) = &self.paths.gains {
            let file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let mut g = read_gains_csv(file, s.dt_hours).map_err(|e| data(format!("{}: {e}", path.display())))?;
            if g.len() < s.horizon_steps {
                return Err(data(format!("{}: {} rows, horizon needs {}", path.display(), g.len(), s.horizon_steps)));
            }
            g.e.truncate(s.horizon_steps);
            g.ambient.truncate(s.horizon_steps);
            g.hw_draw.truncate(s.horizon_steps);
            tpl.base_gains = g;
        }
        if let Some(t) = &s.initial_t_sh {
            tpl.initial_state.t_sh = t.clone();
        }
        if let Some(t) = s.initial_t_hw {
            tpl.initial_state.t_hw = t;
        }
        Ok(tpl)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn printed_defaults_parse_back() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("[scenario]\nhorizon = 3\n").unwrap_err();
        assert!(err.to_string().contains("horizon"), "{err}");
    }

    #[test]
    fn out_of_range_values_are_config_errors() {
        let mut cfg = RunConfig::default();
        cfg.mdp.power_factor = 1.5;
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let mut cfg = RunConfig::default();
        cfg.binning.n_power_bins = 1;
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn marginal_mode_ignores_temperature_bins() {
        let mut cfg = RunConfig::default();
        cfg.binning.mode = StateMode::Marginal;
        cfg.binning.n_power_bins = 17;
        assert_eq!(cfg.binning_spec().n_states(), 17);
    }

    #[test]
    fn short_synthetic_template_keeps_the_default_plant() {
        let mut cfg = RunConfig::default();
        cfg.scenario.horizon_steps = 96;
        let short = cfg.template().unwrap();
        let full = ScenarioTemplate::default_scenario();
        assert_eq!(short.building, full.building);
        assert_eq!(short.base_gains.e[..], full.base_gains.e[..96]);
    }
}

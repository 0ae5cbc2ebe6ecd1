//! Shipped default scenario: synthetic winter weather, a synthetic 4-state
//! building sized against that weather, and the per-profile scenario
//! assembly used by the ensemble simulator.
//!
//! Nothing here is measured data. The envelope is a two-zone RC network
//! (see [`crate::envelope`]) and the weather is a seeded stochastic series.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::envelope::RcEnvelope;
use crate::occupancy::{comfort_bounds_with, ComfortSetpoints, DrawTemplate, OccupancyParams, OccupancyProfile};
use crate::thermal::{BuildingModel, CopModel, GainSchedule, TankParams, ThermalState, BUILDING_SCHEMA_VERSION};

pub const DEFAULT_DT_HOURS: f64 = 0.25;
/// Four weeks of 15-minute steps.
pub const DEFAULT_HORIZON_STEPS: usize = 2688;
pub const DEFAULT_WINDOW_STEPS: usize = 96;
pub const DEFAULT_LOOKAHEAD_STEPS: usize = 16;
pub const DEFAULT_WEATHER_SEED: u64 = 2013;
pub const DEFAULT_MASTER_SEED: u64 = 2013;
pub const DEFAULT_N_PROFILES: usize = 52;
/// Share of the peak space-heating demand covered by the heat pump.
pub const HEAT_PUMP_SHARE: f64 = 0.8;
pub const DEFAULT_COP_SH: f64 = 3.5;
pub const DEFAULT_COP_HW: f64 = 2.5;
pub const DEFAULT_TANK_LITERS: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weather {
    /// Outdoor temperature (°C).
    pub ambient: Vec<f64>,
    /// Solar availability in [0, 1], scaled by each node's peak gain.
    pub solar: Vec<f64>,
    pub dt_hours: f64,
}

/// Seeded winter weather: an AR(1) daily mean around 3 °C with a three-day
/// cold spell in the second week, a diurnal swing peaking mid-afternoon,
/// and a daily clearness factor shaping a short winter solar day.
pub fn synthetic_weather(seed: u64, n_steps: usize, dt_hours: f64) -> Weather {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps_per_day = (24.0 / dt_hours).round() as usize;
    let n_days = n_steps.div_ceil(steps_per_day) + 1;
    let noise = Normal::new(0.0, 1.8).expect("finite std");
    let mut means = Vec::with_capacity(n_days + 1);
    let mut clearness = Vec::with_capacity(n_days + 1);
    let mut anomaly = 0.0;
    for day in 0..=n_days {
        anomaly = 0.7 * anomaly + noise.sample(&mut rng);
        let snap = match day {
            9 | 11 => -3.0,
            10 => -5.5,
            _ => 0.0,
        };
        means.push(3.0 + anomaly + snap);
        clearness.push(rng.gen_range(0.15..1.0));
    }
    let mut ambient = Vec::with_capacity(n_steps);
    let mut solar = Vec::with_capacity(n_steps);
    for t in 0..n_steps {
        let hours = t as f64 * dt_hours;
        let day = (hours / 24.0).floor() as usize;
        let h = hours - 24.0 * day as f64;
        // Daily means are anchored at noon and interpolated linearly.
        let (d0, frac) = if h < 12.0 {
            (day.saturating_sub(1), if day == 0 { 1.0 } else { (h + 12.0) / 24.0 })
        } else {
            (day, (h - 12.0) / 24.0)
        };
        let mean = means[d0] + frac * (means[d0 + 1] - means[d0]);
        let c = clearness[day];
        let swing = (1.5 + 2.0 * c) * (2.0 * std::f64::consts::PI * (h - 9.0) / 24.0).sin();
        ambient.push(mean + swing);
        let s = if (8.0..16.0).contains(&h) {
            (std::f64::consts::PI * (h - 8.0) / 8.0).sin()
        } else {
            0.0
        };
        solar.push(c * s);
    }
    Weather {
        ambient,
        solar,
        dt_hours,
    }
}

/// Exogenous gains of `env` under `weather`, excluding occupancy.
pub fn envelope_gains(env: &RcEnvelope, weather: &Weather, injection: &crate::matrix::Matrix) -> Vec<Vec<f64>> {
    weather
        .ambient
        .iter()
        .zip(&weather.solar)
        .map(|(&amb, &sol)| injection.mul_vec(&env.weather_injection(amb, sol)))
        .collect()
}

/// Steady state that holds each comfort node at `setpoints[zone]` under the
/// given outdoor conditions with no occupancy gains: returns every node
/// temperature and the space-heating input (kW) of every zone.
pub fn steady_state(env: &RcEnvelope, ambient: f64, solar: f64, setpoints: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = env.n_states();
    // Unknowns: temperatures of unconstrained nodes, then zone heat inputs.
    let free: Vec<usize> = (0..n).filter(|&i| env.nodes[i].comfort_zone.is_none()).collect();
    let n_unknowns = free.len() + env.n_zones;
    assert_eq!(n_unknowns, n, "one comfort node per zone");
    let mut l = DMatrix::<f64>::zeros(n, n);
    for (i, node) in env.nodes.iter().enumerate() {
        l[(i, i)] += node.ua_outdoor + node.ua_ground;
    }
    for &(i, j, h) in &env.couplings {
        l[(i, i)] += h;
        l[(j, j)] += h;
        l[(i, j)] -= h;
        l[(j, i)] -= h;
    }
    let inj = env.weather_injection(ambient, solar);
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::from_vec(inj);
    for i in 0..n {
        for k in 0..n {
            match env.nodes[k].comfort_zone {
                Some(z) => rhs[i] -= l[(i, k)] * setpoints[z],
                None => {
                    let col = free.iter().position(|&f| f == k).expect("free node");
                    m[(i, col)] = l[(i, k)];
                }
            }
        }
        if let Some(z) = env.nodes[i].heated_zone {
            m[(i, free.len() + z)] = -1.0;
        }
    }
    let sol = m.lu().solve(&rhs).expect("steady balance is nonsingular");
    let temps = (0..n)
        .map(|k| match env.nodes[k].comfort_zone {
            Some(z) => setpoints[z],
            None => sol[free.iter().position(|&f| f == k).expect("free node")],
        })
        .collect();
    (temps, (0..env.n_zones).map(|z| sol[free.len() + z]).collect())
}

/// Space-heating demand (kW per zone) of [`steady_state`].
pub fn steady_heat_demand(env: &RcEnvelope, ambient: f64, solar: f64, setpoints: &[f64]) -> Vec<f64> {
    steady_state(env, ambient, solar, setpoints).1
}

/// Largest total steady space-heating demand over `weather` at the occupied
/// lower setpoints.
pub fn peak_heat_demand(env: &RcEnvelope, weather: &Weather, setpoints: &ComfortSetpoints) -> f64 {
    let sp: Vec<f64> = setpoints.zones.iter().map(|z| z.occupied_lo).collect();
    weather
        .ambient
        .iter()
        .zip(&weather.solar)
        .map(|(&a, &s)| steady_heat_demand(env, a, s, &sp).iter().map(|q| q.max(0.0)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Synthetic two-zone building with a 200 l tank; heat pump sized to 80 % of
/// the peak demand of the default weather, auxiliary heater to the rest.
pub fn default_building() -> BuildingModel {
    let env = RcEnvelope::two_zone_floor_heating();
    let weather = synthetic_weather(DEFAULT_WEATHER_SEED, DEFAULT_HORIZON_STEPS, DEFAULT_DT_HOURS);
    building_from_envelope("synthetic-2zone-4state", &env, &weather, &ComfortSetpoints::default())
}

pub fn building_from_envelope(
    id: &str,
    env: &RcEnvelope,
    weather: &Weather,
    setpoints: &ComfortSetpoints,
) -> BuildingModel {
    let d = env.discretize(weather.dt_hours);
    let q_peak = peak_heat_demand(env, weather, setpoints);
    BuildingModel {
        schema_version: BUILDING_SCHEMA_VERSION,
        id: id.to_string(),
        n_states: env.n_states(),
        n_zones: env.n_zones,
        a: d.a,
        b: d.b,
        cop_sh: CopModel::Constant(DEFAULT_COP_SH),
        cop_hw: DEFAULT_COP_HW,
        p_hp_max: HEAT_PUMP_SHARE * q_peak / DEFAULT_COP_SH,
        p_a_max: (1.0 - HEAT_PUMP_SHARE) * q_peak,
        tank: TankParams::water(DEFAULT_TANK_LITERS, 0.003, 15.0),
        zone_of_state: env.zone_of_state(),
        occupancy_gain: d.injection.mul_vec(&env.occupancy_injection()),
    }
}

/// Everything needed to simulate one profile except the profile itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    pub building: BuildingModel,
    /// Gains without occupancy; `hw_draw` is the draw while someone is home.
    pub base_gains: GainSchedule,
    pub setpoints: ComfortSetpoints,
    pub occupancy: OccupancyParams,
    pub initial_state: ThermalState,
    pub horizon_steps: usize,
    pub window_steps: usize,
    /// Extra steps optimized past each window and then discarded.
    pub lookahead_steps: usize,
}

/// Knobs of the synthetic scenario generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOptions {
    pub dt_hours: f64,
    pub horizon_steps: usize,
    pub weather_seed: u64,
    pub setpoints: ComfortSetpoints,
    pub occupancy: OccupancyParams,
    pub window_steps: usize,
    pub lookahead_steps: usize,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            dt_hours: DEFAULT_DT_HOURS,
            horizon_steps: DEFAULT_HORIZON_STEPS,
            weather_seed: DEFAULT_WEATHER_SEED,
            setpoints: ComfortSetpoints::default(),
            occupancy: OccupancyParams::default_for(DEFAULT_DT_HOURS),
            window_steps: DEFAULT_WINDOW_STEPS,
            lookahead_steps: DEFAULT_LOOKAHEAD_STEPS,
        }
    }
}

impl ScenarioTemplate {
    pub fn default_scenario() -> Self {
        Self::synthetic(&SyntheticOptions::default())
    }

    /// Synthetic building and weather. Capacity is sized on at least four
    /// weeks of weather so short horizons get the same plant.
    pub fn synthetic(opts: &SyntheticOptions) -> Self {
        let dt = opts.dt_hours;
        let env = RcEnvelope::two_zone_floor_heating();
        let sizing_steps = opts.horizon_steps.max((28.0 * 24.0 / dt).round() as usize);
        let mut weather = synthetic_weather(opts.weather_seed, sizing_steps, dt);
        let setpoints = opts.setpoints.clone();
        let building = building_from_envelope("synthetic-2zone-4state", &env, &weather, &setpoints);
        weather.ambient.truncate(opts.horizon_steps);
        weather.solar.truncate(opts.horizon_steps);
        let injection = env.discretize(dt).injection;
        let base_gains = GainSchedule {
            e: envelope_gains(&env, &weather, &injection),
            hw_draw: DrawTemplate::default().series(opts.horizon_steps, dt),
            ambient: weather.ambient.clone(),
            dt_hours: dt,
        };
        // Start settled half a degree above the occupied floors.
        let start_sp: Vec<f64> = setpoints.zones.iter().map(|z| z.occupied_lo + 0.5).collect();
        let initial_state = ThermalState {
            t_sh: steady_state(&env, weather.ambient[0], weather.solar[0], &start_sp).0,
            t_hw: 55.0,
        };
        Self {
            building,
            base_gains,
            setpoints,
            occupancy: opts.occupancy,
            initial_state,
            horizon_steps: opts.horizon_steps,
            window_steps: opts.window_steps.min(opts.horizon_steps),
            lookahead_steps: opts.lookahead_steps,
        }
    }

    /// Truncates every series to the first `horizon_steps` steps.
    pub fn with_horizon(mut self, horizon_steps: usize) -> Self {
        self.horizon_steps = horizon_steps;
        self.base_gains.e.truncate(horizon_steps);
        self.base_gains.hw_draw.truncate(horizon_steps);
        self.base_gains.ambient.truncate(horizon_steps);
        self.window_steps = self.window_steps.min(horizon_steps);
        self
    }

    pub fn dt_hours(&self) -> f64 {
        self.base_gains.dt_hours
    }

    /// Applies presence: occupancy gains are added and hot water is drawn only
    /// while someone is home; comfort bounds follow presence pointwise.
    pub fn for_profile(&self, profile: &OccupancyProfile) -> crate::schedule::ScenarioConfig {
        let n = self.horizon_steps;
        let og = &self.building.occupancy_gain;
        let mut gains = self.base_gains.clone();
        for t in 0..n.min(profile.len()) {
            if profile.presence[t] {
                for (e, g) in gains.e[t].iter_mut().zip(og) {
                    *e += g;
                }
            } else {
                gains.hw_draw[t] = 0.0;
            }
        }
        crate::schedule::ScenarioConfig {
            building: self.building.clone(),
            gains,
            comfort: comfort_bounds_with(profile, &self.setpoints),
            horizon_steps: n,
            window_steps: self.window_steps,
            lookahead_steps: self.lookahead_steps,
            initial_state: self.initial_state.clone(),
            presence: profile.presence.clone(),
            profile_seed: Some(profile.seed),
        }
    }
}

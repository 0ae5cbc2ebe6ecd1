//! Energy-minimizing heating schedules over a horizon, solved as a chain of
//! window LPs.
//!
//! Each window optimizes `window_steps + lookahead_steps` steps and commits
//! the first `window_steps`; the committed terminal state seeds the next
//! window. The lookahead only exists so that a window can see an upcoming
//! comfort-bound rise and preheat for it; on lookahead steps the lower
//! bounds are tightened (see `lookahead_floor`).

use std::io::{Read, Write};
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lp::{solve_lp, LpError, LpInstance, LpStatus, DEFAULT_MAX_ITER, FEASIBILITY_TOL};
use crate::occupancy::{derive_profile_seed, generate_profile, ComfortSchedule, OccupancyError};
use crate::scenario::ScenarioTemplate;
use crate::thermal::{BuildingModel, GainSchedule, ThermalError, ThermalState};

pub const TRACE_SCHEMA_VERSION: u32 = 1;
/// Objective weight of one °C·step of lower-bound shortfall in a relaxed window.
pub const RELAXATION_PENALTY: f64 = 1e6;

#[derive(Debug, thiserror::Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error(transparent)]
    Occupancy(#[from] OccupancyError),
    #[error("scenario: {0}")]
    Config(String),
    #[error("LP assembly ({family}): {message}")]
    Assembly { family: &'static str, message: String },
    #[error("LP solver: {0}")]
    Lp(#[from] LpError),
    #[error("window starting at step {start}: solver stopped with status {status:?}")]
    Solver { start: usize, status: LpStatus },
    #[error("infeasible even after relaxation: step {step} violates {bound}")]
    Infeasible { step: usize, bound: String },
    #[error("profile {index} (seed {seed}): {source}")]
    Profile {
        index: usize,
        seed: u64,
        #[source]
        source: Box<ScheduleError>,
    },
    #[error("trace CSV line {line}: {message}")]
    TraceCsv { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub building: BuildingModel,
    pub gains: GainSchedule,
    pub comfort: ComfortSchedule,
    pub horizon_steps: usize,
    pub window_steps: usize,
    #[serde(default)]
    pub lookahead_steps: usize,
    pub initial_state: ThermalState,
    /// Recorded in the trace only.
    #[serde(default)]
    pub presence: Vec<bool>,
    #[serde(default)]
    pub profile_seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        let b = &self.building;
        b.validate()?;
        self.gains.validate(b.n_states)?;
        self.initial_state.validate(b.n_states)?;
        let n = self.horizon_steps;
        if n == 0 || self.window_steps == 0 || self.window_steps > n {
            return Err(ScheduleError::Config(format!(
                "need 1 <= window_steps ({}) <= horizon_steps ({n})",
                self.window_steps
            )));
        }
        let c = &self.comfort;
        for (name, len) in [
            ("gains", self.gains.len()),
            ("comfort.t_lo", c.t_lo.len()),
            ("comfort.t_hi", c.t_hi.len()),
            ("comfort.hw_lo", c.hw_lo.len()),
            ("comfort.hw_hi", c.hw_hi.len()),
        ] {
            if len < n {
                return Err(ScheduleError::Config(format!("{name} covers {len} steps, horizon is {n}")));
            }
        }
        for t in 0..n {
            if c.t_lo[t].len() != b.n_zones || c.t_hi[t].len() != b.n_zones {
                return Err(ScheduleError::Config(format!("comfort bounds at step {t} must have {} zones", b.n_zones)));
            }
            if c.t_lo[t].iter().zip(&c.t_hi[t]).any(|(l, h)| l > h) || c.hw_lo[t] > c.hw_hi[t] {
                return Err(ScheduleError::Config(format!("comfort bounds at step {t} are inverted")));
            }
        }
        if let crate::thermal::CopModel::Schedule(s) = &b.cop_sh {
            if s.len() < n {
                return Err(ScheduleError::Config(format!("cop_sh schedule covers {} steps, horizon is {n}", s.len())));
            }
        }
        Ok(())
    }

    fn cop_sh(&self, step: usize) -> f64 {
        self.building.cop_sh.at(step, self.gains.ambient[step])
    }
}

/// Column positions of the per-step variables of a window LP.
///
/// Each step holds, in order: `d_H`, `p_hp_sh`, `p_hp_hw`, `p_a_sh`,
/// `p_a_hw`, one `q_sh` per zone, one `t_sh` per state, and `t_hw`, so a
/// step has `6 + n_zones + n_states` variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowLayout {
    pub n_zones: usize,
    pub n_states: usize,
    pub n_steps: usize,
}

impl WindowLayout {
    pub fn stride(&self) -> usize {
        6 + self.n_zones + self.n_states
    }
    pub fn n_step_vars(&self) -> usize {
        self.stride() * self.n_steps
    }
    pub fn d_h(&self, k: usize) -> usize {
        k * self.stride()
    }
    pub fn p_hp_sh(&self, k: usize) -> usize {
        k * self.stride() + 1
    }
    pub fn p_hp_hw(&self, k: usize) -> usize {
        k * self.stride() + 2
    }
    pub fn p_a_sh(&self, k: usize) -> usize {
        k * self.stride() + 3
    }
    pub fn p_a_hw(&self, k: usize) -> usize {
        k * self.stride() + 4
    }
    pub fn q(&self, k: usize, z: usize) -> usize {
        k * self.stride() + 5 + z
    }
    pub fn t_sh(&self, k: usize, i: usize) -> usize {
        k * self.stride() + 5 + self.n_zones + i
    }
    pub fn t_hw(&self, k: usize) -> usize {
        k * self.stride() + 5 + self.n_zones + self.n_states
    }
}

/// Builds the LP for `window` starting from `x0` (the state before its
/// first step). Objective is electrical energy in kWh.
pub fn build_window_lp(cfg: &ScenarioConfig, window: Range<usize>, x0: &ThermalState) -> Result<LpInstance, ScheduleError> {
    let end = window.end;
    build_window_lp_inner(cfg, window, x0, end, false)
}

/// Per-zone lower bound applied on lookahead steps: the strictest lower
/// bound the horizon ever asks for. A committed window must end in a state
/// from which that bound can be held, so the next window starts feasible
/// even when the building cannot recover from a setback within the
/// lookahead.
fn lookahead_floor(cfg: &ScenarioConfig) -> Vec<f64> {
    (0..cfg.building.n_zones)
        .map(|z| cfg.comfort.t_lo[..cfg.horizon_steps].iter().map(|r| r[z]).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

fn build_window_lp_inner(
    cfg: &ScenarioConfig,
    window: Range<usize>,
    x0: &ThermalState,
    lookahead_from: usize,
    elastic: bool,
) -> Result<LpInstance, ScheduleError> {
    let b = &cfg.building;
    let (n, nz) = (b.n_states, b.n_zones);
    let asm = |family: &'static str, message: String| ScheduleError::Assembly { family, message };
    if b.a.rows() != n || b.a.cols() != n {
        return Err(asm("dynamics", format!("A is {}x{}, expected {n}x{n}", b.a.rows(), b.a.cols())));
    }
    if b.b.rows() != n || b.b.cols() != nz {
        return Err(asm("dynamics", format!("B is {}x{}, expected {n}x{nz}", b.b.rows(), b.b.cols())));
    }
    if b.zone_of_state.len() != n {
        return Err(asm("comfort", format!("zone_of_state has {} entries, expected {n}", b.zone_of_state.len())));
    }
    if x0.t_sh.len() != n {
        return Err(asm("dynamics", format!("initial state has {} entries, expected {n}", x0.t_sh.len())));
    }
    if window.is_empty() || window.end > cfg.horizon_steps {
        return Err(asm("window", format!("{window:?} outside horizon 0..{}", cfg.horizon_steps)));
    }
    if let Some(row) = cfg.gains.e[window.clone()].iter().find(|r| r.len() != n) {
        return Err(asm("dynamics", format!("gain row has {} entries, expected {n}", row.len())));
    }

    let layout = WindowLayout {
        n_zones: nz,
        n_states: n,
        n_steps: window.len(),
    };
    let dt = cfg.gains.dt_hours;
    let tank = &b.tank;
    let loss = dt * tank.g / tank.c;
    let heat = dt / tank.c;
    let comfort = &cfg.comfort;
    let floor = if lookahead_from < window.end { lookahead_floor(cfg) } else { Vec::new() };
    let t_lo = |g: usize, z: usize| {
        if g >= lookahead_from {
            comfort.t_lo[g][z].max(floor[z])
        } else {
            comfort.t_lo[g][z]
        }
    };

    let mut lp = LpInstance::new(0);
    for (k, g) in window.clone().enumerate() {
        lp.add_var(format!("d_H[{g}]"), dt, 0.0, f64::INFINITY);
        lp.add_var(format!("p_hp_sh[{g}]"), 0.0, 0.0, b.p_hp_max);
        lp.add_var(format!("p_hp_hw[{g}]"), 0.0, 0.0, b.p_hp_max);
        lp.add_var(format!("p_a_sh[{g}]"), 0.0, 0.0, b.p_a_max);
        lp.add_var(format!("p_a_hw[{g}]"), 0.0, 0.0, b.p_a_max);
        for z in 0..nz {
            lp.add_var(format!("q_sh[{g}][{z}]"), 0.0, 0.0, f64::INFINITY);
        }
        for i in 0..n {
            let (lo, hi) = match b.zone_of_state[i] {
                Some(z) => (t_lo(g, z), comfort.t_hi[g][z]),
                None => (f64::NEG_INFINITY, f64::INFINITY),
            };
            let lo = if elastic { f64::NEG_INFINITY } else { lo };
            lp.add_var(format!("t_sh[{g}][{i}]"), 0.0, lo, hi);
        }
        let hw_lo = if elastic { f64::NEG_INFINITY } else { comfort.hw_lo[g] };
        lp.add_var(format!("t_hw[{g}]"), 0.0, hw_lo, comfort.hw_hi[g]);
        debug_assert_eq!(lp.n_vars(), (k + 1) * layout.stride());
    }

    for (k, g) in window.clone().enumerate() {
        let r = lp.add_eq(
            vec![
                (layout.d_h(k), 1.0),
                (layout.p_hp_sh(k), -1.0),
                (layout.p_hp_hw(k), -1.0),
                (layout.p_a_sh(k), -1.0),
                (layout.p_a_hw(k), -1.0),
            ],
            0.0,
        );
        lp.crash_hint.push((r, layout.d_h(k)));

        let mut heat_balance: Vec<(usize, f64)> = (0..nz).map(|z| (layout.q(k, z), 1.0)).collect();
        heat_balance.push((layout.p_hp_sh(k), -cfg.cop_sh(g)));
        heat_balance.push((layout.p_a_sh(k), -1.0));
        let r = lp.add_eq(heat_balance, 0.0);
        lp.crash_hint.push((r, layout.q(k, 0)));

        for i in 0..n {
            let mut row = vec![(layout.t_sh(k, i), 1.0)];
            let mut rhs = cfg.gains.e[g][i];
            for j in 0..n {
                let a = b.a[(i, j)];
                if a != 0.0 {
                    if k == 0 {
                        rhs += a * x0.t_sh[j];
                    } else {
                        row.push((layout.t_sh(k - 1, j), -a));
                    }
                }
            }
            for z in 0..nz {
                let bz = b.b[(i, z)];
                if bz != 0.0 {
                    row.push((layout.q(k, z), -bz));
                }
            }
            let r = lp.add_eq(row, rhs);
            lp.crash_hint.push((r, layout.t_sh(k, i)));
        }

        let mut row = vec![
            (layout.t_hw(k), 1.0 + loss),
            (layout.p_hp_hw(k), -heat * b.cop_hw),
            (layout.p_a_hw(k), -heat),
        ];
        let mut rhs = loss * tank.t_env - heat * cfg.gains.hw_draw[g];
        if k == 0 {
            rhs += x0.t_hw;
        } else {
            row.push((layout.t_hw(k - 1), -1.0));
        }
        let r = lp.add_eq(row, rhs);
        lp.crash_hint.push((r, layout.t_hw(k)));
    }

    for k in 0..layout.n_steps {
        lp.add_ub(vec![(layout.p_hp_sh(k), 1.0), (layout.p_hp_hw(k), 1.0)], b.p_hp_max);
        lp.add_ub(vec![(layout.p_a_sh(k), 1.0), (layout.p_a_hw(k), 1.0)], b.p_a_max);
    }

    if elastic {
        // t + s >= lo, s >= 0, with s penalized in the objective.
        for (k, g) in window.clone().enumerate() {
            for i in 0..n {
                if let Some(z) = b.zone_of_state[i] {
                    let s = lp.add_var(format!("slack_t_sh[{g}][{i}]"), RELAXATION_PENALTY, 0.0, f64::INFINITY);
                    lp.add_ub(vec![(layout.t_sh(k, i), -1.0), (s, -1.0)], -t_lo(g, z));
                }
            }
            let s = lp.add_var(format!("slack_t_hw[{g}]"), RELAXATION_PENALTY, 0.0, f64::INFINITY);
            lp.add_ub(vec![(layout.t_hw(k), -1.0), (s, -1.0)], -comfort.hw_lo[g]);
        }
    }
    lp.validate()?;
    Ok(lp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub d_h: f64,
    pub p_hp: f64,
    pub p_a: f64,
    pub p_hp_sh: f64,
    pub p_hp_hw: f64,
    pub p_a_sh: f64,
    pub p_a_hw: f64,
    pub q_sh: Vec<f64>,
    /// State at the end of the step.
    pub t_sh: Vec<f64>,
    pub t_hw: f64,
    pub presence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationFlag {
    pub window_start: usize,
    /// Largest lower-bound shortfall among committed steps (°C).
    pub max_shortfall: f64,
    pub steps_relaxed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub schema_version: u32,
    pub building_id: String,
    pub profile_seed: Option<u64>,
    pub dt_hours: f64,
    pub n_states: usize,
    pub n_zones: usize,
    pub relaxations: Vec<RelaxationFlag>,
    pub lp_iterations: usize,
    pub energy_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub meta: TraceMeta,
    pub steps: Vec<TraceStep>,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_relaxed(&self) -> bool {
        !self.meta.relaxations.is_empty()
    }

    /// Largest comfort-bound violation over the trace (°C, 0 when feasible).
    pub fn max_comfort_violation(&self, building: &BuildingModel, comfort: &ComfortSchedule) -> f64 {
        let mut worst: f64 = 0.0;
        for (t, s) in self.steps.iter().enumerate() {
            for (i, z) in building.zone_of_state.iter().enumerate() {
                if let Some(z) = z {
                    worst = worst.max(comfort.t_lo[t][*z] - s.t_sh[i]).max(s.t_sh[i] - comfort.t_hi[t][*z]);
                }
            }
            worst = worst.max(comfort.hw_lo[t] - s.t_hw).max(s.t_hw - comfort.hw_hi[t]);
        }
        worst
    }

    pub fn series(&self, column: TraceColumn) -> Vec<f64> {
        self.steps.iter().map(|s| column.of(s)).collect()
    }
}

/// Scalar trace columns usable as Markov state variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceColumn {
    DH,
    PHp,
    PA,
    THw,
    TSh(usize),
}

impl TraceColumn {
    pub fn of(&self, s: &TraceStep) -> f64 {
        match *self {
            TraceColumn::DH => s.d_h,
            TraceColumn::PHp => s.p_hp,
            TraceColumn::PA => s.p_a,
            TraceColumn::THw => s.t_hw,
            TraceColumn::TSh(i) => s.t_sh[i],
        }
    }
}

struct WindowResult {
    steps: Vec<TraceStep>,
    end_state: ThermalState,
    iterations: usize,
    relaxation: Option<RelaxationFlag>,
}

fn clean_power(v: f64) -> f64 {
    // Basic variables can land a rounding error below a zero bound.
    if v < 0.0 && v > -FEASIBILITY_TOL {
        0.0
    } else {
        v
    }
}

fn solve_window(cfg: &ScenarioConfig, start: usize, commit: usize, x0: &ThermalState) -> Result<WindowResult, ScheduleError> {
    let end = (start + commit + cfg.lookahead_steps).min(cfg.horizon_steps);
    let b = &cfg.building;
    let layout = WindowLayout {
        n_zones: b.n_zones,
        n_states: b.n_states,
        n_steps: end - start,
    };
    let lp = build_window_lp_inner(cfg, start..end, x0, start + commit, false)?;
    let mut sol = solve_lp(&lp, FEASIBILITY_TOL, DEFAULT_MAX_ITER)?;
    let mut iterations = sol.iterations;
    let mut relaxation = None;
    if sol.status == LpStatus::Infeasible {
        let lp = build_window_lp_inner(cfg, start..end, x0, start + commit, true)?;
        sol = solve_lp(&lp, FEASIBILITY_TOL, DEFAULT_MAX_ITER)?;
        iterations += sol.iterations;
        if sol.status == LpStatus::Infeasible {
            return Err(free_response_violation(cfg, start..end, x0));
        }
        if sol.status == LpStatus::Optimal {
            let n_slack_per_step = b.zone_of_state.iter().filter(|z| z.is_some()).count() + 1;
            let base = layout.n_step_vars();
            let mut max_shortfall: f64 = 0.0;
            let mut steps_relaxed = 0;
            for k in 0..commit {
                let s = &sol.x[base + k * n_slack_per_step..base + (k + 1) * n_slack_per_step];
                let m = s.iter().fold(0.0f64, |a, v| a.max(*v));
                if m > FEASIBILITY_TOL {
                    steps_relaxed += 1;
                }
                max_shortfall = max_shortfall.max(m);
            }
            relaxation = Some(RelaxationFlag {
                window_start: start,
                max_shortfall,
                steps_relaxed,
            });
        }
    }
    if sol.status != LpStatus::Optimal {
        return Err(ScheduleError::Solver { start, status: sol.status });
    }
    let x = &sol.x;
    let steps: Vec<TraceStep> = (0..commit)
        .map(|k| {
            let p_hp_sh = clean_power(x[layout.p_hp_sh(k)]);
            let p_hp_hw = clean_power(x[layout.p_hp_hw(k)]);
            let p_a_sh = clean_power(x[layout.p_a_sh(k)]);
            let p_a_hw = clean_power(x[layout.p_a_hw(k)]);
            let p_hp = p_hp_sh + p_hp_hw;
            let p_a = p_a_sh + p_a_hw;
            let g = start + k;
            TraceStep {
                d_h: p_hp + p_a,
                p_hp,
                p_a,
                p_hp_sh,
                p_hp_hw,
                p_a_sh,
                p_a_hw,
                q_sh: (0..b.n_zones).map(|z| clean_power(x[layout.q(k, z)])).collect(),
                t_sh: (0..b.n_states).map(|i| x[layout.t_sh(k, i)]).collect(),
                t_hw: x[layout.t_hw(k)],
                presence: cfg.presence.get(g).copied().unwrap_or(false),
            }
        })
        .collect();
    let last = steps.last().expect("commit >= 1");
    let end_state = ThermalState {
        t_sh: last.t_sh.clone(),
        t_hw: last.t_hw,
    };
    Ok(WindowResult {
        steps,
        end_state,
        iterations,
        relaxation,
    })
}

/// Names the first upper bound the unheated response violates. Heating only
/// raises temperatures (`A`, `B` ≥ 0 for physical models), so if the relaxed
/// window is infeasible the zero-input trajectory must break an upper bound.
fn free_response_violation(cfg: &ScenarioConfig, window: Range<usize>, x0: &ThermalState) -> ScheduleError {
    let b = &cfg.building;
    let mut x = x0.t_sh.clone();
    let mut t_hw = x0.t_hw;
    for g in window.clone() {
        let zeros = vec![0.0; b.n_zones];
        x = match crate::thermal::step_thermal(b, &x, &zeros, &cfg.gains.e[g]) {
            Ok(v) => v,
            Err(e) => return e.into(),
        };
        for (i, z) in b.zone_of_state.iter().enumerate() {
            if let Some(z) = z {
                let hi = cfg.comfort.t_hi[g][*z];
                if x[i] > hi + FEASIBILITY_TOL {
                    return ScheduleError::Infeasible {
                        step: g,
                        bound: format!("t_sh[{i}] <= {hi} (unheated value {:.3})", x[i]),
                    };
                }
            }
        }
        t_hw = crate::thermal::step_tank(&b.tank, t_hw, 0.0, 0.0, cfg.gains.hw_draw[g], b.cop_hw, cfg.gains.dt_hours)
            .unwrap_or(t_hw);
        let hi = cfg.comfort.hw_hi[g];
        if t_hw > hi + FEASIBILITY_TOL {
            return ScheduleError::Infeasible {
                step: g,
                bound: format!("t_hw <= {hi} (unheated value {t_hw:.3})"),
            };
        }
    }
    ScheduleError::Infeasible {
        step: window.start,
        bound: "no single bound identified".into(),
    }
}

pub fn simulate_horizon(cfg: &ScenarioConfig) -> Result<SimulationTrace, ScheduleError> {
    cfg.validate()?;
    let b = &cfg.building;
    let mut steps = Vec::with_capacity(cfg.horizon_steps);
    let mut relaxations = Vec::new();
    let mut lp_iterations = 0;
    let mut x = cfg.initial_state.clone();
    let mut start = 0;
    while start < cfg.horizon_steps {
        let commit = cfg.window_steps.min(cfg.horizon_steps - start);
        let w = solve_window(cfg, start, commit, &x)?;
        lp_iterations += w.iterations;
        relaxations.extend(w.relaxation);
        steps.extend(w.steps);
        x = w.end_state;
        start += commit;
    }
    let energy_kwh = steps.iter().map(|s| s.d_h).sum::<f64>() * cfg.gains.dt_hours;
    Ok(SimulationTrace {
        meta: TraceMeta {
            schema_version: TRACE_SCHEMA_VERSION,
            building_id: b.id.clone(),
            profile_seed: cfg.profile_seed,
            dt_hours: cfg.gains.dt_hours,
            n_states: b.n_states,
            n_zones: b.n_zones,
            relaxations,
            lp_iterations,
            energy_kwh,
        },
        steps,
    })
}

/// Result of one ensemble member; failures keep their profile identity.
pub type EnsembleMember = Result<(SimulationTrace, ScenarioConfig), ScheduleError>;

/// Simulates `n_profiles` occupancy profiles derived from `master_seed`, in
/// parallel. Output order follows the profile index.
pub fn run_ensemble(template: &ScenarioTemplate, n_profiles: usize, master_seed: u64) -> Result<Vec<EnsembleMember>, ScheduleError> {
    if n_profiles == 0 {
        return Err(ScheduleError::Config("n_profiles must be >= 1".into()));
    }
    Ok((0..n_profiles)
        .into_par_iter()
        .map(|index| {
            let seed = derive_profile_seed(master_seed, index);
            let wrap = |e: ScheduleError| ScheduleError::Profile {
                index,
                seed,
                source: Box::new(e),
            };
            let profile =
                generate_profile(seed, template.horizon_steps, template.dt_hours(), &template.occupancy).map_err(|e| wrap(e.into()))?;
            let cfg = template.for_profile(&profile);
            let trace = simulate_horizon(&cfg).map_err(wrap)?;
            Ok((trace, cfg))
        })
        .collect())
}

pub fn trace_header(n_zones: usize, n_states: usize) -> Vec<String> {
    let mut h: Vec<String> = ["step", "presence", "d_h", "p_hp", "p_a", "p_hp_sh", "p_hp_hw", "p_a_sh", "p_a_hw"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..n_zones).map(|z| format!("q_sh_{z}")));
    h.extend((0..n_states).map(|i| format!("t_sh_{i}")));
    h.push("t_hw".into());
    h
}

fn trace_csv_err(e: csv::Error) -> ScheduleError {
    ScheduleError::TraceCsv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// Writes one row per step; floats use the shortest round-trip form.
pub fn write_trace_csv(trace: &SimulationTrace, out: impl Write) -> Result<(), ScheduleError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(trace.meta.n_zones, trace.meta.n_states)).map_err(trace_csv_err)?;
    for (t, s) in trace.steps.iter().enumerate() {
        let mut rec = vec![t.to_string(), u8::from(s.presence).to_string()];
        for v in [s.d_h, s.p_hp, s.p_a, s.p_hp_sh, s.p_hp_hw, s.p_a_sh, s.p_a_hw] {
            rec.push(v.to_string());
        }
        rec.extend(s.q_sh.iter().map(|v| v.to_string()));
        rec.extend(s.t_sh.iter().map(|v| v.to_string()));
        rec.push(s.t_hw.to_string());
        w.write_record(&rec).map_err(trace_csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]. Zone and state counts come
/// from the header; `meta` supplies everything else.
pub fn read_trace_csv(input: impl Read, mut meta: TraceMeta) -> Result<SimulationTrace, ScheduleError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(trace_csv_err)?.clone();
    let n_zones = header.iter().filter(|h| h.starts_with("q_sh_")).count();
    let n_states = header.iter().filter(|h| h.starts_with("t_sh_")).count();
    let expected = trace_header(n_zones, n_states);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(ScheduleError::TraceCsv {
            line: 1,
            message: format!("header must be `{}`", expected.join(",")),
        });
    }
    meta.n_zones = n_zones;
    meta.n_states = n_states;
    let mut steps = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(trace_csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |k: usize| -> Result<f64, ScheduleError> {
            rec[k].trim().parse::<f64>().map_err(|_| ScheduleError::TraceCsv {
                line,
                message: format!("column `{}`: cannot parse `{}`", expected[k], &rec[k]),
            })
        };
        let presence = match rec[1].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(ScheduleError::TraceCsv {
                    line,
                    message: format!("presence must be 0 or 1, got `{other}`"),
                })
            }
        };
        let q0 = 9;
        let t0 = q0 + n_zones;
        steps.push(TraceStep {
            presence,
            d_h: num(2)?,
            p_hp: num(3)?,
            p_a: num(4)?,
            p_hp_sh: num(5)?,
            p_hp_hw: num(6)?,
            p_a_sh: num(7)?,
            p_a_hw: num(8)?,
            q_sh: (q0..t0).map(num).collect::<Result<_, _>>()?,
            t_sh: (t0..t0 + n_states).map(num).collect::<Result<_, _>>()?,
            t_hw: num(t0 + n_states)?,
        });
    }
    if steps.is_empty() {
        return Err(ScheduleError::TraceCsv {
            line: 1,
            message: "trace has no rows".into(),
        });
    }
    Ok(SimulationTrace { meta, steps })
}

//! Shared fixtures and oracles for integration tests and the acceptance run.
#![allow(dead_code)]

use bmdp_core::matrix::Matrix;
use bmdp_core::mdp::{BackwardPass, MdpProblem};
use bmdp_core::occupancy::ComfortSchedule;
use bmdp_core::schedule::ScenarioConfig;
use bmdp_core::thermal::{BuildingModel, CopModel, GainSchedule, TankParams, ThermalState};

pub const TOY_DT: f64 = 0.25;
pub const TOY_A: f64 = 0.9;
pub const TOY_B: f64 = 0.5;
pub const TOY_E: f64 = 1.8;
pub const TOY_COP: f64 = 3.0;
pub const TOY_P_HP: f64 = 0.5;
pub const TOY_P_A: f64 = 0.5;
pub const TOY_X0: f64 = 19.5;
/// Lower bounds for the two steps; the second cannot be met without
/// preheating and the auxiliary heater.
pub const TOY_LO: [f64; 2] = [20.0, 20.9];
pub const TOY_HI: f64 = 23.0;

pub fn one_state_building(n_zones: usize) -> BuildingModel {
    let mut b = vec![0.0; n_zones];
    b[0] = TOY_B;
    BuildingModel {
        schema_version: 1,
        id: "toy".into(),
        n_states: 1,
        n_zones,
        a: Matrix::from_rows(vec![vec![TOY_A]]).unwrap(),
        b: Matrix::from_rows(vec![b]).unwrap(),
        cop_sh: CopModel::Constant(TOY_COP),
        cop_hw: 2.5,
        p_hp_max: TOY_P_HP,
        p_a_max: TOY_P_A,
        tank: TankParams::water(200.0, 0.0, 15.0),
        zone_of_state: vec![Some(0)],
        occupancy_gain: vec![],
    }
}

/// Two steps, one zone, lossless undrawn tank sitting inside its band.
pub fn two_step_toy() -> ScenarioConfig {
    let n = 2;
    ScenarioConfig {
        building: one_state_building(1),
        gains: GainSchedule {
            e: vec![vec![TOY_E]; n],
            hw_draw: vec![0.0; n],
            ambient: vec![5.0; n],
            dt_hours: TOY_DT,
        },
        comfort: ComfortSchedule {
            t_lo: TOY_LO.iter().map(|l| vec![*l]).collect(),
            t_hi: vec![vec![TOY_HI]; n],
            hw_lo: vec![45.0; n],
            hw_hi: vec![60.0; n],
        },
        horizon_steps: n,
        window_steps: n,
        lookahead_steps: 0,
        initial_state: ThermalState {
            t_sh: vec![TOY_X0],
            t_hw: 50.0,
        },
        presence: vec![true; n],
        profile_seed: None,
    }
}

pub const GRID_KW: f64 = 1e-3;

/// Exhaustive search over `(p_hp_sh, p_a_sh)` per step on a `GRID_KW`
/// lattice for the two-step toy. Returns the least energy in kWh.
///
/// For each step-0 pair and step-1 heat-pump value, the step-1 auxiliary
/// value is the smallest lattice point meeting the bound, which is what a
/// scan over that axis would return.
pub fn toy_grid_optimum() -> Option<f64> {
    let steps = |max: f64| (max / GRID_KW).round() as i64;
    let (n_hp, n_a) = (steps(TOY_P_HP), steps(TOY_P_A));
    let mut best = f64::INFINITY;
    for h0 in 0..=n_hp {
        for a0 in 0..=n_a {
            let (ph0, pa0) = (h0 as f64 * GRID_KW, a0 as f64 * GRID_KW);
            let x1 = TOY_A * TOY_X0 + TOY_B * (TOY_COP * ph0 + pa0) + TOY_E;
            if x1 < TOY_LO[0] - 1e-12 || x1 > TOY_HI + 1e-12 {
                continue;
            }
            for h1 in 0..=n_hp {
                let ph1 = h1 as f64 * GRID_KW;
                let base = TOY_A * x1 + TOY_B * TOY_COP * ph1 + TOY_E;
                let need = ((TOY_LO[1] - base) / TOY_B).max(0.0);
                let a1 = (need / GRID_KW - 1e-9).ceil().max(0.0) as i64;
                if a1 > n_a {
                    continue;
                }
                let pa1 = a1 as f64 * GRID_KW;
                let x2 = base + TOY_B * pa1;
                if x2 > TOY_HI + 1e-12 {
                    continue;
                }
                best = best.min((ph0 + pa0 + ph1 + pa1) * TOY_DT);
            }
        }
    }
    best.is_finite().then_some(best)
}

/// Objective change caused by moving one control by one lattice step.
pub fn grid_cell_increment() -> f64 {
    GRID_KW * TOY_DT
}

/// 3-state, 3-step instance with dense random `P̄`, random `U`, and an
/// interior `ρ0`.
pub fn random_small_mdp(seed: u64) -> MdpProblem {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let s = 3;
    let mut p = Matrix::zeros(s, s);
    for b in 0..s {
        let col: Vec<f64> = (0..s).map(|_| rng.gen_range(0.1..1.0)).collect();
        let sum: f64 = col.iter().sum();
        for a in 0..s {
            p[(a, b)] = col[a] / sum;
        }
    }
    let utility = (0..3).map(|_| (0..s).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect();
    MdpProblem {
        p_bar: vec![p],
        utility,
        gamma: 1.0,
        rho0: vec![0.5, 0.3, 0.2],
        horizon: 3,
        p_alpha: vec![0.0, 1.0, 2.0],
        q_alpha: vec![0.0; s],
    }
}

/// `Σ_t KL(P_t ‖ P̄ | ρ_t) − Σ_t ρ_{t+1}·U_t`, written out directly.
pub fn mdp_objective(prob: &MdpProblem, policy: &[Vec<Vec<f64>>]) -> f64 {
    let s = prob.rho0.len();
    let mut rho = prob.rho0.clone();
    let mut total = 0.0;
    for (t, cols) in policy.iter().enumerate() {
        let pb = prob.p_bar_at(t);
        let mut next = vec![0.0; s];
        for b in 0..s {
            for a in 0..s {
                let x = cols[b][a];
                next[a] += x * rho[b];
                if x > 0.0 {
                    total += rho[b] * x * (x / pb[(a, b)]).ln();
                }
            }
        }
        for a in 0..s {
            total -= next[a] * prob.utility[t][a];
        }
        rho = next;
    }
    total
}

/// Numeric minimizer over per-step column-stochastic matrices: coordinate
/// search on one column at a time over a lattice of the 2-simplex around
/// the current point, with the lattice spacing refined down to 1e-4.
/// Only for `S = 3`.
pub fn brute_force_mdp(prob: &MdpProblem) -> f64 {
    let s = 3;
    assert_eq!(prob.rho0.len(), s);
    let mut policy: Vec<Vec<Vec<f64>>> = (0..prob.horizon)
        .map(|t| (0..s).map(|b| prob.p_bar_at(t).col(b)).collect())
        .collect();
    let mut best = mdp_objective(prob, &policy);
    for h in [0.05, 0.01, 1e-3, 1e-4] {
        let reach: i64 = if h == 0.05 { 20 } else { 12 };
        for _sweep in 0..200 {
            let before = best;
            for t in 0..prob.horizon {
                for b in 0..s {
                    let centre = policy[t][b].clone();
                    let mut local = centre.clone();
                    for i in -reach..=reach {
                        for j in -reach..=reach {
                            let x0 = centre[0] + i as f64 * h;
                            let x1 = centre[1] + j as f64 * h;
                            let x2 = 1.0 - x0 - x1;
                            if x0 < 0.0 || x1 < 0.0 || x2 < 0.0 {
                                continue;
                            }
                            policy[t][b] = vec![x0, x1, x2];
                            let v = mdp_objective(prob, &policy);
                            if v < best {
                                best = v;
                                local = policy[t][b].clone();
                            }
                        }
                    }
                    policy[t][b] = local;
                }
            }
            if before - best < 1e-12 {
                break;
            }
        }
    }
    best
}

/// Largest spread over the support of
/// `log(P*/P̄) − U_t − log z_{t+1}` in any column `β` with `ρ_t^β > 1e-9`.
pub fn kkt_spread(prob: &MdpProblem, back: &BackwardPass, rho: &[Vec<f64>]) -> f64 {
    let s = prob.rho0.len();
    let mut worst: f64 = 0.0;
    for t in 0..prob.horizon {
        let pb = prob.p_bar_at(t);
        for b in 0..s {
            if rho[t][b] <= 1e-9 {
                continue;
            }
            let vals: Vec<f64> = (0..s)
                .filter(|&a| pb[(a, b)] > 0.0)
                .map(|a| (back.p_star[t][(a, b)] / pb[(a, b)]).ln() - prob.utility[t][a] - back.log_z[t + 1][a])
                .collect();
            let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
            worst = worst.max(hi - lo);
        }
    }
    worst
}

//! KL-regularized ensemble control over a fixed Markov process.
//!
//! With unit penalty weights the problem is linearly solvable: a backward
//! pass over desirabilities `z` yields the optimal transition matrices in
//! closed form, and a forward pass propagates the state distribution.
//! All backward arithmetic is in log space.
//!
//! Indexing: `utility[t][α]` is the utility collected on arriving in `α` at
//! step `t + 1`; `rho[t]` is the distribution at step `t` (`T + 1` entries).

use serde::{Deserialize, Serialize};

use crate::markov::{stationary_distribution, TransitionMatrix};
use crate::matrix::Matrix;

pub const SOLUTION_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_POWER_FACTOR: f64 = 0.95;
pub const DEFAULT_MDP_HORIZON: usize = 96;
/// Column sums of `P̄` must be this close to one.
pub const STOCHASTIC_TOL: f64 = 1e-9;
/// Allowed total-mass drift of the forward pass.
pub const DRIFT_TOL: f64 = 1e-12;
const FLUSH: f64 = 1e-300;
/// Columns of `P*` further than this from unit mass are rescaled.
const RENORM_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MdpError {
    #[error("gamma must be 1 for the analytic solver, got {0}")]
    Gamma(f64),
    #[error("horizon must be >= 1")]
    Horizon,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("rho0 is not a distribution: {0}")]
    Rho0(String),
    #[error("utility is not finite at step {t}, state {alpha}")]
    Utility { t: usize, alpha: usize },
    #[error("P_bar at step {t}: column {beta} sums to {sum}")]
    NotStochastic { t: usize, beta: usize, sum: f64 },
    #[error("P_bar at step {t} has a negative or non-finite entry at [{alpha}][{beta}]")]
    BadEntry { t: usize, alpha: usize, beta: usize },
    #[error("desirability vanishes at step {t}, state {beta}: every successor is forbidden")]
    ZeroDesirability { t: usize, beta: usize },
    #[error("forward pass drifted off the simplex at step {t} (total mass off by {drift:e})")]
    Drift { t: usize, drift: f64 },
    #[error("controlled transition [{alpha}][{beta}] has no support in P_bar")]
    Support { alpha: usize, beta: usize },
    #[error("power factor must be in (0, 1], got {0}")]
    PowerFactor(f64),
    #[error("prices: {0}")]
    Prices(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpProblem {
    /// One matrix broadcast over all steps, or one per step.
    pub p_bar: Vec<Matrix>,
    pub utility: Vec<Vec<f64>>,
    pub gamma: f64,
    pub rho0: Vec<f64>,
    pub horizon: usize,
    /// Active power per state (kW, consumption positive).
    pub p_alpha: Vec<f64>,
    /// Reactive power per state (kvar).
    pub q_alpha: Vec<f64>,
}

impl MdpProblem {
    pub fn n_states(&self) -> usize {
        self.rho0.len()
    }

    pub fn p_bar_at(&self, t: usize) -> &Matrix {
        if self.p_bar.len() == 1 {
            &self.p_bar[0]
        } else {
            &self.p_bar[t]
        }
    }

    pub fn validate(&self) -> Result<(), MdpError> {
        if self.gamma != 1.0 {
            return Err(MdpError::Gamma(self.gamma));
        }
        if self.horizon == 0 {
            return Err(MdpError::Horizon);
        }
        let s = self.n_states();
        if s == 0 {
            return Err(MdpError::Dimension("no states".into()));
        }
        if self.p_bar.len() != 1 && self.p_bar.len() != self.horizon {
            return Err(MdpError::Dimension(format!(
                "{} P_bar matrices for horizon {}; expected 1 or {}",
                self.p_bar.len(),
                self.horizon,
                self.horizon
            )));
        }
        for (t, p) in self.p_bar.iter().enumerate() {
            if p.rows() != s || p.cols() != s {
                return Err(MdpError::Dimension(format!("P_bar[{t}] is {}x{}, expected {s}x{s}", p.rows(), p.cols())));
            }
            for b in 0..s {
                for a in 0..s {
                    let v = p[(a, b)];
                    if !(v >= 0.0) || !v.is_finite() {
                        return Err(MdpError::BadEntry { t, alpha: a, beta: b });
                    }
                }
                let sum = p.col_sum(b);
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(MdpError::NotStochastic { t, beta: b, sum });
                }
            }
        }
        if self.utility.len() != self.horizon {
            return Err(MdpError::Dimension(format!("{} utility rows for horizon {}", self.utility.len(), self.horizon)));
        }
        for (t, u) in self.utility.iter().enumerate() {
            if u.len() != s {
                return Err(MdpError::Dimension(format!("utility row {t} has {} entries, expected {s}", u.len())));
            }
            if let Some(alpha) = u.iter().position(|v| !v.is_finite()) {
                return Err(MdpError::Utility { t, alpha });
            }
        }
        if self.p_alpha.len() != s || self.q_alpha.len() != s {
            return Err(MdpError::Dimension(format!("p_alpha and q_alpha need {s} entries")));
        }
        if self.rho0.iter().any(|v| !(*v >= 0.0)) {
            return Err(MdpError::Rho0("negative or NaN entry".into()));
        }
        let mass: f64 = self.rho0.iter().sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(MdpError::Rho0(format!("sums to {mass}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardPass {
    /// `log z_t`, `t = 0..=T`; `log z_T = 0`.
    pub log_z: Vec<Vec<f64>>,
    pub p_star: Vec<Matrix>,
}

pub fn backward_pass(prob: &MdpProblem) -> Result<BackwardPass, MdpError> {
    prob.validate()?;
    let s = prob.n_states();
    let big_t = prob.horizon;
    let mut log_z = vec![vec![0.0; s]; big_t + 1];
    let mut p_star = vec![Matrix::zeros(s, s); big_t];
    for t in (0..big_t).rev() {
        let p = prob.p_bar_at(t);
        let u = &prob.utility[t];
        let mut pt = Matrix::zeros(s, s);
        for b in 0..s {
            // Shift by the largest exponent on the support so every factor is <= 1.
            let max = (0..s)
                .filter(|&a| p[(a, b)] > 0.0)
                .map(|a| u[a] + log_z[t + 1][a])
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(MdpError::ZeroDesirability { t, beta: b });
            }
            let mut col = 0.0;
            let mut mass = 0.0;
            for a in 0..s {
                if p[(a, b)] > 0.0 {
                    col += p[(a, b)] * (u[a] + log_z[t + 1][a] - max).exp();
                }
                mass += p[(a, b)];
            }
            // Relative to the column's own mass, so a zero exponent gives
            // log z = 0 and P* = P̄ bit for bit.
            log_z[t][b] = max + (col / mass).ln();
            let mut kept = 0.0;
            for a in 0..s {
                let v = if p[(a, b)] > 0.0 {
                    p[(a, b)] * (u[a] + log_z[t + 1][a] - log_z[t][b]).exp()
                } else {
                    0.0
                };
                let v = if v < FLUSH { 0.0 } else { v };
                pt[(a, b)] = v;
                kept += v;
            }
            if (kept - 1.0).abs() > RENORM_TOL {
                for a in 0..s {
                    pt[(a, b)] /= kept;
                }
            }
        }
        p_star[t] = pt;
    }
    Ok(BackwardPass { log_z, p_star })
}

/// `rho[t+1] = P*_t · rho[t]`; fails if total mass drifts beyond
/// [`DRIFT_TOL`].
pub fn forward_pass(p_star: &[Matrix], rho0: &[f64]) -> Result<Vec<Vec<f64>>, MdpError> {
    let mut rho = Vec::with_capacity(p_star.len() + 1);
    rho.push(rho0.to_vec());
    for (t, p) in p_star.iter().enumerate() {
        if p.cols() != rho0.len() || p.rows() != rho0.len() {
            return Err(MdpError::Dimension(format!("P_star[{t}] does not match rho0 of length {}", rho0.len())));
        }
        let next = p.mul_vec(&rho[t]);
        let drift = (next.iter().sum::<f64>() - 1.0).abs();
        if drift > DRIFT_TOL {
            return Err(MdpError::Drift { t: t + 1, drift });
        }
        rho.push(next);
    }
    Ok(rho)
}

/// Expected active and reactive power for every distribution in `rho`.
pub fn expected_power(rho: &[Vec<f64>], p_alpha: &[f64], q_alpha: &[f64]) -> Result<(Vec<f64>, Vec<f64>), MdpError> {
    let dot = |a: &[f64], b: &[f64]| -> Result<f64, MdpError> {
        if a.len() != b.len() {
            return Err(MdpError::Dimension(format!("distribution has {} states, power table {}", a.len(), b.len())));
        }
        Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
    };
    let p = rho.iter().map(|r| dot(r, p_alpha)).collect::<Result<_, _>>()?;
    let q = rho.iter().map(|r| dot(r, q_alpha)).collect::<Result<_, _>>()?;
    Ok((p, q))
}

/// `Σ_β ρ^β Σ_α P*^{αβ} log(P*^{αβ} / P̄^{αβ})`, with `0·log 0 = 0`.
pub fn kl_cost(p_star: &Matrix, p_bar: &Matrix, rho: &[f64]) -> Result<f64, MdpError> {
    let s = rho.len();
    if p_star.rows() != s || p_star.cols() != s || p_bar.rows() != s || p_bar.cols() != s {
        return Err(MdpError::Dimension(format!("kl_cost needs {s}x{s} matrices")));
    }
    let mut total = 0.0;
    for b in 0..s {
        let mut col = 0.0;
        for a in 0..s {
            let ps = p_star[(a, b)];
            if ps == 0.0 {
                continue;
            }
            let pb = p_bar[(a, b)];
            if pb <= 0.0 {
                return Err(MdpError::Support { alpha: a, beta: b });
            }
            col += ps * (ps / pb).ln();
        }
        total += rho[b] * col;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSolution {
    pub schema_version: u32,
    pub horizon: usize,
    pub n_states: usize,
    pub rho: Vec<Vec<f64>>,
    pub p_t: Vec<f64>,
    pub q_t: Vec<f64>,
    pub kl_cost: Vec<f64>,
    /// Expected utility collected on each step.
    pub utility: Vec<f64>,
    pub objective: f64,
    pub log_z0: Vec<f64>,
    pub p_alpha: Vec<f64>,
    pub q_alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_star: Option<Vec<Matrix>>,
}

impl MdpSolution {
    pub fn without_p_star(mut self) -> Self {
        self.p_star = None;
        self
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }
}

pub fn solve(prob: &MdpProblem) -> Result<MdpSolution, MdpError> {
    let back = backward_pass(prob)?;
    let rho = forward_pass(&back.p_star, &prob.rho0)?;
    let (p_t, q_t) = expected_power(&rho, &prob.p_alpha, &prob.q_alpha)?;
    let mut kl = Vec::with_capacity(prob.horizon);
    let mut util = Vec::with_capacity(prob.horizon);
    for t in 0..prob.horizon {
        kl.push(kl_cost(&back.p_star[t], prob.p_bar_at(t), &rho[t])?);
        util.push(rho[t + 1].iter().zip(&prob.utility[t]).map(|(r, u)| r * u).sum::<f64>());
    }
    let objective = kl.iter().sum::<f64>() - util.iter().sum::<f64>();
    Ok(MdpSolution {
        schema_version: SOLUTION_SCHEMA_VERSION,
        horizon: prob.horizon,
        n_states: prob.n_states(),
        rho,
        p_t,
        q_t,
        kl_cost: kl,
        utility: util,
        objective,
        log_z0: back.log_z[0].clone(),
        p_alpha: prob.p_alpha.clone(),
        q_alpha: prob.q_alpha.clone(),
        p_star: Some(back.p_star),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub horizon: usize,
    pub power_factor: f64,
    pub utility_weight: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_MDP_HORIZON,
            power_factor: DEFAULT_POWER_FACTOR,
            utility_weight: 1.0,
        }
    }
}

/// Price-driven problem on a built matrix, one decision per matrix step.
/// The ensemble starts in the stationary distribution of `P̄`.
pub fn price_problem(tm: &TransitionMatrix, prices: &[f64], params: &ControlParams) -> Result<MdpProblem, MdpError> {
    if prices.len() < params.horizon {
        return Err(MdpError::Prices(format!("{} prices for horizon {}", prices.len(), params.horizon)));
    }
    let (rho0, _) = stationary_distribution(&tm.probs);
    let total: f64 = rho0.iter().sum();
    Ok(MdpProblem {
        p_bar: vec![tm.probs.clone()],
        utility: build_utility(&prices[..params.horizon], &tm.state_power, tm.dt_hours, params.utility_weight)?,
        gamma: 1.0,
        rho0: rho0.iter().map(|v| v / total).collect(),
        horizon: params.horizon,
        p_alpha: tm.state_power.clone(),
        q_alpha: reactive_power(&tm.state_power, params.power_factor)?,
    })
}

/// `q = p·tan(acos(pf))`.
pub fn reactive_power(p_alpha: &[f64], power_factor: f64) -> Result<Vec<f64>, MdpError> {
    if !(power_factor > 0.0 && power_factor <= 1.0) {
        return Err(MdpError::PowerFactor(power_factor));
    }
    let k = power_factor.acos().tan();
    Ok(p_alpha.iter().map(|p| p * k).collect())
}

/// `U[t][α] = −weight · price[t] · p^α · dt_hours`.
pub fn build_utility(prices: &[f64], p_alpha: &[f64], dt_hours: f64, weight: f64) -> Result<Vec<Vec<f64>>, MdpError> {
    if let Some(t) = prices.iter().position(|p| !p.is_finite()) {
        return Err(MdpError::Prices(format!("price at step {t} is not finite")));
    }
    Ok(prices
        .iter()
        .map(|price| p_alpha.iter().map(|p| -weight * price * p * dt_hours).collect())
        .collect())
}

/// Deterministic day-shaped wholesale tariff (per MWh) with a morning
/// shoulder and a sharp evening peak; the day starts at 00:00.
pub fn synthetic_prices(n_steps: usize, dt_hours: f64) -> Vec<f64> {
    let bump = |h: f64, centre: f64, width: f64| (-0.5 * ((h - centre) / width).powi(2)).exp();
    (0..n_steps)
        .map(|t| {
            let h = (t as f64 * dt_hours) % 24.0;
            let p = 45.0 + 35.0 * bump(h, 8.0, 1.5) + 110.0 * bump(h, 19.0, 1.25);
            (p * 100.0).round() / 100.0
        })
        .collect()
}

/// Shannon entropy in nats.
pub fn entropy(rho: &[f64]) -> f64 {
    -rho.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

//! Reduction of simulation traces to a time-homogeneous, column-stochastic
//! Markov process over discretized (temperature × power) states.
//!
//! Orientation: `probs[α][β]` is the probability of moving to state `α`
//! from state `β`, so every column sums to one. Product-mode states are
//! numbered `α = i_temp·m + i_power`.

use std::io::Write;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::schedule::{SimulationTrace, TraceColumn};

pub const MATRIX_SCHEMA_VERSION: u32 = 1;
pub const ORIENTATION: &str = "probs[alpha][beta] = P(alpha <- beta); columns sum to 1";
/// Convergence tolerance (L1 change per iteration) of the stationary solve.
pub const STATIONARY_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum MarkovError {
    #[error("binning: {0}")]
    Binning(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("no traces supplied")]
    NoTraces,
    #[error("state index {index} out of range for {n_states} states")]
    StateOutOfRange { index: usize, n_states: usize },
    #[error("trace references thermal state {0}, which it does not have")]
    TempSource(usize),
    #[error("matrix file: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("matrix file: {0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Power variable that defines the dispatch range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerVar {
    HeatPump,
    Auxiliary,
}

impl PowerVar {
    pub fn column(self) -> TraceColumn {
        match self {
            PowerVar::HeatPump => TraceColumn::PHp,
            PowerVar::Auxiliary => TraceColumn::PA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateMode {
    /// `n·m` states crossing temperature and power bins.
    Product,
    /// `m` power states; temperature is marginalized out.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Never-visited source states stay put.
    SelfLoop,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub power_var: PowerVar,
    /// Thermal state index supplying the temperature dimension.
    pub temp_source: usize,
    pub n_temp_bins: usize,
    pub n_power_bins: usize,
    /// `None` means the min/max over the supplied traces.
    pub temp_range: Option<(f64, f64)>,
    pub power_range: Option<(f64, f64)>,
    pub mode: StateMode,
}

impl BinningSpec {
    pub fn product(power_var: PowerVar, n_temp_bins: usize, n_power_bins: usize) -> Self {
        Self {
            power_var,
            temp_source: 0,
            n_temp_bins,
            n_power_bins,
            temp_range: None,
            power_range: None,
            mode: StateMode::Product,
        }
    }

    pub fn marginal(power_var: PowerVar, n_power_bins: usize) -> Self {
        Self {
            n_temp_bins: 1,
            mode: StateMode::Marginal,
            ..Self::product(power_var, 1, n_power_bins)
        }
    }

    pub fn validate(&self) -> Result<(), MarkovError> {
        if self.n_power_bins < 2 {
            return Err(MarkovError::Binning(format!("n_power_bins must be >= 2, got {}", self.n_power_bins)));
        }
        if self.mode == StateMode::Product && self.n_temp_bins < 2 {
            return Err(MarkovError::Binning(format!("n_temp_bins must be >= 2 in product mode, got {}", self.n_temp_bins)));
        }
        for (name, r) in [("temp_range", self.temp_range), ("power_range", self.power_range)] {
            if let Some((lo, hi)) = r {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(MarkovError::Binning(format!("{name} needs finite lo < hi, got [{lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        match self.mode {
            StateMode::Product => self.n_temp_bins * self.n_power_bins,
            StateMode::Marginal => self.n_power_bins,
        }
    }

    /// Fixes auto ranges against `traces` and computes bin edges.
    pub fn resolve(&self, traces: &[SimulationTrace]) -> Result<ResolvedBinning, MarkovError> {
        self.validate()?;
        let auto = |col: TraceColumn| -> Result<(f64, f64), MarkovError> {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for tr in traces {
                for s in &tr.steps {
                    let v = col.of(s);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if !lo.is_finite() {
                return Err(MarkovError::NoTraces);
            }
            // A constant series still needs a nonempty range.
            if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
                hi = lo + 1.0;
            }
            Ok((lo, hi))
        };
        if traces.iter().any(|t| t.steps.iter().any(|s| s.t_sh.len() <= self.temp_source)) {
            return Err(MarkovError::TempSource(self.temp_source));
        }
        let temp_range = match self.temp_range {
            Some(r) => r,
            None => auto(TraceColumn::TSh(self.temp_source))?,
        };
        let power_range = match self.power_range {
            Some(r) => r,
            None => auto(self.power_var.column())?,
        };
        let n_temp = match self.mode {
            StateMode::Product => self.n_temp_bins,
            StateMode::Marginal => 1,
        };
        Ok(ResolvedBinning {
            spec: self.clone(),
            temp_edges: uniform_edges(temp_range, n_temp),
            power_edges: uniform_edges(power_range, self.n_power_bins),
        })
    }
}

fn uniform_edges((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let mut e: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    e[n] = hi;
    e
}

/// Which edge bin `v` falls in; interior edges belong to the upper bin and
/// out-of-range values clamp. Returns `(bin, below, above)`.
pub fn bin_of(v: f64, edges: &[f64]) -> (usize, bool, bool) {
    let n = edges.len() - 1;
    if v < edges[0] {
        return (0, true, false);
    }
    if v > edges[n] {
        return (n - 1, false, true);
    }
    let k = edges.partition_point(|e| *e <= v);
    (k.saturating_sub(1).min(n - 1), false, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedBinning {
    pub spec: BinningSpec,
    pub temp_edges: Vec<f64>,
    pub power_edges: Vec<f64>,
}

impl ResolvedBinning {
    pub fn n_states(&self) -> usize {
        self.spec.n_states()
    }

    fn n_power(&self) -> usize {
        self.power_edges.len() - 1
    }

    pub fn state_of(&self, i_temp: usize, i_power: usize) -> usize {
        match self.spec.mode {
            StateMode::Product => i_temp * self.n_power() + i_power,
            StateMode::Marginal => i_power,
        }
    }

    /// Power-bin midpoint of every state (kW).
    pub fn state_power(&self) -> Vec<f64> {
        let e = &self.power_edges;
        (0..self.n_states()).map(|a| {
            let k = a % self.n_power();
            0.5 * (e[k] + e[k + 1])
        }).collect()
    }

    /// Temperature-bin midpoint of every state (°C).
    pub fn state_temp(&self) -> Vec<f64> {
        let e = &self.temp_edges;
        (0..self.n_states())
            .map(|a| {
                let k = match self.spec.mode {
                    StateMode::Product => a / self.n_power(),
                    StateMode::Marginal => 0,
                };
                0.5 * (e[k] + e[k + 1])
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampCounts {
    pub temp_below: u64,
    pub temp_above: u64,
    pub power_below: u64,
    pub power_above: u64,
}

impl ClampCounts {
    fn add(&mut self, o: &ClampCounts) {
        self.temp_below += o.temp_below;
        self.temp_above += o.temp_above;
        self.power_below += o.power_below;
        self.power_above += o.power_above;
    }

    pub fn total(&self) -> u64 {
        self.temp_below + self.temp_above + self.power_below + self.power_above
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateIndexSequence {
    pub indices: Vec<usize>,
    pub n_states: usize,
    pub clamps: ClampCounts,
}

pub fn discretize(trace: &SimulationTrace, bins: &ResolvedBinning) -> Result<StateIndexSequence, MarkovError> {
    if trace.steps.is_empty() {
        return Err(MarkovError::EmptyTrace);
    }
    let mut clamps = ClampCounts::default();
    let temp_col = TraceColumn::TSh(bins.spec.temp_source);
    let power_col = bins.spec.power_var.column();
    let mut indices = Vec::with_capacity(trace.steps.len());
    for s in &trace.steps {
        if s.t_sh.len() <= bins.spec.temp_source {
            return Err(MarkovError::TempSource(bins.spec.temp_source));
        }
        let i_temp = match bins.spec.mode {
            StateMode::Product => {
                let (k, lo, hi) = bin_of(temp_col.of(s), &bins.temp_edges);
                clamps.temp_below += u64::from(lo);
                clamps.temp_above += u64::from(hi);
                k
            }
            StateMode::Marginal => 0,
        };
        let (i_power, lo, hi) = bin_of(power_col.of(s), &bins.power_edges);
        clamps.power_below += u64::from(lo);
        clamps.power_above += u64::from(hi);
        indices.push(bins.state_of(i_temp, i_power));
    }
    Ok(StateIndexSequence {
        indices,
        n_states: bins.n_states(),
        clamps,
    })
}

/// `counts[α][β]` = number of steps from `β` at `t` to `α` at `t+1`, pooled
/// over time and sequences; no pair spans two sequences.
pub fn count_transitions(seqs: &[StateIndexSequence], n_states: usize) -> Result<Vec<Vec<u64>>, MarkovError> {
    for seq in seqs {
        if let Some(&index) = seq.indices.iter().find(|&&a| a >= n_states) {
            return Err(MarkovError::StateOutOfRange { index, n_states });
        }
    }
    let counts = seqs
        .par_iter()
        .fold(
            || vec![vec![0u64; n_states]; n_states],
            |mut acc, seq| {
                for w in seq.indices.windows(2) {
                    acc[w[1]][w[0]] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![vec![0u64; n_states]; n_states],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(&b) {
                    for (x, y) in ra.iter_mut().zip(rb) {
                        *x += y;
                    }
                }
                a
            },
        );
    Ok(counts)
}

/// Divides each column by its total. Empty columns follow `fallback`; their
/// indices are returned alongside the matrix.
pub fn normalize(counts: &[Vec<u64>], fallback: Fallback) -> (Matrix, Vec<usize>) {
    let s = counts.len();
    let mut probs = Matrix::zeros(s, s);
    let mut empty = Vec::new();
    for beta in 0..s {
        let total: u64 = (0..s).map(|a| counts[a][beta]).sum();
        if total == 0 {
            empty.push(beta);
            match fallback {
                Fallback::SelfLoop => probs[(beta, beta)] = 1.0,
                Fallback::Uniform => (0..s).for_each(|a| probs[(a, beta)] = 1.0 / s as f64),
            }
        } else {
            for a in 0..s {
                probs[(a, beta)] = counts[a][beta] as f64 / total as f64;
            }
        }
    }
    (probs, empty)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub schema_version: u32,
    pub orientation: String,
    pub bins: ResolvedBinning,
    pub fallback: Fallback,
    pub counts: Vec<Vec<u64>>,
    pub probs: Matrix,
    pub state_power: Vec<f64>,
    pub state_temp: Vec<f64>,
    /// Step length of the source traces.
    pub dt_hours: f64,
    pub n_traces: usize,
    pub n_transitions: u64,
    /// Source states that were never visited and received the fallback.
    pub fallback_columns: Vec<usize>,
    pub clamps: ClampCounts,
}

impl TransitionMatrix {
    pub fn n_states(&self) -> usize {
        self.probs.rows()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }

    /// Parses and checks shapes; stochasticity is left to [`validate_matrix`].
    pub fn from_json_str(s: &str) -> Result<Self, MarkovError> {
        let tm: TransitionMatrix = serde_json::from_str(s)?;
        let n = tm.probs.rows();
        let shape = |m: String| Err(MarkovError::Shape(m));
        if !tm.probs.is_square() || n == 0 {
            return shape(format!("probs must be square and nonempty, got {}x{}", n, tm.probs.cols()));
        }
        if tm.counts.len() != n || tm.counts.iter().any(|r| r.len() != n) {
            return shape(format!("counts must be {n}x{n}"));
        }
        if tm.state_power.len() != n || tm.state_temp.len() != n {
            return shape(format!("state_power and state_temp must have {n} entries"));
        }
        Ok(tm)
    }

    /// Probabilities as CSV: a header of source states, one row per target.
    pub fn write_probs_csv(&self, out: impl Write) -> Result<(), MarkovError> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.n_states();
        let mut header = vec!["to\\from".to_string()];
        header.extend((0..n).map(|b| b.to_string()));
        w.write_record(&header).map_err(std::io::Error::other)?;
        for a in 0..n {
            let mut rec = vec![a.to_string()];
            rec.extend(self.probs.row(a).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(std::io::Error::other)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full reduction: resolve bins, discretize each trace, count, normalize.
pub fn build_transition_matrix(
    traces: &[SimulationTrace],
    spec: &BinningSpec,
    fallback: Fallback,
) -> Result<TransitionMatrix, MarkovError> {
    if traces.is_empty() {
        return Err(MarkovError::NoTraces);
    }
    let dt_hours = traces[0].meta.dt_hours;
    if traces.iter().any(|t| t.meta.dt_hours != dt_hours) {
        return Err(MarkovError::Binning("traces disagree on dt_hours".into()));
    }
    let bins = spec.resolve(traces)?;
    let seqs: Vec<StateIndexSequence> = traces.iter().map(|t| discretize(t, &bins)).collect::<Result<_, _>>()?;
    let s = bins.n_states();
    let counts = count_transitions(&seqs, s)?;
    let (probs, fallback_columns) = normalize(&counts, fallback);
    let mut clamps = ClampCounts::default();
    for q in &seqs {
        clamps.add(&q.clamps);
    }
    Ok(TransitionMatrix {
        schema_version: MATRIX_SCHEMA_VERSION,
        orientation: ORIENTATION.to_string(),
        state_power: bins.state_power(),
        state_temp: bins.state_temp(),
        dt_hours,
        bins,
        fallback,
        n_transitions: counts.iter().flatten().sum(),
        counts,
        probs,
        n_traces: traces.len(),
        fallback_columns,
        clamps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunicatingClass {
    pub states: Vec<usize>,
    /// No probability leaves the class.
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_states: usize,
    /// Largest `|Σ_α probs[α][β] − 1|`.
    pub column_residual: f64,
    pub negative_entries: usize,
    pub non_finite_entries: usize,
    /// Fraction of nonzero entries.
    pub density: f64,
    /// Mean of the diagonal.
    pub diagonal_mass: f64,
    pub classes: Vec<CommunicatingClass>,
    pub irreducible: bool,
    /// Present when the chain is irreducible.
    pub stationary: Option<Vec<f64>>,
    pub stationary_converged: bool,
    pub clamps: Option<ClampCounts>,
}

impl ValidationReport {
    pub fn is_stochastic(&self, tol: f64) -> bool {
        self.column_residual <= tol && self.negative_entries == 0 && self.non_finite_entries == 0
    }
}

pub fn validate_matrix(tm: &TransitionMatrix) -> ValidationReport {
    let mut r = validate_probs(&tm.probs);
    r.clamps = Some(tm.clamps);
    r
}

/// Structural report for any square matrix read as column-stochastic.
pub fn validate_probs(p: &Matrix) -> ValidationReport {
    let n = p.rows();
    let mut column_residual: f64 = 0.0;
    for b in 0..p.cols() {
        column_residual = column_residual.max((p.col_sum(b) - 1.0).abs());
    }
    let vals = p.as_slice();
    let negative_entries = vals.iter().filter(|v| **v < 0.0).count();
    let non_finite_entries = vals.iter().filter(|v| !v.is_finite()).count();
    let nonzero = vals.iter().filter(|v| **v != 0.0).count();
    let density = nonzero as f64 / vals.len().max(1) as f64;
    let diagonal_mass = if n == 0 { 0.0 } else { (0..n).map(|i| p[(i, i)]).sum::<f64>() / n as f64 };

    let mut g = DiGraph::<usize, ()>::with_capacity(n, nonzero);
    let nodes: Vec<_> = (0..n).map(|i| g.add_node(i)).collect();
    for a in 0..n {
        for b in 0..n {
            if p[(a, b)] > 0.0 {
                g.add_edge(nodes[b], nodes[a], ());
            }
        }
    }
    let mut comp = vec![0usize; n];
    let mut sccs: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|ix| g[ix]).collect();
            v.sort_unstable();
            v
        })
        .collect();
    sccs.sort();
    for (k, c) in sccs.iter().enumerate() {
        for &s in c {
            comp[s] = k;
        }
    }
    let classes: Vec<CommunicatingClass> = sccs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let closed = c.iter().all(|&b| (0..n).all(|a| p[(a, b)] <= 0.0 || comp[a] == k));
            CommunicatingClass {
                states: c.clone(),
                closed,
            }
        })
        .collect();
    let irreducible = classes.len() == 1;
    let (stationary, stationary_converged) = if irreducible && negative_entries == 0 && non_finite_entries == 0 {
        let (pi, ok) = stationary_distribution(p);
        (Some(pi), ok)
    } else {
        (None, false)
    };
    ValidationReport {
        n_states: n,
        column_residual,
        negative_entries,
        non_finite_entries,
        density,
        diagonal_mass,
        classes,
        irreducible,
        stationary,
        stationary_converged,
        clamps: None,
    }
}

/// Power iteration on the lazy chain `Q = (I + P)/2`, which shares the
/// stationary vector of `P` and is aperiodic. Iterates are taken in doubling
/// steps: after `k` squarings `π = Q^(2^k)·u` for uniform `u`. Converged when
/// `‖P·π − π‖₁ < STATIONARY_TOL`.
pub fn stationary_distribution(p: &Matrix) -> (Vec<f64>, bool) {
    let n = p.rows();
    let residual = |pi: &[f64]| -> f64 { p.mul_vec(pi).iter().zip(pi).map(|(a, b)| (a - b).abs()).sum() };
    let mut pi = vec![1.0 / n as f64; n];
    if residual(&pi) < STATIONARY_TOL {
        return (pi, true);
    }
    let mut q = (p.to_nalgebra() + nalgebra::DMatrix::identity(n, n)) * 0.5;
    let u = nalgebra::DVector::from_element(n, 1.0 / n as f64);
    // 2^60 lazy steps is far past any chain a trace ensemble can produce.
    for _ in 0..60 {
        q = &q * &q;
        let v = &q * &u;
        let total = v.sum();
        pi = v.iter().map(|x| x / total).collect();
        if residual(&pi) < STATIONARY_TOL {
            return (pi, true);
        }
    }
    (pi, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{TraceMeta, TraceStep};

    pub(crate) fn trace_from(temps: &[f64], p_hp: &[f64], p_a: &[f64]) -> SimulationTrace {
        SimulationTrace {
            meta: TraceMeta {
                schema_version: 1,
                building_id: "t".into(),
                profile_seed: None,
                dt_hours: 0.25,
                n_states: 1,
                n_zones: 1,
                relaxations: vec![],
                lp_iterations: 0,
                energy_kwh: 0.0,
            },
            steps: temps
                .iter()
                .zip(p_hp)
                .zip(p_a)
                .map(|((&t, &h), &a)| TraceStep {
                    d_h: h + a,
                    p_hp: h,
                    p_a: a,
                    p_hp_sh: h,
                    p_hp_hw: 0.0,
                    p_a_sh: a,
                    p_a_hw: 0.0,
                    q_sh: vec![0.0],
                    t_sh: vec![t],
                    t_hw: 50.0,
                    presence: true,
                })
                .collect(),
        }
    }

    fn seq(v: &[usize], n: usize) -> StateIndexSequence {
        StateIndexSequence {
            indices: v.to_vec(),
            n_states: n,
            clamps: ClampCounts::default(),
        }
    }

    #[test]
    fn constant_trace_gives_constant_sequence() {
        let tr = trace_from(&[20.0; 5], &[1.0; 5], &[0.0; 5]);
        let bins = BinningSpec::product(PowerVar::HeatPump, 3, 4).resolve(&[tr.clone()]).unwrap();
        let s = discretize(&tr, &bins).unwrap();
        assert!(s.indices.iter().all(|&i| i == s.indices[0]));
    }

    #[test]
    fn two_by_two_bin_arithmetic() {
        let mut spec = BinningSpec::product(PowerVar::HeatPump, 2, 2);
        spec.temp_range = Some((0.0, 1.0));
        spec.power_range = Some((0.0, 1.0));
        let tr = trace_from(&[0.25], &[0.75], &[0.0]);
        let bins = spec.resolve(&[tr.clone()]).unwrap();
        assert_eq!(discretize(&tr, &bins).unwrap().indices, vec![1]);
    }

    #[test]
    fn edges_go_up_and_outliers_clamp() {
        let edges = uniform_edges((0.0, 1.0), 4);
        assert_eq!(bin_of(0.5, &edges), (2, false, false));
        assert_eq!(bin_of(0.0, &edges), (0, false, false));
        assert_eq!(bin_of(1.0, &edges), (3, false, false));
        assert_eq!(bin_of(-0.1, &edges), (0, true, false));
        assert_eq!(bin_of(7.0, &edges), (3, false, true));
    }

    #[test]
    fn clamp_counter_increments() {
        let mut spec = BinningSpec::marginal(PowerVar::HeatPump, 2);
        spec.power_range = Some((0.0, 1.0));
        let tr = trace_from(&[20.0; 3], &[-1.0, 0.5, 2.0], &[0.0; 3]);
        let bins = spec.resolve(&[tr.clone()]).unwrap();
        let s = discretize(&tr, &bins).unwrap();
        assert_eq!(s.indices, vec![0, 1, 1]);
        assert_eq!(s.clamps.power_below, 1);
        assert_eq!(s.clamps.power_above, 1);
    }

    #[test]
    fn counting_contracts() {
        let c = count_transitions(&[seq(&[0, 0, 0], 2)], 2).unwrap();
        assert_eq!(c[0][0], 2);
        let c = count_transitions(&[seq(&[0, 1], 2), seq(&[1, 0], 2)], 2).unwrap();
        assert_eq!(c[1][0], 1);
        assert_eq!(c[0][1], 1);
        assert_eq!(c[0][0] + c[1][1], 0);
        assert!(count_transitions(&[seq(&[0, 5], 2)], 2).is_err());
    }

    #[test]
    fn normalization_contracts() {
        let mut counts = vec![vec![0u64; 4]; 4];
        counts[0][0] = 2;
        counts[1][0] = 2;
        let (p, empty) = normalize(&counts, Fallback::SelfLoop);
        assert_eq!(p.col(0), vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(empty, vec![1, 2, 3]);
        for b in 1..4 {
            assert_eq!(p[(b, b)], 1.0);
            assert_eq!(p.col_sum(b), 1.0);
        }
        let (u, _) = normalize(&counts, Fallback::Uniform);
        assert!((u.col_sum(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_report() {
        let r = validate_probs(&Matrix::identity(5));
        assert_eq!(r.density, 1.0 / 5.0);
        assert_eq!(r.diagonal_mass, 1.0);
        assert_eq!(r.classes.len(), 5);
        assert!(r.classes.iter().all(|c| c.closed && c.states.len() == 1));
        assert!(r.stationary.is_none());
    }

    #[test]
    fn uniform_report() {
        let r = validate_probs(&Matrix::filled(4, 4, 0.25));
        assert_eq!(r.density, 1.0);
        assert!(r.irreducible);
        let pi = r.stationary.unwrap();
        assert!(pi.iter().all(|v| (v - 0.25).abs() < 1e-12));
        assert!(r.column_residual < 1e-15);
    }

    #[test]
    fn periodic_chain_still_converges() {
        let p = Matrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let (pi, ok) = stationary_distribution(&p);
        assert!(ok);
        assert!((pi[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn open_and_closed_classes() {
        // 0 -> 1 -> 1: {0} transient, {1} closed.
        let p = Matrix::from_rows(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let r = validate_probs(&p);
        assert_eq!(r.classes.len(), 2);
        let c0 = r.classes.iter().find(|c| c.states == vec![0]).unwrap();
        let c1 = r.classes.iter().find(|c| c.states == vec![1]).unwrap();
        assert!(!c0.closed && c1.closed);
    }

    #[test]
    fn degenerate_auto_range_is_widened() {
        let tr = trace_from(&[20.0; 4], &[0.5; 4], &[0.0; 4]);
        let tm = build_transition_matrix(&[tr], &BinningSpec::marginal(PowerVar::Auxiliary, 3), Fallback::SelfLoop).unwrap();
        assert_eq!(tm.bins.power_edges[0], 0.0);
        assert!(tm.bins.power_edges[3] > 0.0);
        assert_eq!(tm.probs[(0, 0)], 1.0);
    }

    #[test]
    fn json_round_trip_and_missing_field() {
        let tr = trace_from(&[20.0, 21.0, 20.5, 21.5], &[0.0, 1.0, 0.5, 1.0], &[0.0; 4]);
        let tm = build_transition_matrix(&[tr], &BinningSpec::product(PowerVar::HeatPump, 2, 2), Fallback::SelfLoop).unwrap();
        let back = TransitionMatrix::from_json_str(&tm.to_json_string()).unwrap();
        assert_eq!(back, tm);
        let mut v: serde_json::Value = serde_json::from_str(&tm.to_json_string()).unwrap();
        v.as_object_mut().unwrap().remove("probs");
        let err = TransitionMatrix::from_json_str(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("probs"), "{err}");
    }

    #[test]
    fn rejects_bad_binning() {
        assert!(BinningSpec::product(PowerVar::HeatPump, 1, 4).validate().is_err());
        assert!(BinningSpec::marginal(PowerVar::HeatPump, 1).validate().is_err());
        let mut s = BinningSpec::marginal(PowerVar::HeatPump, 3);
        s.power_range = Some((1.0, 1.0));
        assert!(s.validate().is_err());
    }

    fn seqs_strategy() -> impl proptest::strategy::Strategy<Value = Vec<Vec<usize>>> {
        proptest::collection::vec(proptest::collection::vec(0usize..6, 1..40), 1..8)
    }

    proptest::proptest! {
        #[test]
        fn pooled_counts_commute(raw in seqs_strategy(), rot in 0usize..8) {
            let seqs: Vec<_> = raw.iter().map(|v| seq(v, 6)).collect();
            let mut shuffled = seqs.clone();
            shuffled.reverse();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            let a = count_transitions(&seqs, 6).unwrap();
            let b = count_transitions(&shuffled, 6).unwrap();
            proptest::prop_assert_eq!(&a, &b);
            proptest::prop_assert_eq!(normalize(&a, Fallback::SelfLoop), normalize(&b, Fallback::SelfLoop));
            let total: u64 = a.iter().flatten().sum();
            proptest::prop_assert_eq!(total, raw.iter().map(|v| v.len() as u64 - 1).sum::<u64>());
        }

        #[test]
        fn normalized_columns_are_stochastic(raw in seqs_strategy(), uniform in proptest::bool::ANY) {
            let seqs: Vec<_> = raw.iter().map(|v| seq(v, 6)).collect();
            let fb = if uniform { Fallback::Uniform } else { Fallback::SelfLoop };
            let (p, _) = normalize(&count_transitions(&seqs, 6).unwrap(), fb);
            for b in 0..6 {
                proptest::prop_assert!((p.col(b).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}

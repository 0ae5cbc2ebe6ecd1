//! Dense revised simplex with bounded variables.
//!
//! Solves `min cᵀx` subject to `A_eq·x = b_eq`, `A_ub·x ≤ b_ub`, `lo ≤ x ≤ hi`.
//! The basis inverse is kept as an explicit dense matrix and updated with
//! product-form pivots; only rows touched by the pivot column are rewritten.
//! Phase 1 is a composite phase that minimizes the sum of bound violations of
//! the basic variables, so any starting basis (slacks, artificials, or a
//! caller-supplied crash basis) is admissible.
//!
//! Pricing is Dantzig's largest reduced cost with a two-pass Harris ratio
//! test. After a run of degenerate pivots the solver switches to Bland's
//! lowest-index rule until the objective moves again, which prevents
//! cycling. Every choice is a deterministic function of the input.

use std::fmt::Write as _;
use std::io;

/// Default primal feasibility / reduced-cost tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Smallest admissible pivot magnitude.
pub const PIVOT_TOL: f64 = 1e-9;
/// Default iteration cap for [`solve_lp`] callers that have no better bound.
pub const DEFAULT_MAX_ITER: usize = 200_000;

const DRIFT_CHECK_EVERY: usize = 64;
const DRIFT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots after which pricing falls back to Bland.
const BLAND_AFTER_DEGENERATE: usize = 50;
const DEGENERATE_STEP: f64 = 1e-12;
/// Entries of pivot columns and inverse rows below this are dropped; the
/// periodic residual check refactorizes if the accumulated error matters.
const DROP_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("variable {index} ({name}) has lo {lo} > hi {hi}")]
    InvertedBounds {
        index: usize,
        name: String,
        lo: f64,
        hi: f64,
    },
    #[error("NaN in {0}")]
    NotANumber(&'static str),
    #[error("basis matrix is singular and could not be refactorized")]
    SingularBasis,
    #[error("numerical breakdown: {0}")]
    Numerical(&'static str),
}

/// Row-wise sparse constraint matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRows {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(n_cols: usize) -> Self {
        Self {
            n_cols,
            rows: Vec::new(),
        }
    }

    pub fn from_dense(n_cols: usize, dense: &[Vec<f64>]) -> Self {
        let mut m = Self::new(n_cols);
        for row in dense {
            m.push_row(
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect(),
            );
        }
        m
    }

    pub fn push_row(&mut self, coeffs: Vec<(usize, f64)>) -> usize {
        self.rows.push(coeffs);
        self.rows.len() - 1
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * x[j]).sum()
    }

    fn set_n_cols(&mut self, n: usize) {
        self.n_cols = n;
    }
}

#[derive(Debug, Clone)]
pub struct LpInstance {
    pub c: Vec<f64>,
    pub a_eq: SparseRows,
    pub b_eq: Vec<f64>,
    pub a_ub: SparseRows,
    pub b_ub: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub names: Vec<String>,
    /// Optional crash basis: `(equality row, variable)` pairs. The variable
    /// replaces that row's artificial in the starting basis. Ignored when
    /// the resulting basis is singular.
    pub crash_hint: Vec<(usize, usize)>,
}

impl LpInstance {
    /// `n_vars` variables with zero cost and bounds `[0, +inf)`.
    pub fn new(n_vars: usize) -> Self {
        Self {
            c: vec![0.0; n_vars],
            a_eq: SparseRows::new(n_vars),
            b_eq: Vec::new(),
            a_ub: SparseRows::new(n_vars),
            b_ub: Vec::new(),
            lo: vec![0.0; n_vars],
            hi: vec![f64::INFINITY; n_vars],
            names: (0..n_vars).map(|j| format!("x{j}")).collect(),
            crash_hint: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lo: f64, hi: f64) -> usize {
        self.c.push(cost);
        self.lo.push(lo);
        self.hi.push(hi);
        self.names.push(name.into());
        let n = self.c.len();
        self.a_eq.set_n_cols(n);
        self.a_ub.set_n_cols(n);
        n - 1
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.b_eq.push(rhs);
        self.a_eq.push_row(coeffs)
    }

    pub fn add_ub(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.b_ub.push(rhs);
        self.a_ub.push_row(coeffs)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        let check_len = |what, found: usize, expected: usize| {
            if found != expected {
                Err(LpError::Dimension {
                    what,
                    expected,
                    found,
                })
            } else {
                Ok(())
            }
        };
        check_len("lo", self.lo.len(), n)?;
        check_len("hi", self.hi.len(), n)?;
        check_len("names", self.names.len(), n)?;
        check_len("b_eq", self.b_eq.len(), self.a_eq.n_rows())?;
        check_len("b_ub", self.b_ub.len(), self.a_ub.n_rows())?;
        for (what, rows) in [("a_eq", &self.a_eq), ("a_ub", &self.a_ub)] {
            for row in &rows.rows {
                for &(j, v) in row {
                    if j >= n {
                        return Err(LpError::Dimension {
                            what,
                            expected: n,
                            found: j + 1,
                        });
                    }
                    if v.is_nan() {
                        return Err(LpError::NotANumber(what));
                    }
                }
            }
        }
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NotANumber("c"));
        }
        if self.b_eq.iter().chain(&self.b_ub).any(|v| !v.is_finite()) {
            return Err(LpError::NotANumber("rhs"));
        }
        for j in 0..n {
            if self.lo[j].is_nan() || self.hi[j].is_nan() {
                return Err(LpError::NotANumber("bounds"));
            }
            if self.lo[j] > self.hi[j] || self.lo[j] == f64::INFINITY || self.hi[j] == f64::NEG_INFINITY {
                return Err(LpError::InvertedBounds {
                    index: j,
                    name: self.names[j].clone(),
                    lo: self.lo[j],
                    hi: self.hi[j],
                });
            }
        }
        for &(r, j) in &self.crash_hint {
            if r >= self.a_eq.n_rows() || j >= n {
                return Err(LpError::Dimension {
                    what: "crash_hint",
                    expected: self.a_eq.n_rows(),
                    found: r,
                });
            }
        }
        Ok(())
    }

    /// Plain-text dump for cross-checking with external solvers.
    ///
    /// ```text
    /// var <index> <name> <lo> <hi> <cost>
    /// eq <row> <rhs> : <var>:<coef> ...
    /// ub <row> <rhs> : <var>:<coef> ...
    /// ```
    pub fn dump(&self, mut out: impl io::Write) -> io::Result<()> {
        writeln!(out, "# lp n_vars={} n_eq={} n_ub={}", self.n_vars(), self.b_eq.len(), self.b_ub.len())?;
        for j in 0..self.n_vars() {
            writeln!(out, "var {j} {} {} {} {}", self.names[j], self.lo[j], self.hi[j], self.c[j])?;
        }
        for (kind, rows, rhs) in [("eq", &self.a_eq, &self.b_eq), ("ub", &self.a_ub, &self.b_ub)] {
            for (i, row) in rows.rows.iter().enumerate() {
                let mut line = format!("{kind} {i} {} :", rhs[i]);
                for &(j, v) in row {
                    let _ = write!(line, " {j}:{v}");
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Row duals of the equality block (meaningful when optimal).
    pub duals_eq: Vec<f64>,
    /// Row duals of the inequality block; nonpositive at an optimum.
    pub duals_ub: Vec<f64>,
    /// `c - Aᵀy` for the structural variables.
    pub reduced_costs: Vec<f64>,
}

pub fn solve_lp(inst: &LpInstance, tol: f64, max_iter: usize) -> Result<LpSolution, LpError> {
    inst.validate()?;
    let mut simplex = Simplex::new(inst, tol);
    simplex.run(max_iter)
}

const NONBASIC: usize = usize::MAX;

struct Simplex {
    m: usize,
    n_struct: usize,
    m_eq: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    position: Vec<usize>,
    x: Vec<f64>,
    binv: Vec<f64>,
    tol: f64,
    // scratch
    y: Vec<f64>,
    alpha: Vec<f64>,
    pivot_row: Vec<f64>,
    pivot_nz: Vec<usize>,
}

struct Ratio {
    theta: f64,
    var: usize,
    /// Basis position of the leaving variable; `None` for a bound flip.
    row: Option<usize>,
    bound: f64,
}

impl Simplex {
    fn new(inst: &LpInstance, tol: f64) -> Self {
        let n = inst.n_vars();
        let m_eq = inst.a_eq.n_rows();
        let m_ub = inst.a_ub.n_rows();
        let m = m_eq + m_ub;
        let n_total = n + m_ub + m_eq;

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_total];
        for i in 0..m_eq {
            for &(j, v) in inst.a_eq.row(i) {
                if v != 0.0 {
                    cols[j].push((i, v));
                }
            }
        }
        for k in 0..m_ub {
            for &(j, v) in inst.a_ub.row(k) {
                if v != 0.0 {
                    cols[j].push((m_eq + k, v));
                }
            }
            cols[n + k].push((m_eq + k, 1.0));
        }
        for i in 0..m_eq {
            cols[n + m_ub + i].push((i, 1.0));
        }

        let mut cost = inst.c.clone();
        cost.resize(n_total, 0.0);
        let mut lo = inst.lo.clone();
        let mut hi = inst.hi.clone();
        lo.resize(n + m_ub, 0.0);
        hi.resize(n + m_ub, f64::INFINITY);
        lo.resize(n_total, 0.0);
        hi.resize(n_total, 0.0);

        let mut b = inst.b_eq.clone();
        b.extend_from_slice(&inst.b_ub);

        let x = (0..n_total)
            .map(|j| {
                if lo[j].is_finite() {
                    lo[j]
                } else if hi[j].is_finite() {
                    hi[j]
                } else {
                    0.0
                }
            })
            .collect();

        let mut s = Self {
            m,
            n_struct: n,
            m_eq,
            cols,
            cost,
            lo,
            hi,
            b,
            basis: Vec::new(),
            position: vec![NONBASIC; n_total],
            x,
            binv: Vec::new(),
            tol,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
            pivot_row: vec![0.0; m],
            pivot_nz: Vec::with_capacity(m),
        };
        let slack_basis: Vec<usize> = (0..m)
            .map(|i| if i < m_eq { n + m_ub + i } else { n + (i - m_eq) })
            .collect();

        let mut hinted = slack_basis.clone();
        let mut used = vec![false; n_total];
        let mut any_hint = false;
        for &(r, j) in &inst.crash_hint {
            if !used[j] && hinted[r] == slack_basis[r] {
                hinted[r] = j;
                used[j] = true;
                any_hint = true;
            }
        }
        if !(any_hint && s.install_basis(hinted)) {
            let ok = s.install_basis(slack_basis);
            debug_assert!(ok, "slack basis is the identity");
        }
        s
    }

    /// Installs `basis`, refactorizes and recomputes basic values.
    /// Returns false (leaving state untouched) when the basis is singular.
    fn install_basis(&mut self, basis: Vec<usize>) -> bool {
        let Some(binv) = invert_basis(self.m, &basis, &self.cols) else {
            return false;
        };
        for &j in &self.basis {
            self.position[j] = NONBASIC;
        }
        for (i, &j) in basis.iter().enumerate() {
            self.position[j] = i;
        }
        // Nonbasic variables must sit on a bound (or zero when free).
        for j in 0..self.x.len() {
            if self.position[j] == NONBASIC {
                self.x[j] = self.nonbasic_resting_value(j);
            }
        }
        self.basis = basis;
        self.binv = binv;
        self.recompute_basic_values();
        true
    }

    fn nonbasic_resting_value(&self, j: usize) -> f64 {
        let (l, u, v) = (self.lo[j], self.hi[j], self.x[j]);
        if l.is_finite() && u.is_finite() {
            if (v - u).abs() < (v - l).abs() {
                u
            } else {
                l
            }
        } else if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            0.0
        }
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut rhs = self.b.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.position[j] == NONBASIC && self.x[j] != 0.0 {
                for &(r, v) in col {
                    rhs[r] -= v * self.x[j];
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let val: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.basis[i]] = val;
        }
    }

    fn residual(&self) -> Vec<f64> {
        let mut r = self.b.clone();
        for (j, col) in self.cols.iter().enumerate() {
            let xj = self.x[j];
            if xj != 0.0 {
                for &(i, v) in col {
                    r[i] -= v * xj;
                }
            }
        }
        r
    }

    fn refine(&mut self) -> Result<(), LpError> {
        let r = self.residual();
        let scale = 1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let worst = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if worst <= DRIFT_TOL * scale {
            return Ok(());
        }
        let basis = self.basis.clone();
        if !self.install_basis(basis) {
            return Err(LpError::SingularBasis);
        }
        Ok(())
    }

    fn infeasibility_costs(&self, costs: &mut [f64]) -> bool {
        let mut any = false;
        for (i, &j) in self.basis.iter().enumerate() {
            let v = self.x[j];
            costs[i] = if v < self.lo[j] - self.tol {
                any = true;
                -1.0
            } else if v > self.hi[j] + self.tol {
                any = true;
                1.0
            } else {
                0.0
            };
        }
        any
    }

    fn compute_duals(&mut self, cb: &[f64]) {
        let m = self.m;
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &c) in cb.iter().enumerate() {
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, bk) in self.y.iter_mut().zip(row) {
                    *yk += c * bk;
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize, phase_one: bool) -> f64 {
        let c = if phase_one { 0.0 } else { self.cost[j] };
        c - self.cols[j].iter().map(|&(r, v)| self.y[r] * v).sum::<f64>()
    }

    /// Entering variable. Dantzig pricing (largest improving reduced cost)
    /// normally; in `bland` mode the lowest-index improving variable, which
    /// rules out cycling through a run of degenerate pivots.
    fn choose_entering(&self, phase_one: bool, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.cols.len() {
            if self.position[j] != NONBASIC || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced_cost(j, phase_one);
            let xj = self.x[j];
            let dir = if d < -self.tol && xj < self.hi[j] {
                1.0
            } else if d > self.tol && xj > self.lo[j] {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn compute_alpha(&mut self, q: usize) {
        let m = self.m;
        let col = &self.cols[q];
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let a: f64 = col.iter().map(|&(r, v)| row[r] * v).sum();
            self.alpha[i] = if a.abs() < DROP_TOL { 0.0 } else { a };
        }
    }

    /// Breakpoints of basic variable `i` along the entering direction:
    /// `(exact step, step relaxed by the feasibility tolerance, bound hit)`.
    fn breakpoint(&self, i: usize, dir: f64) -> Option<(f64, f64, f64)> {
        let a = self.alpha[i];
        if a.abs() <= PIVOT_TOL {
            return None;
        }
        let rate = -dir * a;
        let j = self.basis[i];
        let (v, l, u, tol) = (self.x[j], self.lo[j], self.hi[j], self.tol);
        if v < l - tol {
            // Infeasible below: the breakpoint is where it becomes feasible.
            (rate > 0.0).then(|| ((l - v) / rate, (l - v + tol) / rate, l))
        } else if v > u + tol {
            (rate < 0.0).then(|| ((u - v) / rate, (u - v - tol) / rate, u))
        } else if rate < 0.0 {
            l.is_finite().then(|| ((v - l) / -rate, (v - l + tol) / -rate, l))
        } else {
            u.is_finite().then(|| ((u - v) / rate, (u - v + tol) / rate, u))
        }
    }

    /// Two-pass (Harris) ratio test. Pass one finds the largest step that
    /// keeps every basic variable within tolerance of its bounds; pass two
    /// picks, among breakpoints not beyond that step, the largest pivot
    /// (normal mode) or the lowest variable index (Bland mode).
    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> Option<Ratio> {
        let mut theta_max = f64::INFINITY;
        for i in 0..self.m {
            if let Some((_, relaxed, _)) = self.breakpoint(i, dir) {
                theta_max = theta_max.min(relaxed);
            }
        }
        let range = self.hi[q] - self.lo[q];
        if range.is_finite() && range <= theta_max {
            let bound = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
            return Some(Ratio {
                theta: range,
                var: q,
                row: None,
                bound,
            });
        }
        if theta_max == f64::INFINITY {
            return None;
        }
        let mut best: Option<(Ratio, f64)> = None;
        let mut max_pivot: f64 = 0.0;
        for i in 0..self.m {
            if let Some((exact, _, _)) = self.breakpoint(i, dir) {
                if exact <= theta_max {
                    max_pivot = max_pivot.max(self.alpha[i].abs());
                }
            }
        }
        for i in 0..self.m {
            let Some((exact, _, bound)) = self.breakpoint(i, dir) else {
                continue;
            };
            if exact > theta_max {
                continue;
            }
            let a = self.alpha[i].abs();
            let var = self.basis[i];
            let better = match &best {
                None => true,
                Some((b, b_a)) => {
                    if bland {
                        // Lowest index among numerically acceptable pivots.
                        let ok = a >= 1e-3 * max_pivot;
                        let b_ok = *b_a >= 1e-3 * max_pivot;
                        (ok && !b_ok) || (ok == b_ok && var < b.var)
                    } else {
                        a > *b_a || (a == *b_a && var < b.var)
                    }
                }
            };
            if better {
                best = Some((
                    Ratio {
                        theta: exact.max(0.0),
                        var,
                        row: Some(i),
                        bound,
                    },
                    a,
                ));
            }
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, q: usize, dir: f64, ratio: &Ratio) {
        let m = self.m;
        let theta = ratio.theta;
        if theta != 0.0 {
            for i in 0..m {
                let a = self.alpha[i];
                if a != 0.0 {
                    self.x[self.basis[i]] -= dir * a * theta;
                }
            }
            self.x[q] += dir * theta;
        }
        let Some(r) = ratio.row else {
            self.x[q] = ratio.bound;
            return;
        };
        let leaving = self.basis[r];
        self.x[leaving] = ratio.bound;
        self.position[leaving] = NONBASIC;
        self.basis[r] = q;
        self.position[q] = r;

        let ar = self.alpha[r];
        self.pivot_row.copy_from_slice(&self.binv[r * m..(r + 1) * m]);
        for v in self.pivot_row.iter_mut() {
            *v /= ar;
            if v.abs() < DROP_TOL {
                *v = 0.0;
            }
        }
        // Rows of the inverse stay fairly sparse for staircase bases; a
        // gathered update beats a dense sweep below ~1/4 density.
        self.pivot_nz.clear();
        self.pivot_nz.extend((0..m).filter(|&c| self.pivot_row[c] != 0.0));
        let sparse = self.pivot_nz.len() * 4 < m;
        for i in 0..m {
            let a = self.alpha[i];
            if i == r || a == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            if sparse {
                for &c in &self.pivot_nz {
                    row[c] -= a * self.pivot_row[c];
                }
            } else {
                for (dst, src) in row.iter_mut().zip(&self.pivot_row) {
                    *dst -= a * src;
                }
            }
        }
        self.binv[r * m..(r + 1) * m].copy_from_slice(&self.pivot_row);
    }

    fn run(&mut self, max_iter: usize) -> Result<LpSolution, LpError> {
        let mut iterations = 0;
        let mut degenerate_run = 0;
        let mut cb = vec![0.0; self.m];
        let status = loop {
            if iterations > 0 && iterations % DRIFT_CHECK_EVERY == 0 {
                self.refine()?;
            }
            let phase_one = self.infeasibility_costs(&mut cb);
            if !phase_one {
                for (i, &j) in self.basis.iter().enumerate() {
                    cb[i] = self.cost[j];
                }
            }
            self.compute_duals(&cb);
            let bland = degenerate_run >= BLAND_AFTER_DEGENERATE;
            let Some((q, dir)) = self.choose_entering(phase_one, bland) else {
                // Confirm on a clean factorization before declaring the outcome.
                let before = self.x.clone();
                self.refine()?;
                if self.x != before {
                    let still_phase_one = self.infeasibility_costs(&mut cb);
                    if still_phase_one != phase_one {
                        continue;
                    }
                }
                break if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };
            if iterations >= max_iter {
                break LpStatus::IterationLimit;
            }
            self.compute_alpha(q);
            let Some(ratio) = self.ratio_test(q, dir, bland) else {
                if phase_one {
                    return Err(LpError::Numerical("phase-1 ray without breakpoint"));
                }
                break LpStatus::Unbounded;
            };
            if ratio.theta <= DEGENERATE_STEP {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(q, dir, &ratio);
            iterations += 1;
        };

        for (i, &j) in self.basis.iter().enumerate() {
            cb[i] = self.cost[j];
        }
        self.compute_duals(&cb);
        let n = self.n_struct;
        let x: Vec<f64> = self.x[..n].to_vec();
        let objective = x.iter().zip(&self.cost[..n]).map(|(a, c)| a * c).sum();
        let reduced_costs = (0..n).map(|j| self.reduced_cost(j, false)).collect();
        Ok(LpSolution {
            status,
            x,
            objective,
            iterations,
            duals_eq: self.y[..self.m_eq].to_vec(),
            duals_ub: self.y[self.m_eq..].to_vec(),
            reduced_costs,
        })
    }
}

/// Gauss-Jordan inversion of the basis matrix with threshold partial
/// pivoting that prefers the natural diagonal. Zero multipliers are skipped,
/// so near-triangular bases invert in roughly O(m²).
fn invert_basis(m: usize, basis: &[usize], cols: &[Vec<(usize, f64)>]) -> Option<Vec<f64>> {
    let mut left = vec![0.0; m * m];
    for (k, &j) in basis.iter().enumerate() {
        for &(r, v) in &cols[j] {
            left[r * m + k] = v;
        }
    }
    let mut right = vec![0.0; m * m];
    for i in 0..m {
        right[i * m + i] = 1.0;
    }
    let mut pivoted = vec![false; m];
    let mut pivot_of_col = vec![0usize; m];
    let mut row_l = vec![0.0; m];
    let mut row_r = vec![0.0; m];
    for k in 0..m {
        let mut best = None;
        let mut best_abs = 0.0;
        for i in 0..m {
            if !pivoted[i] {
                let a = left[i * m + k].abs();
                if a > best_abs {
                    best_abs = a;
                    best = Some(i);
                }
            }
        }
        let mut p = best?;
        if best_abs < 1e-12 {
            return None;
        }
        if !pivoted[k] && left[k * m + k].abs() >= 0.01 * best_abs {
            p = k;
        }
        pivoted[p] = true;
        pivot_of_col[k] = p;
        let piv = left[p * m + k];
        for c in k..m {
            left[p * m + c] /= piv;
        }
        for c in 0..m {
            right[p * m + c] /= piv;
        }
        row_l[k..].copy_from_slice(&left[p * m + k..(p + 1) * m]);
        row_r.copy_from_slice(&right[p * m..(p + 1) * m]);
        for i in 0..m {
            if i == p {
                continue;
            }
            let f = left[i * m + k];
            if f == 0.0 {
                continue;
            }
            for c in k..m {
                left[i * m + c] -= f * row_l[c];
            }
            let dst = &mut right[i * m..(i + 1) * m];
            for (d, s) in dst.iter_mut().zip(&row_r) {
                if *s != 0.0 {
                    *d -= f * s;
                }
            }
        }
    }
    let mut binv = vec![0.0; m * m];
    for k in 0..m {
        let p = pivot_of_col[k];
        binv[k * m..(k + 1) * m].copy_from_slice(&right[p * m..(p + 1) * m]);
    }
    Some(binv)
}

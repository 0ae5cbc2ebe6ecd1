//! The simplex solver against exhaustive vertex enumeration, and duality
//! checks computed outside the solver.

use bmdp_core::lp::{solve_lp, LpInstance, LpSolution, LpStatus, DEFAULT_MAX_ITER, FEASIBILITY_TOL};
use bmdp_core::scenario::ScenarioTemplate;
use bmdp_core::schedule::build_window_lp;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 6;

struct Dense {
    c: Vec<f64>,
    eq: Vec<(Vec<f64>, f64)>,
    ub: Vec<(Vec<f64>, f64)>,
    hi: Vec<f64>,
}

impl Dense {
    fn random(rng: &mut ChaCha8Rng, n_eq: usize, n_ub: usize) -> Self {
        let hi: Vec<f64> = (0..N).map(|_| rng.gen_range(0.5..3.0)).collect();
        let x_feas: Vec<f64> = hi.iter().map(|h| rng.gen_range(0.0..*h)).collect();
        let row = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..N).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let dot = |a: &[f64], x: &[f64]| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
        let eq = (0..n_eq)
            .map(|_| {
                let a = row(rng);
                let b = dot(&a, &x_feas);
                (a, b)
            })
            .collect();
        let ub = (0..n_ub)
            .map(|_| {
                let a = row(rng);
                let b = dot(&a, &x_feas) + rng.gen_range(0.0..0.5);
                (a, b)
            })
            .collect();
        Self {
            c: row(rng),
            eq,
            ub,
            hi,
        }
    }

    fn to_lp(&self) -> LpInstance {
        let mut lp = LpInstance::new(N);
        lp.c = self.c.clone();
        lp.hi = self.hi.clone();
        let sparse = |a: &[f64]| a.iter().enumerate().map(|(j, v)| (j, *v)).collect::<Vec<_>>();
        for (a, b) in &self.eq {
            lp.add_eq(sparse(a), *b);
        }
        for (a, b) in &self.ub {
            lp.add_ub(sparse(a), *b);
        }
        lp
    }

    /// Minimum over all basic feasible points: every choice of `N` active
    /// constraints that includes all equalities.
    fn vertex_optimum(&self) -> Option<f64> {
        // Candidate active rows: equalities, inequalities, x_j = 0, x_j = hi_j.
        let mut rows: Vec<(Vec<f64>, f64)> = self.eq.clone();
        rows.extend(self.ub.iter().cloned());
        for j in 0..N {
            let mut e = vec![0.0; N];
            e[j] = 1.0;
            rows.push((e.clone(), 0.0));
            rows.push((e, self.hi[j]));
        }
        let n_eq = self.eq.len();
        let optional: Vec<usize> = (n_eq..rows.len()).collect();
        let mut best: Option<f64> = None;
        let mut pick = Vec::with_capacity(N);
        combinations(&optional, N - n_eq, 0, &mut pick, &mut |chosen| {
            let active: Vec<usize> = (0..n_eq).chain(chosen.iter().copied()).collect();
            let a = DMatrix::from_fn(N, N, |i, j| rows[active[i]].0[j]);
            let b = DVector::from_fn(N, |i, _| rows[active[i]].1);
            let Some(x) = a.clone().lu().solve(&b) else { return };
            if (&a * &x - &b).amax() > 1e-9 {
                return;
            }
            if !self.feasible(x.as_slice()) {
                return;
            }
            let obj: f64 = self.c.iter().zip(x.iter()).map(|(c, x)| c * x).sum();
            best = Some(best.map_or(obj, |v: f64| v.min(obj)));
        });
        best
    }

    fn feasible(&self, x: &[f64]) -> bool {
        let dot = |a: &[f64]| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
        let tol = 1e-9;
        x.iter().zip(&self.hi).all(|(v, h)| *v >= -tol && *v <= h + tol)
            && self.eq.iter().all(|(a, b)| (dot(a) - b).abs() <= tol)
            && self.ub.iter().all(|(a, b)| dot(a) <= b + tol)
    }
}

fn combinations(items: &[usize], k: usize, start: usize, pick: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..items.len() {
        if items.len() - i < k - pick.len() {
            break;
        }
        pick.push(items[i]);
        combinations(items, k, i + 1, pick, f);
        pick.pop();
    }
}

/// Dual objective from the solver's row duals, with reduced costs and
/// bound terms recomputed here. Also checks dual feasibility.
fn dual_objective(lp: &LpInstance, sol: &LpSolution) -> f64 {
    let n = lp.n_vars();
    let mut d = lp.c.clone();
    for i in 0..lp.a_eq.n_rows() {
        for &(j, a) in lp.a_eq.row(i) {
            d[j] -= a * sol.duals_eq[i];
        }
    }
    for i in 0..lp.a_ub.n_rows() {
        assert!(sol.duals_ub[i] <= 1e-7, "inequality dual {} has the wrong sign", sol.duals_ub[i]);
        for &(j, a) in lp.a_ub.row(i) {
            d[j] -= a * sol.duals_ub[i];
        }
    }
    let mut obj: f64 = lp.b_eq.iter().zip(&sol.duals_eq).map(|(b, y)| b * y).sum::<f64>()
        + lp.b_ub.iter().zip(&sol.duals_ub).map(|(b, y)| b * y).sum::<f64>();
    for j in 0..n {
        if d[j] > 1e-9 {
            assert!(lp.lo[j].is_finite(), "positive reduced cost on a variable without a lower bound");
            obj += d[j] * lp.lo[j];
        } else if d[j] < -1e-9 {
            assert!(lp.hi[j].is_finite(), "negative reduced cost on a variable without an upper bound");
            obj += d[j] * lp.hi[j];
        } else if lp.lo[j].is_finite() {
            obj += d[j] * lp.lo[j];
        }
    }
    obj
}

#[test]
fn random_instances_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..120 {
        let n_eq = k % 3;
        let inst = Dense::random(&mut rng, n_eq, 4 - n_eq.min(2));
        let lp = inst.to_lp();
        let sol = solve_lp(&lp, FEASIBILITY_TOL, DEFAULT_MAX_ITER).unwrap();
        let oracle = inst.vertex_optimum().expect("constructed feasible");
        assert_eq!(sol.status, LpStatus::Optimal, "instance {k}");
        assert!((sol.objective - oracle).abs() < 1e-8, "instance {k}: {} vs {oracle}", sol.objective);
        assert!(inst.feasible(&sol.x), "instance {k}: solver point infeasible");
    }
}

#[test]
fn strong_duality_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..60 {
        let inst = Dense::random(&mut rng, k % 3, 4);
        let lp = inst.to_lp();
        let sol = solve_lp(&lp, FEASIBILITY_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let dual = dual_objective(&lp, &sol);
        assert!((dual - sol.objective).abs() < 1e-6, "instance {k}: dual {dual} primal {}", sol.objective);
    }
}

#[test]
fn strong_duality_on_a_schedule_window() {
    let tpl = ScenarioTemplate::default_scenario().with_horizon(48);
    let profile = bmdp_core::occupancy::OccupancyProfile {
        seed: 0,
        presence: vec![true; 48],
        dt_hours: tpl.dt_hours(),
    };
    let cfg = tpl.for_profile(&profile);
    let lp = build_window_lp(&cfg, 0..48, &cfg.initial_state).unwrap();
    let sol = solve_lp(&lp, FEASIBILITY_TOL, DEFAULT_MAX_ITER).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    let dual = dual_objective(&lp, &sol);
    assert!((dual - sol.objective).abs() < 1e-6 * (1.0 + sol.objective.abs()), "dual {dual} primal {}", sol.objective);
}

#[test]
fn objective_and_row_scaling_leave_the_optimum_in_place() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let inst = Dense::random(&mut rng, 1, 3);
        let base = solve_lp(&inst.to_lp(), FEASIBILITY_TOL, DEFAULT_MAX_ITER).unwrap();
        let k = rng.gen_range(0.1..10.0);
        let mut scaled = inst.to_lp();
        scaled.c.iter_mut().for_each(|c| *c *= k);
        let s = solve_lp(&scaled, FEASIBILITY_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((s.objective - k * base.objective).abs() < 1e-8 * (1.0 + k));
        let mut rows = inst.to_lp();
        let r = rng.gen_range(0.1..10.0);
        let row: Vec<(usize, f64)> = rows.a_ub.row(0).iter().map(|&(j, a)| (j, a * r)).collect();
        let mut rebuilt = LpInstance::new(N);
        rebuilt.c = rows.c.clone();
        rebuilt.hi = rows.hi.clone();
        rebuilt.add_eq(rows.a_eq.row(0).to_vec(), rows.b_eq[0]);
        rebuilt.add_ub(row, rows.b_ub[0] * r);
        for i in 1..rows.a_ub.n_rows() {
            rebuilt.add_ub(rows.a_ub.row(i).to_vec(), rows.b_ub[i]);
        }
        rows = rebuilt;
        let s = solve_lp(&rows, FEASIBILITY_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((s.objective - base.objective).abs() < 1e-8);
    }
}

use std::sync::OnceLock;

use bmdp_core::markov::{
    build_transition_matrix, count_transitions, discretize, BinningSpec, Fallback, PowerVar, StateMode,
};
use bmdp_core::scenario::ScenarioTemplate;
use bmdp_core::schedule::{run_ensemble, SimulationTrace};

/// Four profiles, four days each, on the default building.
fn traces() -> &'static [SimulationTrace] {
    static CELL: OnceLock<Vec<SimulationTrace>> = OnceLock::new();
    CELL.get_or_init(|| {
        let tpl = ScenarioTemplate::default_scenario().with_horizon(4 * 96);
        run_ensemble(&tpl, 4, 2013).unwrap().into_iter().map(|m| m.unwrap().0).collect()
    })
}

/// Histogram of product-state indices by direct arithmetic: auto ranges
/// from pooled min and max, bin = floor of the scaled offset, top edge
/// folded into the last bin.
fn rebin_histogram(traces: &[SimulationTrace], n: usize, m: usize) -> Vec<u64> {
    let temps: Vec<f64> = traces.iter().flat_map(|t| t.steps.iter().map(|s| s.t_sh[0])).collect();
    let powers: Vec<f64> = traces.iter().flat_map(|t| t.steps.iter().map(|s| s.p_hp)).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let ((tlo, thi), (plo, phi)) = (range(&temps), range(&powers));
    let bin = |v: f64, lo: f64, hi: f64, k: usize| (((v - lo) / (hi - lo) * k as f64).floor() as usize).min(k - 1);
    let mut hist = vec![0u64; n * m];
    for (t, p) in temps.iter().zip(&powers) {
        hist[bin(*t, tlo, thi, n) * m + bin(*p, plo, phi, m)] += 1;
    }
    hist
}

#[test]
fn state_histogram_matches_rebinning() {
    let tr = traces();
    let bins = BinningSpec::product(PowerVar::HeatPump, 10, 10).resolve(tr).unwrap();
    let mut hist = vec![0u64; 100];
    for t in tr {
        let seq = discretize(t, &bins).unwrap();
        assert_eq!(seq.clamps.total(), 0);
        for i in seq.indices {
            hist[i] += 1;
        }
    }
    assert_eq!(hist, rebin_histogram(tr, 10, 10));
}

#[test]
fn counts_conserve_transitions() {
    let tr = traces();
    let spec = BinningSpec::product(PowerVar::HeatPump, 10, 10);
    let bins = spec.resolve(tr).unwrap();
    let seqs: Vec<_> = tr.iter().map(|t| discretize(t, &bins).unwrap()).collect();
    let counts = count_transitions(&seqs, 100).unwrap();
    let total: u64 = counts.iter().flatten().sum();
    assert_eq!(total, tr.iter().map(|t| t.len() as u64 - 1).sum::<u64>());
    let tm = build_transition_matrix(tr, &spec, Fallback::SelfLoop).unwrap();
    assert_eq!(tm.counts, counts);
    assert_eq!(tm.n_transitions, total);
}

#[test]
fn one_step_moment_condition() {
    // ĥ: states occupied at steps 0..T−1, ĥ': at steps 1..T, pooled. For
    // the pooled estimate P̄ĥ reproduces ĥ' up to rounding, well inside any
    // sampling bound.
    let tr = traces();
    for spec in [BinningSpec::product(PowerVar::HeatPump, 10, 10), BinningSpec::marginal(PowerVar::HeatPump, 17)] {
        let s = spec.n_states();
        let tm = build_transition_matrix(tr, &spec, Fallback::SelfLoop).unwrap();
        let bins = spec.resolve(tr).unwrap();
        let (mut h, mut h_next) = (vec![0.0; s], vec![0.0; s]);
        for t in tr {
            let idx = discretize(t, &bins).unwrap().indices;
            for w in idx.windows(2) {
                h[w[0]] += 1.0;
                h_next[w[1]] += 1.0;
            }
        }
        let n: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v /= n);
        h_next.iter_mut().for_each(|v| *v /= n);
        let pred = tm.probs.mul_vec(&h);
        let l1: f64 = pred.iter().zip(&h_next).map(|(a, b)| (a - b).abs()).sum();
        let bound = (s as f64 / n).sqrt();
        assert!(l1 < 1e-12 && l1 <= bound, "{l1:e}");
    }
}

#[test]
fn heat_pump_and_auxiliary_matrices_differ() {
    let tr = traces();
    let hp = build_transition_matrix(tr, &BinningSpec::marginal(PowerVar::HeatPump, 10), Fallback::SelfLoop).unwrap();
    let aux = build_transition_matrix(tr, &BinningSpec::marginal(PowerVar::Auxiliary, 10), Fallback::SelfLoop).unwrap();
    assert_ne!(hp.probs, aux.probs);
    assert_eq!(hp.bins.spec.mode, StateMode::Marginal);
}

mod common;

use std::collections::BTreeMap;

use common::{enumerate_chains, injective_durations, OracleTable};
use mtc_raw::chain::{step_process_a, StateLayerA};
use mtc_raw::{run_chains, ModelParams, SlotDurations, TimeDistribution, TxProbTable};

fn exact_params(n: u32) -> ModelParams {
    let mut p = ModelParams::new(n, 4, 4, 2);
    p.prune_floor = 0.0;
    p.epsilon = 1e-15;
    p
}

fn assert_atoms_close(got: &TimeDistribution, want: &BTreeMap<u64, f64>, tol: f64) {
    let keys: Vec<u64> = got.atoms().keys().copied().collect();
    let want_keys: Vec<u64> = want
        .iter()
        .filter(|(_, &p)| p > 0.0)
        .map(|(&d, _)| d)
        .collect();
    assert_eq!(keys, want_keys);
    for (d, p) in want {
        assert!(
            (got.probability(*d) - p).abs() <= tol,
            "atom {d}: {} vs {p}",
            got.probability(*d)
        );
    }
}

#[test]
fn chains_equal_path_enumeration_for_tiny_groups() {
    for n in 1..=3 {
        let params = exact_params(n);
        let durations = injective_durations();
        let out = run_chains(&params, &durations).unwrap();
        let oracle = enumerate_chains(&params, &durations);
        assert_atoms_close(&out.p_a, &oracle.p_a, 1e-9);
        assert_atoms_close(out.p_b.as_ref().unwrap(), &oracle.p_b, 1e-9);
        assert!((out.p_fail_a - oracle.fail_a).abs() <= 1e-9);
        assert!((out.p_fail_b - oracle.stranded_b).abs() <= 1e-9);
        assert!(out.diagnostics.unresolved_a() <= 1e-9);
    }
}

#[test]
fn two_stations_absorption_masses() {
    let params = exact_params(2);
    let out = run_chains(&params, &injective_durations()).unwrap();
    let oracle = enumerate_chains(&params, &injective_durations());
    let oracle_success: f64 = oracle.p_a.values().sum();
    assert!((out.p_a.total_mass() - oracle_success).abs() <= 1e-12);
    assert!((out.p_fail_a - oracle.fail_a).abs() <= 1e-12);
    assert!(out.p_fail_a > 0.0);
}

/// Process A rebuilt on a dense `[c][s][r]` array per step, with its own
/// hazard table.
fn dense_process_a(params: &ModelParams, steps: usize) -> Vec<Vec<Vec<f64>>> {
    let n = params.n_stations as usize;
    let rl = params.retry_limit as usize;
    let oracle = OracleTable::new(params, steps + 2);
    let size = steps + 2;
    let mut cur = vec![vec![vec![0.0; rl]; size]; size];
    cur[0][0][0] = 1.0;
    for t in 0..steps {
        let mut next = vec![vec![vec![0.0; rl]; size]; size];
        for c in 0..size {
            for s in 0..size.min(n) {
                let den: f64 = cur[c][s].iter().sum();
                if den == 0.0 {
                    continue;
                }
                let num: f64 = (0..rl).map(|r| oracle.p_tx(t, r) * cur[c][s][r]).sum();
                let p = num / den;
                let m = (n - s - 1) as i32;
                let e = (1.0 - p).powi(m);
                let one = if m == 0 {
                    0.0
                } else {
                    m as f64 * p * (1.0 - p).powi(m - 1)
                };
                let many = 1.0 - e - one;
                for r in 0..rl {
                    let x = cur[c][s][r];
                    let q = oracle.p_tx(t, r);
                    next[c][s][r] += x * (1.0 - q) * e;
                    if one > 0.0 {
                        next[c][s + 1][r] += x * (1.0 - q) * one;
                    }
                    next[c + 1][s][r] += x * (1.0 - q) * many;
                    if r + 1 < rl {
                        next[c + 1][s][r + 1] += x * q * (1.0 - e);
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

#[test]
fn lemma2_ratio_matches_dense_reference() {
    let mut params = ModelParams::preset(7);
    params.prune_floor = 0.0;
    let table = TxProbTable::build(&params, params.horizon() as usize + 1).unwrap();
    let mut layer = StateLayerA::initial(&params);
    for _ in 0..20 {
        layer = step_process_a(&layer, &table, &params).unwrap();
    }
    let dense = dense_process_a(&params, 20);
    let oracle = OracleTable::new(&params, 22);
    let mut checked = 0;
    for c in 0..=20u64 {
        for s in 0..=(20 - c).min(6) {
            let row = &dense[c as usize][s as usize];
            let den: f64 = row.iter().sum();
            let expected = if den > 0.0 {
                (0..7).map(|r| oracle.p_tx(20, r) * row[r]).sum::<f64>() / den
            } else {
                0.0
            };
            let got = layer.cond_tx_prob(&table, c, s);
            assert!(
                (got - expected).abs() <= 1e-9,
                "(c={c}, s={s}): {got} vs {expected}"
            );
            for r in 0..7 {
                assert!((layer.prob(c, s, r) - row[r as usize]).abs() <= 1e-12);
            }
            if den > 0.0 {
                checked += 1;
            }
        }
    }
    assert!(checked > 20);
}

#[test]
fn single_station_closed_form() {
    let out = run_chains(&ModelParams::preset(1), &SlotDurations::preset()).unwrap();
    for (k, (&d, &p)) in out.p_a.atoms().iter().enumerate() {
        assert_eq!(d, k as u64 * 52 + 2184);
        assert!((p - 1.0 / 16.0).abs() <= 1e-12);
    }
    assert_eq!(out.p_a.quantile(0.5).unwrap(), 7 * 52 + 2184);
    assert_eq!(out.p_a.quantile(1.0 - 1e-6).unwrap(), 15 * 52 + 2184);
}

//! Process A: one tagged station, states `(t, c, s, r)`.

use super::grid::MassGrid;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::sum::CompensatedSum;
use crate::txprob::TxProbTable;

/// Mass that left the chain through the tagged station's success in slot `t`
/// while in aggregate state `(c, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessAbsorption {
    pub t: u64,
    pub c: u64,
    pub s: u64,
    pub probability: f64,
}

/// Process A at a fixed model time. Only the live layer is kept; absorptions
/// are exposed one step at a time through [`StateLayerA::last_absorptions`].
#[derive(Debug, Clone)]
pub struct StateLayerA {
    t: u64,
    pub(crate) grid: MassGrid,
    last_absorptions: Vec<SuccessAbsorption>,
    absorbed_success: CompensatedSum,
    absorbed_failure: CompensatedSum,
    dropped: CompensatedSum,
}

impl StateLayerA {
    /// All mass in `(0, 0, 0, 0)`.
    pub fn initial(params: &ModelParams) -> Self {
        Self {
            t: 0,
            grid: MassGrid::origin(params.retry_limit as usize),
            last_absorptions: Vec::new(),
            absorbed_success: CompensatedSum::default(),
            absorbed_failure: CompensatedSum::default(),
            dropped: CompensatedSum::default(),
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// `Pr(t, c, s, r)`.
    pub fn prob(&self, c: u64, s: u64, r: u64) -> f64 {
        self.grid.get(c as usize, s as usize, r as usize)
    }

    /// Live states as `(c, s, r, probability)` with non-zero mass.
    pub fn states(&self) -> Vec<(u64, u64, u64, f64)> {
        let mut out = Vec::new();
        self.grid.for_each_cell(|c, s, row| {
            for (r, &p) in row.iter().enumerate() {
                if p != 0.0 {
                    out.push((c as u64, s as u64, r as u64, p));
                }
            }
        });
        out
    }

    pub fn carried_mass(&self) -> f64 {
        self.grid.total()
    }

    pub fn absorbed_success(&self) -> f64 {
        self.absorbed_success.value()
    }

    /// Probability that the tagged station exhausted its retry limit.
    pub fn absorbed_failure(&self) -> f64 {
        self.absorbed_failure.value()
    }

    pub fn dropped_mass(&self) -> f64 {
        self.dropped.value()
    }

    /// Absorbed plus dropped mass.
    pub fn resolved_mass(&self) -> f64 {
        self.absorbed_success() + self.absorbed_failure() + self.dropped_mass()
    }

    /// No live state remains.
    pub fn is_exhausted(&self) -> bool {
        self.grid.is_empty()
    }

    /// Success absorptions produced by the step that created this layer.
    pub fn last_absorptions(&self) -> &[SuccessAbsorption] {
        &self.last_absorptions
    }

    /// `Pr(TX | t, c, s)`: the tagged station's transmission probability
    /// averaged over its retry count in aggregate state `(c, s)`; zero when
    /// `(t, c, s)` carries no mass.
    pub fn cond_tx_prob(&self, table: &TxProbTable, c: u64, s: u64) -> f64 {
        let hazards = table.p_tx_row(self.t as usize);
        let (mut num, mut den) = (0.0, 0.0);
        for r in 0..self.grid.depth() {
            let m = self.grid.get(c as usize, s as usize, r);
            num += hazards.get(r).copied().unwrap_or(0.0) * m;
            den += m;
        }
        if den > 0.0 {
            (num / den).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// [`StateLayerA::cond_tx_prob`] evaluated once for every live `(c, s)`.
#[derive(Debug, Clone)]
pub(crate) struct PeerTxProbs {
    t: u64,
    grid: MassGrid,
}

impl PeerTxProbs {
    pub(crate) fn from_layer(layer: &StateLayerA, table: &TxProbTable) -> Self {
        let (c_lo, nc) = layer.grid.c_bounds();
        let (s_lo, ns) = layer.grid.s_bounds();
        let mut grid = MassGrid::zeros(c_lo, nc, s_lo, ns, 1);
        let hazards = table.p_tx_row(layer.t as usize);
        layer.grid.for_each_cell(|c, s, row| {
            let (mut num, mut den) = (0.0, 0.0);
            for (r, &m) in row.iter().enumerate() {
                num += hazards.get(r).copied().unwrap_or(0.0) * m;
                den += m;
            }
            if den > 0.0 {
                grid.add(c, s, 0, (num / den).clamp(0.0, 1.0));
            }
        });
        Self { t: layer.t, grid }
    }

    pub(crate) fn t(&self) -> u64 {
        self.t
    }

    #[inline]
    pub(crate) fn get(&self, c: usize, s: usize) -> f64 {
        self.grid.get(c, s, 0)
    }
}

/// Slot-type probabilities seen by a station when `peers` other stations
/// each transmit independently with probability `p`: (empty, one
/// transmitter, two or more).
#[inline]
pub(crate) fn slot_outcomes(p: f64, peers: u64) -> (f64, f64, f64) {
    if peers == 0 {
        return (1.0, 0.0, 0.0);
    }
    let n = peers as i32;
    let idle = 1.0 - p;
    let empty = idle.powi(n);
    let single = peers as f64 * p * idle.powi(n - 1);
    let multi = (1.0 - empty - single).max(0.0);
    (empty, single, multi)
}

/// Advances process A from `t` to `t + 1`.
pub fn step_process_a(
    layer: &StateLayerA,
    table: &TxProbTable,
    params: &ModelParams,
) -> Result<StateLayerA> {
    if layer.t >= params.t_max_cap {
        return Err(Error::Truncated {
            cap: params.t_max_cap,
            deficit: layer.carried_mass() + layer.dropped_mass(),
        });
    }
    let peers = PeerTxProbs::from_layer(layer, table);
    Ok(step_with_peers(layer, table, &peers, params))
}

pub(crate) fn step_with_peers(
    layer: &StateLayerA,
    table: &TxProbTable,
    peers: &PeerTxProbs,
    params: &ModelParams,
) -> StateLayerA {
    debug_assert_eq!(peers.t(), layer.t);
    let n = u64::from(params.n_stations);
    let rl = params.retry_limit as usize;
    let hazards = table.p_tx_row(layer.t as usize);
    let (c_lo, nc) = layer.grid.c_bounds();
    let (s_lo, ns) = layer.grid.s_bounds();
    // s never exceeds N - 1 while the tagged station is still contending
    let ns_next = (ns + 1).min((n as usize).saturating_sub(s_lo)).max(ns);
    let mut next = MassGrid::zeros(c_lo, nc + 1, s_lo, ns_next, rl);

    let mut absorptions = Vec::new();
    let mut failed = CompensatedSum::default();

    layer.grid.for_each_cell(|c, s, row| {
        if row.iter().all(|&x| x == 0.0) {
            return;
        }
        let p = peers.get(c, s);
        let (empty, single, multi) = slot_outcomes(p, n - s as u64 - 1);
        let mut won = 0.0;
        for (r, &x) in row.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let q = hazards.get(r).copied().unwrap_or(0.0);
            let silent = x * (1.0 - q);
            let sent = x * q;
            next.add(c, s, r, silent * empty);
            won += sent * empty;
            if single > 0.0 {
                next.add(c, s + 1, r, silent * single);
            }
            let collided = sent * (1.0 - empty);
            if r + 1 == rl {
                failed.add(collided);
            } else if collided != 0.0 {
                next.add(c + 1, s, r + 1, collided);
            }
            if multi > 0.0 {
                next.add(c + 1, s, r, silent * multi);
            }
        }
        if won > 0.0 {
            absorptions.push(SuccessAbsorption {
                t: layer.t,
                c: c as u64,
                s: s as u64,
                probability: won,
            });
        }
    });

    let pruned = next.prune(params.prune_floor);
    next.trim();

    let mut absorbed_success = layer.absorbed_success;
    for a in &absorptions {
        absorbed_success.add(a.probability);
    }
    let mut absorbed_failure = layer.absorbed_failure;
    absorbed_failure.add(failed.value());
    let mut dropped = layer.dropped;
    dropped.add(pruned);

    StateLayerA {
        t: layer.t + 1,
        grid: next,
        last_absorptions: absorptions,
        absorbed_success,
        absorbed_failure,
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: u32) -> (ModelParams, TxProbTable) {
        let p = ModelParams::preset(n);
        let table = TxProbTable::build(&p, p.horizon() as usize + 1).unwrap();
        (p, table)
    }

    #[test]
    fn initial_state_uses_first_window_hazard() {
        let (p, table) = setup(7);
        let layer = StateLayerA::initial(&p);
        assert_eq!(layer.cond_tx_prob(&table, 0, 0), 1.0 / 16.0);
        assert_eq!(layer.cond_tx_prob(&table, 3, 0), 0.0);
    }

    #[test]
    fn single_station_succeeds_uniformly_over_first_window() {
        let (p, table) = setup(1);
        let mut layer = StateLayerA::initial(&p);
        for t in 0..16u64 {
            layer = step_process_a(&layer, &table, &p).unwrap();
            let abs = layer.last_absorptions();
            assert_eq!(abs.len(), 1);
            assert_eq!((abs[0].t, abs[0].c, abs[0].s), (t, 0, 0));
            assert!((abs[0].probability - 1.0 / 16.0).abs() < 1e-15);
        }
        assert!(layer.is_exhausted());
        assert_eq!(layer.absorbed_failure(), 0.0);
        assert!((layer.absorbed_success() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lone_remaining_station_sees_idle_peers() {
        assert_eq!(slot_outcomes(0.3, 0), (1.0, 0.0, 0.0));
        assert_eq!(slot_outcomes(1.0, 1), (0.0, 1.0, 0.0));
        let (e, s, c) = slot_outcomes(0.2, 5);
        assert!((e + s + c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn each_step_conserves_mass() {
        let (mut p, table) = setup(7);
        p.prune_floor = 0.0;
        let mut layer = StateLayerA::initial(&p);
        for _ in 0..200 {
            let before = layer.carried_mass();
            let next = step_process_a(&layer, &table, &p).unwrap();
            let newly = (next.absorbed_success() - layer.absorbed_success())
                + (next.absorbed_failure() - layer.absorbed_failure());
            assert!((next.carried_mass() + newly - before).abs() < 1e-12);
            layer = next;
        }
    }

    #[test]
    fn states_respect_structural_bounds() {
        let (p, table) = setup(4);
        let mut layer = StateLayerA::initial(&p);
        for _ in 0..120 {
            layer = step_process_a(&layer, &table, &p).unwrap();
            let t = layer.t();
            for (c, s, r, _) in layer.states() {
                assert!(c + s <= t);
                assert!(s <= 3);
                assert!(r <= c.min(6));
            }
        }
    }

    #[test]
    fn cap_yields_truncation() {
        let (mut p, table) = setup(7);
        p.t_max_cap = 3;
        let mut layer = StateLayerA::initial(&p);
        for _ in 0..3 {
            layer = step_process_a(&layer, &table, &p).unwrap();
        }
        match step_process_a(&layer, &table, &p) {
            Err(Error::Truncated { cap, deficit }) => {
                assert_eq!(cap, 3);
                assert!(deficit > 0.0);
            }
            other => panic!("expected truncation, got {other:?}"),
        }
    }
}

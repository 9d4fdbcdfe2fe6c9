//! Process B: the whole group, states `(t, c, s)` absorbing at `s = N`.

use super::grid::MassGrid;
use super::process_a::{slot_outcomes, PeerTxProbs, StateLayerA};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::sum::CompensatedSum;
use crate::txprob::TxProbTable;

/// Mass absorbed when the last station delivered in slot `t` after `c`
/// collision slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionAbsorption {
    pub t: u64,
    pub c: u64,
    pub probability: f64,
}

#[derive(Debug, Clone)]
pub struct StateLayerB {
    t: u64,
    grid: MassGrid,
    last_absorptions: Vec<CompletionAbsorption>,
    absorbed: CompensatedSum,
    dropped: CompensatedSum,
}

impl StateLayerB {
    pub fn initial(_params: &ModelParams) -> Self {
        Self {
            t: 0,
            grid: MassGrid::origin(1),
            last_absorptions: Vec::new(),
            absorbed: CompensatedSum::default(),
            dropped: CompensatedSum::default(),
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn prob(&self, c: u64, s: u64) -> f64 {
        self.grid.get(c as usize, s as usize, 0)
    }

    /// Live states as `(c, s, probability)`.
    pub fn states(&self) -> Vec<(u64, u64, f64)> {
        let mut out = Vec::new();
        self.grid.for_each_cell(|c, s, row| {
            if row[0] != 0.0 {
                out.push((c as u64, s as u64, row[0]));
            }
        });
        out
    }

    pub fn carried_mass(&self) -> f64 {
        self.grid.total()
    }

    pub fn absorbed_mass(&self) -> f64 {
        self.absorbed.value()
    }

    pub fn dropped_mass(&self) -> f64 {
        self.dropped.value()
    }

    pub fn resolved_mass(&self) -> f64 {
        self.absorbed_mass() + self.dropped_mass()
    }

    pub fn is_exhausted(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn last_absorptions(&self) -> &[CompletionAbsorption] {
        &self.last_absorptions
    }
}

/// Advances process B from `t` to `t + 1` using process A's layer at the same
/// `t` for the per-station transmission probability.
pub fn step_process_b(
    layer: &StateLayerB,
    table: &TxProbTable,
    process_a: &StateLayerA,
    params: &ModelParams,
) -> Result<StateLayerB> {
    if process_a.t() != layer.t {
        return Err(Error::Config(format!(
            "process A is at t={} but process B is at t={}",
            process_a.t(),
            layer.t
        )));
    }
    if layer.t >= params.t_max_cap {
        return Err(Error::Truncated {
            cap: params.t_max_cap,
            deficit: layer.carried_mass() + layer.dropped_mass(),
        });
    }
    let peers = PeerTxProbs::from_layer(process_a, table);
    Ok(step_with_peers(layer, &peers, params))
}

pub(crate) fn step_with_peers(
    layer: &StateLayerB,
    peers: &PeerTxProbs,
    params: &ModelParams,
) -> StateLayerB {
    debug_assert_eq!(peers.t(), layer.t);
    let n = params.n_stations as usize;
    let (c_lo, nc) = layer.grid.c_bounds();
    let (s_lo, ns) = layer.grid.s_bounds();
    let ns_next = (ns + 1).min(n.saturating_sub(s_lo));
    let mut next = MassGrid::zeros(c_lo, nc + 1, s_lo, ns_next, 1);
    let mut absorptions = Vec::new();

    layer.grid.for_each_cell(|c, s, row| {
        let x = row[0];
        if x == 0.0 {
            return;
        }
        let p = peers.get(c, s);
        let (empty, single, multi) = slot_outcomes(p, (n - s) as u64);
        next.add(c, s, 0, x * empty);
        if single > 0.0 {
            if s + 1 == n {
                absorptions.push(CompletionAbsorption {
                    t: layer.t,
                    c: c as u64,
                    probability: x * single,
                });
            } else {
                next.add(c, s + 1, 0, x * single);
            }
        }
        if multi > 0.0 {
            next.add(c + 1, s, 0, x * multi);
        }
    });

    let pruned = next.prune(params.prune_floor);
    next.trim();

    let mut absorbed = layer.absorbed;
    for a in &absorptions {
        absorbed.add(a.probability);
    }
    let mut dropped = layer.dropped;
    dropped.add(pruned);

    StateLayerB {
        t: layer.t + 1,
        grid: next,
        last_absorptions: absorptions,
        absorbed,
        dropped,
    }
}

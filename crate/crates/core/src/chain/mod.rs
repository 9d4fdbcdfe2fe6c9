//! Layered absorbing Markov chains for the RAW-slot access process.
//!
//! Both chains advance one virtual slot at a time. Process A supplies the
//! per-station transmission probability for a given aggregate state `(c, s)`
//! to both itself and process B, so they are stepped in lockstep.

mod grid;
mod process_a;
mod process_b;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use process_a::{step_process_a, StateLayerA, SuccessAbsorption};
pub use process_b::{step_process_b, CompletionAbsorption, StateLayerB};

use crate::distribution::TimeDistribution;
use crate::error::Result;
use crate::params::{state_time, ModelParams, SlotDurations};
use crate::txprob::TxProbTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainSelection {
    /// Only the tagged-station chain; `p_b` is not produced.
    ProcessA,
    Both,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Virtual slots advanced.
    pub steps: u64,
    /// The time cap was hit before the absorption threshold.
    pub truncated: bool,
    /// Process A mass neither absorbed nor dropped when the run stopped.
    pub carried_a: f64,
    pub dropped_a: f64,
    pub carried_b: f64,
    pub dropped_b: f64,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    /// Mass of P_A lost to truncation or pruning (excludes retry failures).
    pub fn unresolved_a(&self) -> f64 {
        self.carried_a + self.dropped_a
    }

    pub fn unresolved_b(&self) -> f64 {
        self.carried_b + self.dropped_b
    }
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// Time for the tagged station to deliver its frame.
    pub p_a: TimeDistribution,
    /// Time for all stations to deliver; `None` under [`ChainSelection::ProcessA`].
    pub p_b: Option<TimeDistribution>,
    /// Probability that the tagged station exhausts its retry limit.
    pub p_fail_a: f64,
    /// Process B mass still short of `s = N` once process A has no live
    /// state left, i.e. once no station can still be contending.
    pub p_fail_b: f64,
    pub diagnostics: Diagnostics,
}

impl ChainOutput {
    /// Truncated with more than `epsilon` of either chain unresolved.
    pub fn deficit_exceeds(&self, epsilon: f64) -> bool {
        self.diagnostics.truncated
            && (self.diagnostics.unresolved_a() > epsilon
                || (self.p_b.is_some() && self.diagnostics.unresolved_b() > epsilon))
    }
}

/// Runs both chains to the absorption threshold.
pub fn run_chains(params: &ModelParams, durations: &SlotDurations) -> Result<ChainOutput> {
    run_chains_with(params, durations, ChainSelection::Both)
}

pub fn run_chains_with(
    params: &ModelParams,
    durations: &SlotDurations,
    selection: ChainSelection,
) -> Result<ChainOutput> {
    params.validate()?;
    durations.validate()?;
    let track_b = selection == ChainSelection::Both;
    let n = u64::from(params.n_stations);
    let threshold = 1.0 - params.epsilon;
    let table = TxProbTable::build(params, params.horizon() as usize + 1)?;

    let mut a = StateLayerA::initial(params);
    let mut b = StateLayerB::initial(params);
    let mut atoms_a: HashMap<u64, f64> = HashMap::new();
    let mut atoms_b: HashMap<u64, f64> = HashMap::new();
    let mut diagnostics = Diagnostics::default();
    let mut b_stalled = false;

    loop {
        let a_done = a.is_exhausted() || a.resolved_mass() >= threshold;
        let b_done = !track_b || b.is_exhausted() || b.resolved_mass() >= threshold;
        if a_done && b_done {
            break;
        }
        if a.is_exhausted() {
            // Nothing left to drive B: every station has delivered or failed.
            b_stalled = true;
            break;
        }
        if a.t() >= params.t_max_cap {
            diagnostics.truncated = true;
            break;
        }

        let t = a.t();
        let peers = process_a::PeerTxProbs::from_layer(&a, &table);
        if track_b && !b_done {
            b = process_b::step_with_peers(&b, &peers, params);
            for abs in b.last_absorptions() {
                let tau = state_time(abs.c, n, t + 1, durations)?;
                *atoms_b.entry(tau).or_default() += abs.probability;
            }
        }
        a = process_a::step_with_peers(&a, &table, &peers, params);
        for abs in a.last_absorptions() {
            let tau = state_time(abs.c, abs.s + 1, t + 1, durations)?;
            *atoms_a.entry(tau).or_default() += abs.probability;
        }
        diagnostics.steps += 1;
    }

    diagnostics.carried_a = a.carried_mass();
    diagnostics.dropped_a = a.dropped_mass();
    let p_fail_b = if track_b && b_stalled {
        b.carried_mass()
    } else {
        0.0
    };
    if track_b {
        diagnostics.carried_b = if b_stalled { 0.0 } else { b.carried_mass() };
        diagnostics.dropped_b = b.dropped_mass();
    }
    if diagnostics.truncated {
        diagnostics.warnings.push(format!(
            "model time cap {} reached: {:e} of P_A and {:e} of P_B unresolved",
            params.t_max_cap,
            diagnostics.unresolved_a(),
            diagnostics.unresolved_b()
        ));
    }

    Ok(ChainOutput {
        p_a: TimeDistribution::from_atoms(atoms_a),
        p_b: track_b.then(|| TimeDistribution::from_atoms(atoms_b)),
        p_fail_a: a.absorbed_failure(),
        p_fail_b,
        diagnostics,
    })
}

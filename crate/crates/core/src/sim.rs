//! Seeded slot-level Monte-Carlo simulation of truncated binary exponential
//! backoff, used as an independent check on the chains.
//!
//! Every run starts all stations at the beginning of the RAW slot with a
//! fresh counter on `[0, CW_0 - 1]`. In each virtual slot the stations whose
//! counter is zero transmit: a lone transmitter succeeds and leaves, two or
//! more collide, bump their retry count and either give up at the retry limit
//! or redraw on `[0, CW_r - 1]`. Every other station decrements once per
//! virtual slot, which is how backoff freezing looks on this time scale.
//!
//! Randomness: run `i` draws from ChaCha8 keyed by `seed_from_u64(seed)` on
//! stream `i`, so results do not depend on how runs are scheduled.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::TimeDistribution;
use crate::error::{Error, Result};
use crate::params::{ModelParams, SlotDurations};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub durations: SlotDurations,
    pub runs: u64,
    pub seed: u64,
    pub tagged_station: u32,
}

impl SimConfig {
    pub fn new(params: ModelParams, durations: SlotDurations, runs: u64, seed: u64) -> Self {
        Self {
            params,
            durations,
            runs,
            seed,
            tagged_station: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.durations.validate()?;
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.tagged_station >= self.params.n_stations {
            return Err(Error::Config(format!(
                "tagged station {} out of range for {} stations",
                self.tagged_station, self.params.n_stations
            )));
        }
        Ok(())
    }
}

/// Outcome counts over all runs. Runs that end in failure are not atoms;
/// they are tallied in `failure_count` and their end times kept separately.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub atoms: BTreeMap<u64, u64>,
    pub runs: u64,
    pub failure_count: u64,
    /// For the tagged station: when it gave up. For the whole group: when
    /// the last successful station finished.
    pub failure_times: BTreeMap<u64, u64>,
}

impl EmpiricalDistribution {
    pub fn success_count(&self) -> u64 {
        self.atoms.values().sum()
    }

    /// Relative frequencies; the failure share becomes the deficit.
    pub fn to_time_distribution(&self) -> TimeDistribution {
        let runs = self.runs.max(1) as f64;
        TimeDistribution::from_atoms(self.atoms.iter().map(|(&d, &n)| (d, n as f64 / runs)))
    }

    fn merge(mut self, other: Self) -> Self {
        for (d, n) in other.atoms {
            *self.atoms.entry(d).or_default() += n;
        }
        for (d, n) in other.failure_times {
            *self.failure_times.entry(d).or_default() += n;
        }
        self.runs += other.runs;
        self.failure_count += other.failure_count;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOutput {
    /// Delivery time of the tagged station.
    pub tagged: EmpiricalDistribution,
    /// Time until every station has delivered.
    pub all: EmpiricalDistribution,
    /// Most transmission attempts the tagged station made in any run.
    pub max_tagged_attempts: u32,
}

impl SimOutput {
    fn merge(self, other: Self) -> Self {
        Self {
            tagged: self.tagged.merge(other.tagged),
            all: self.all.merge(other.all),
            max_tagged_attempts: self.max_tagged_attempts.max(other.max_tagged_attempts),
        }
    }
}

/// Result of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    /// `Ok(t)` if the tagged station delivered at `t`, `Err(t)` if it gave up at `t`.
    pub tagged: std::result::Result<u64, u64>,
    pub tagged_attempts: u32,
    /// Number of stations that delivered.
    pub delivered: u32,
    /// End of the last successful slot (0 if none).
    pub last_success: u64,
}

const BLOCK: u64 = 2048;

pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let blocks = config.runs.div_ceil(BLOCK);
    let out = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut acc = SimOutput::default();
            let mut scratch = Vec::new();
            for run in blk * BLOCK..((blk + 1) * BLOCK).min(config.runs) {
                let mut rng = base.clone();
                rng.set_stream(run);
                rng.set_word_pos(0);
                let o = simulate_run(config, &mut rng, &mut scratch);
                record(&mut acc, &o, config.params.n_stations);
            }
            acc
        })
        .reduce(SimOutput::default, SimOutput::merge);
    Ok(out)
}

fn record(acc: &mut SimOutput, o: &RunOutcome, n: u32) {
    acc.tagged.runs += 1;
    match o.tagged {
        Ok(t) => *acc.tagged.atoms.entry(t).or_default() += 1,
        Err(t) => {
            acc.tagged.failure_count += 1;
            *acc.tagged.failure_times.entry(t).or_default() += 1;
        }
    }
    acc.all.runs += 1;
    if o.delivered == n {
        *acc.all.atoms.entry(o.last_success).or_default() += 1;
    } else {
        acc.all.failure_count += 1;
        *acc.all.failure_times.entry(o.last_success).or_default() += 1;
    }
    acc.max_tagged_attempts = acc.max_tagged_attempts.max(o.tagged_attempts);
}

#[derive(Debug, Clone, Copy)]
struct Station {
    counter: u32,
    retries: u32,
}

/// Plays one run to completion. `scratch` is reused across runs.
pub fn simulate_run<R: Rng>(
    config: &SimConfig,
    rng: &mut R,
    scratch: &mut Vec<usize>,
) -> RunOutcome {
    let p = &config.params;
    let d = &config.durations;
    let tagged_id = config.tagged_station as usize;
    let cw0 = p.contention_window(0);
    // (id, station) for stations still contending
    let mut active: Vec<(usize, Station)> = (0..p.n_stations as usize)
        .map(|id| {
            (
                id,
                Station {
                    counter: rng.gen_range(0..cw0),
                    retries: 0,
                },
            )
        })
        .collect();

    let mut now = 0u64;
    let mut tagged = None;
    let mut tagged_attempts = 0u32;
    let mut delivered = 0u32;
    let mut last_success = 0u64;

    while !active.is_empty() {
        scratch.clear();
        scratch.extend(
            active
                .iter()
                .enumerate()
                .filter(|(_, (_, st))| st.counter == 0)
                .map(|(i, _)| i),
        );
        for (_, st) in active.iter_mut() {
            st.counter = st.counter.saturating_sub(1);
        }
        if scratch.iter().any(|&i| active[i].0 == tagged_id) {
            tagged_attempts += 1;
        }
        match scratch.len() {
            0 => now += d.t_empty,
            1 => {
                now += d.t_success;
                let (id, _) = active.swap_remove(scratch[0]);
                delivered += 1;
                last_success = now;
                if id == tagged_id {
                    tagged = Some(Ok(now));
                }
            }
            _ => {
                now += d.t_collision;
                // remove from the back so earlier indices stay valid
                for &i in scratch.iter().rev() {
                    let st = &mut active[i].1;
                    st.retries += 1;
                    if st.retries >= p.retry_limit {
                        let (id, _) = active.swap_remove(i);
                        if id == tagged_id {
                            tagged = Some(Err(now));
                        }
                    } else {
                        st.counter = rng.gen_range(0..p.contention_window(st.retries));
                    }
                }
            }
        }
    }

    RunOutcome {
        tagged: tagged.expect("tagged station always resolves"),
        tagged_attempts,
        delivered,
        last_success,
    }
}

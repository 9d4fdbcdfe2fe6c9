//! RAW slot sizing and station grouping.
//!
//! The number of stations that actually hold a frame when the slot opens is
//! random, so slot durations are read off binomial mixtures of the per-`k`
//! chain outputs. Per-`k` distributions are computed once and shared across
//! every mixture and group count that needs them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::RangeInclusive;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use crate::chain::{run_chains_with, ChainSelection};
use crate::distribution::TimeDistribution;
use crate::error::{Error, Result};
use crate::params::{ModelParams, SlotDurations, MAX_RAW_SLOT_US};
use crate::sum::CompensatedSum;

/// How the number of active stations is weighted in a problem-A mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conditioning {
    /// The tagged station holds a frame; each of the other `N - 1` does with
    /// probability `p`, so `k - 1 ~ Binomial(N - 1, p)`.
    #[default]
    TaggedHasPacket,
    /// `k ~ Binomial(N, p)` restricted to `k >= 1` and renormalized.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    /// One tagged station delivers.
    A,
    /// Every active station delivers.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n_total: u32,
    pub p_active: f64,
    pub conditioning: Conditioning,
}

impl MixtureSpec {
    pub fn new(n_total: u32, p_active: f64) -> Self {
        Self {
            n_total,
            p_active,
            conditioning: Conditioning::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_total == 0 {
            return Err(Error::Config("mixture needs at least one station".into()));
        }
        if !(0.0..=1.0).contains(&self.p_active) {
            return Err(Error::Probability {
                what: "p_active",
                value: self.p_active,
                range: "[0, 1]",
            });
        }
        Ok(())
    }

    /// `(k, weight)` for every active-station count `k >= 1` with non-zero
    /// weight, before any subsampling.
    pub fn weights(&self) -> Result<Vec<(u32, f64)>> {
        self.validate()?;
        let n = self.n_total;
        let p = self.p_active;
        match self.conditioning {
            Conditioning::TaggedHasPacket => Ok(binomial_pmf(n - 1, p)
                .into_iter()
                .map(|(j, w)| (j + 1, w))
                .collect()),
            Conditioning::PaperLiteral => {
                let norm = 1.0 - (1.0 - p).powi(n as i32);
                if norm <= 0.0 {
                    return Err(Error::EmptyMixture(
                        "p_active = 0 leaves no station with a frame".into(),
                    ));
                }
                Ok(binomial_pmf(n, p)
                    .into_iter()
                    .filter(|&(k, _)| k >= 1)
                    .map(|(k, w)| (k, w / norm))
                    .collect())
            }
        }
    }
}

/// Non-zero terms of the Binomial(n, p) pmf.
pub fn binomial_pmf(n: u32, p: f64) -> Vec<(u32, f64)> {
    let dist = Binomial::new(p, u64::from(n)).expect("p validated to lie in [0, 1]");
    (0..=n)
        .map(|k| (k, dist.pmf(u64::from(k))))
        .filter(|&(_, w)| w > 0.0)
        .collect()
}

/// Numeric shortcuts for large mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureOptions {
    /// Components lighter than this are skipped; their weight becomes deficit.
    pub weight_floor: f64,
    /// Evaluate only every `k_stride`-th active count, splitting each skipped
    /// count's weight linearly between its two neighbouring grid points.
    /// `1` evaluates every count.
    pub k_stride: u32,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        Self {
            weight_floor: 1e-12,
            k_stride: 1,
        }
    }
}

impl MixtureOptions {
    /// Applies the stride and the weight floor. Returns the retained
    /// components and the total weight skipped.
    pub fn reduce(&self, weights: &[(u32, f64)]) -> (Vec<(u32, f64)>, f64) {
        let gridded = if self.k_stride > 1 && weights.len() > 2 {
            onto_grid(weights, self.k_stride)
        } else {
            weights.to_vec()
        };
        let mut skipped = CompensatedSum::default();
        let kept = gridded
            .into_iter()
            .filter(|&(_, w)| {
                let keep = w >= self.weight_floor && w > 0.0;
                if !keep {
                    skipped.add(w);
                }
                keep
            })
            .collect();
        (kept, skipped.value())
    }
}

fn onto_grid(weights: &[(u32, f64)], stride: u32) -> Vec<(u32, f64)> {
    let k_lo = weights[0].0;
    let k_hi = weights[weights.len() - 1].0;
    let mut grid: BTreeMap<u32, f64> = BTreeMap::new();
    for &(k, w) in weights {
        let left = k_lo + (k - k_lo) / stride * stride;
        let right = (left + stride).min(k_hi);
        if k == left || right == left {
            *grid.entry(left).or_default() += w;
        } else {
            let lambda = f64::from(k - left) / f64::from(right - left);
            *grid.entry(left).or_default() += (1.0 - lambda) * w;
            *grid.entry(right).or_default() += lambda * w;
        }
    }
    grid.into_iter().collect()
}

/// Per-`k` chain outputs for one parameter set (`n_stations` is ignored).
#[derive(Debug)]
pub struct ChainCache {
    params: ModelParams,
    durations: SlotDurations,
    p_a: Mutex<HashMap<u32, Arc<TimeDistribution>>>,
    p_b: Mutex<HashMap<u32, Arc<TimeDistribution>>>,
}

impl ChainCache {
    pub fn new(params: &ModelParams, durations: &SlotDurations) -> Result<Self> {
        params.validate()?;
        durations.validate()?;
        Ok(Self {
            params: params.clone(),
            durations: *durations,
            p_a: Mutex::new(HashMap::new()),
            p_b: Mutex::new(HashMap::new()),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn durations(&self) -> &SlotDurations {
        &self.durations
    }

    pub fn p_a(&self, k: u32) -> Result<Arc<TimeDistribution>> {
        if let Some(d) = self.p_a.lock().expect("cache lock").get(&k) {
            return Ok(Arc::clone(d));
        }
        self.compute(k, Problem::A)?;
        Ok(Arc::clone(&self.p_a.lock().expect("cache lock")[&k]))
    }

    /// `k = 0` is immediate completion.
    pub fn p_b(&self, k: u32) -> Result<Arc<TimeDistribution>> {
        if k == 0 {
            return Ok(Arc::new(TimeDistribution::point_mass(0)));
        }
        if let Some(d) = self.p_b.lock().expect("cache lock").get(&k) {
            return Ok(Arc::clone(d));
        }
        self.compute(k, Problem::B)?;
        Ok(Arc::clone(&self.p_b.lock().expect("cache lock")[&k]))
    }

    /// Computes every missing `k` in parallel.
    pub fn warm(&self, ks: &BTreeSet<u32>, problem: Problem) -> Result<()> {
        let missing: Vec<u32> = {
            let map = match problem {
                Problem::A => self.p_a.lock(),
                Problem::B => self.p_b.lock(),
            }
            .expect("cache lock");
            ks.iter()
                .copied()
                .filter(|k| *k > 0 && !map.contains_key(k))
                .collect()
        };
        // Largest first so the long runs start early.
        missing
            .into_par_iter()
            .rev()
            .try_for_each(|k| self.compute(k, problem))
    }

    fn compute(&self, k: u32, problem: Problem) -> Result<()> {
        let selection = match problem {
            Problem::A => ChainSelection::ProcessA,
            Problem::B => ChainSelection::Both,
        };
        let out = run_chains_with(&self.params.with_n(k), &self.durations, selection)?;
        self.p_a
            .lock()
            .expect("cache lock")
            .entry(k)
            .or_insert_with(|| Arc::new(out.p_a));
        if let Some(pb) = out.p_b {
            self.p_b
                .lock()
                .expect("cache lock")
                .entry(k)
                .or_insert_with(|| Arc::new(pb));
        }
        Ok(())
    }
}

/// `sum_k weight_k * component_k`.
pub fn mix(components: &[(f64, &TimeDistribution)]) -> TimeDistribution {
    let mut acc: HashMap<u64, CompensatedSum> = HashMap::new();
    for &(w, dist) in components {
        for (&d, &p) in dist.atoms() {
            acc.entry(d).or_default().add(w * p);
        }
    }
    TimeDistribution::from_atoms(acc.into_iter().map(|(d, s)| (d, s.value())))
}

/// Minimal slot duration delivering with probability at least `q`.
pub fn plan_slot_duration(dist: &TimeDistribution, q: f64) -> Result<u64> {
    dist.quantile(q)
}

/// Mixture of problem-A delivery times over the random number of active
/// stations, computing each component from scratch.
pub fn mixture_pa(
    spec: &MixtureSpec,
    params: &ModelParams,
    durations: &SlotDurations,
) -> Result<TimeDistribution> {
    Planner::new(params, durations)?.mixture_pa(spec)
}

/// Even split of `n` stations into `g` groups, larger groups first.
pub fn split_evenly(n: u32, g: u32) -> Vec<u32> {
    let (base, rem) = (n / g, n % g);
    (0..g).map(|i| base + u32::from(i < rem)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPlan {
    pub group_count: u32,
    pub group_sizes: Vec<u32>,
    pub quantile_target: f64,
    /// Slot for each group; empty when some group cannot reach the target.
    pub group_slots: Vec<u64>,
    /// Longest group slot.
    pub per_group_slot: Option<u64>,
    pub total_reserved: Option<u64>,
    /// Every group slot fits the standard's maximum RAW slot.
    pub standard_compliant: bool,
    /// Smallest delivery probability reachable by any group.
    pub max_achievable: f64,
}

impl GroupPlan {
    pub fn feasible(&self) -> bool {
        self.total_reserved.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSweep {
    pub problem: Problem,
    pub plans: Vec<GroupPlan>,
    pub best: GroupPlan,
}

pub const GROUPS_CSV_HEADER: &str = "g,group_size,slot_us,total_us,compliant";

impl GroupSweep {
    /// One row per group count; `group_size` and `slot_us` describe the
    /// largest group. Infeasible rows leave the durations empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(GROUPS_CSV_HEADER);
        out.push('\n');
        for plan in &self.plans {
            let size = plan.group_sizes.iter().max().copied().unwrap_or(0);
            let fmt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                plan.group_count,
                size,
                fmt(plan.per_group_slot),
                fmt(plan.total_reserved),
                plan.standard_compliant
            ));
        }
        out
    }
}

/// Mixtures and group sweeps over a shared [`ChainCache`].
#[derive(Debug)]
pub struct Planner {
    cache: ChainCache,
    options: MixtureOptions,
}

impl Planner {
    pub fn new(params: &ModelParams, durations: &SlotDurations) -> Result<Self> {
        Ok(Self {
            cache: ChainCache::new(params, durations)?,
            options: MixtureOptions::default(),
        })
    }

    pub fn with_options(mut self, options: MixtureOptions) -> Self {
        self.options = options;
        self
    }

    pub fn cache(&self) -> &ChainCache {
        &self.cache
    }

    pub fn options(&self) -> &MixtureOptions {
        &self.options
    }

    pub fn mixture_pa(&self, spec: &MixtureSpec) -> Result<TimeDistribution> {
        let (kept, _) = self.options.reduce(&spec.weights()?);
        let ks: BTreeSet<u32> = kept.iter().map(|&(k, _)| k).collect();
        self.cache.warm(&ks, Problem::A)?;
        let comps = kept
            .iter()
            .map(|&(k, w)| Ok((w, self.cache.p_a(k)?)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<(f64, &TimeDistribution)> =
            comps.iter().map(|(w, d)| (*w, d.as_ref())).collect();
        Ok(mix(&refs))
    }

    /// All-stations completion time for a group of `group_size` stations,
    /// each active with probability `p_active`.
    pub fn mixture_pb(&self, group_size: u32, p_active: f64) -> Result<TimeDistribution> {
        MixtureSpec::new(group_size, p_active).validate()?;
        let (kept, _) = self.options.reduce(&binomial_pmf(group_size, p_active));
        let ks: BTreeSet<u32> = kept.iter().map(|&(k, _)| k).collect();
        self.cache.warm(&ks, Problem::B)?;
        let comps = kept
            .iter()
            .map(|&(k, w)| Ok((w, self.cache.p_b(k)?)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<(f64, &TimeDistribution)> =
            comps.iter().map(|(w, d)| (*w, d.as_ref())).collect();
        Ok(mix(&refs))
    }

    fn group_mixture(
        &self,
        spec: &MixtureSpec,
        size: u32,
        problem: Problem,
    ) -> Result<TimeDistribution> {
        match problem {
            Problem::A => self.mixture_pa(&MixtureSpec {
                n_total: size,
                ..*spec
            }),
            Problem::B => self.mixture_pb(size, spec.p_active),
        }
    }

    /// Sweeps the group count over `g_range`, sizing every group's slot at
    /// quantile `q`. The best plan minimizes total reserved time, preferring
    /// fewer groups on ties.
    pub fn optimize_groups(
        &self,
        spec: &MixtureSpec,
        q: f64,
        g_range: RangeInclusive<u32>,
        problem: Problem,
    ) -> Result<GroupSweep> {
        spec.validate()?;
        let (g_lo, g_hi) = (*g_range.start(), *g_range.end());
        if g_lo == 0 || g_hi < g_lo || g_hi > spec.n_total {
            return Err(Error::Config(format!(
                "group range {g_lo}..={g_hi} must lie within 1..={}",
                spec.n_total
            )));
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::Probability {
                what: "quantile target",
                value: q,
                range: "(0, 1]",
            });
        }

        let sizes: BTreeSet<u32> = g_range
            .clone()
            .flat_map(|g| split_evenly(spec.n_total, g))
            .collect();

        // Warm every component up front so the expensive chain runs share
        // one parallel pass.
        let mut ks = BTreeSet::new();
        for &m in &sizes {
            let weights = match problem {
                Problem::A => MixtureSpec {
                    n_total: m,
                    ..*spec
                }
                .weights()?,
                Problem::B => binomial_pmf(m, spec.p_active),
            };
            ks.extend(self.options.reduce(&weights).0.into_iter().map(|(k, _)| k));
        }
        self.cache.warm(&ks, problem)?;

        // slot (or achievable mass) per group size
        let per_size: HashMap<u32, (Option<u64>, f64)> = sizes
            .par_iter()
            .map(|&m| {
                let dist = self.group_mixture(spec, m, problem)?;
                let slot = match plan_slot_duration(&dist, q) {
                    Ok(s) => Some(s),
                    Err(Error::UnsatisfiableQuantile { .. }) => None,
                    Err(e) => return Err(e),
                };
                Ok((m, (slot, dist.total_mass())))
            })
            .collect::<Result<_>>()?;

        let plans: Vec<GroupPlan> = g_range
            .map(|g| {
                let group_sizes = split_evenly(spec.n_total, g);
                let slots: Option<Vec<u64>> = group_sizes.iter().map(|m| per_size[m].0).collect();
                let max_achievable = group_sizes
                    .iter()
                    .map(|m| per_size[m].1)
                    .fold(f64::INFINITY, f64::min);
                let group_slots = slots.unwrap_or_default();
                let per_group_slot = group_slots.iter().max().copied();
                let total_reserved = (!group_slots.is_empty()).then(|| group_slots.iter().sum());
                GroupPlan {
                    group_count: g,
                    group_sizes,
                    quantile_target: q,
                    standard_compliant: per_group_slot.is_some_and(|s| s <= MAX_RAW_SLOT_US),
                    group_slots,
                    per_group_slot,
                    total_reserved,
                    max_achievable,
                }
            })
            .collect();

        let best = plans
            .iter()
            .filter(|p| p.feasible())
            .fold(None::<&GroupPlan>, |best, p| match best {
                Some(b) if b.total_reserved <= p.total_reserved => Some(b),
                _ => Some(p),
            })
            .cloned()
            .ok_or_else(|| Error::UnsatisfiableQuantile {
                requested: q,
                achievable: plans.iter().map(|p| p.max_achievable).fold(0.0, f64::max),
            })?;

        Ok(GroupSweep {
            problem,
            plans,
            best,
        })
    }
}

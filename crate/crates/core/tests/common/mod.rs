//! Test-only oracles, written independently of the library's code paths.
#![allow(dead_code)]

use std::collections::BTreeMap;

use mtc_raw::{ModelParams, SlotDurations, TimeDistribution};

pub fn cw(params: &ModelParams, r: usize) -> usize {
    let mut w = params.cw_min as usize;
    for _ in 0..r {
        w = (2 * w).min(params.cw_max as usize);
    }
    w
}

/// Hazard table built from first principles: in an infinite population every
/// attempt collides, so the slot of attempt `r + 1` is
/// `B_0 + (1 + B_1) + ... + (1 + B_r)` with independent uniform backoffs.
/// `b` is evaluated by literal summation with upper limit `t - 1`.
pub struct OracleTable {
    pub a: Vec<Vec<f64>>, // [r][t]
    pub b: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

impl OracleTable {
    pub fn new(params: &ModelParams, extent: usize) -> Self {
        let rl = params.retry_limit as usize;
        let mut a = Vec::new();
        // distribution of the attempt slot, kept as slot -> prob
        let mut dist: BTreeMap<usize, f64> = (0..cw(params, 0))
            .map(|t| (t, 1.0 / cw(params, 0) as f64))
            .collect();
        for r in 0..rl {
            if r > 0 {
                let w = cw(params, r);
                let mut next = BTreeMap::new();
                for (&t, &pr) in &dist {
                    for back in 0..w {
                        *next.entry(t + 1 + back).or_insert(0.0) += pr / w as f64;
                    }
                }
                dist = next;
            }
            a.push(
                (0..extent)
                    .map(|t| dist.get(&t).copied().unwrap_or(0.0))
                    .collect::<Vec<f64>>(),
            );
        }
        let mut b = vec![vec![0.0; extent]; rl];
        let mut p = vec![vec![0.0; extent]; rl];
        for r in 0..rl {
            for t in 0..extent {
                let own: f64 = (0..t).map(|i| a[r][i]).sum();
                b[r][t] = if r == 0 {
                    1.0 - own
                } else {
                    (0..t).map(|i| a[r - 1][i]).sum::<f64>() - own
                };
                p[r][t] = if b[r][t] > 1e-300 {
                    (a[r][t] / b[r][t]).min(1.0)
                } else {
                    0.0
                };
            }
        }
        Self { a, b, p }
    }

    pub fn p_tx(&self, t: usize, r: usize) -> f64 {
        self.p
            .get(r)
            .and_then(|col| col.get(t))
            .copied()
            .unwrap_or(0.0)
    }
}

pub struct EnumeratedChains {
    pub p_a: BTreeMap<u64, f64>,
    pub p_b: BTreeMap<u64, f64>,
    pub fail_a: f64,
    pub stranded_b: f64,
}

fn time(c: u64, s: u64, t: u64, d: &SlotDurations) -> u64 {
    c * d.t_collision + s * d.t_success + (t - c - s) * d.t_empty
}

/// Both chains by explicit path enumeration: every path is carried on its
/// own, never merged with others sharing a state. Only the per-slot peer
/// probability is taken from the marginal of process A, as the chain
/// prescribes.
pub fn enumerate_chains(params: &ModelParams, durations: &SlotDurations) -> EnumeratedChains {
    let n = params.n_stations as u64;
    let rl = params.retry_limit as u64;
    let horizon: usize = (0..params.retry_limit as usize)
        .map(|r| cw(params, r))
        .sum();
    let table = OracleTable::new(params, horizon + 2);

    // (c, s, r, prob)
    let mut paths_a: Vec<(u64, u64, u64, f64)> = vec![(0, 0, 0, 1.0)];
    let mut paths_b: Vec<(u64, u64, f64)> = vec![(0, 0, 1.0)];
    let mut out = EnumeratedChains {
        p_a: BTreeMap::new(),
        p_b: BTreeMap::new(),
        fail_a: 0.0,
        stranded_b: 0.0,
    };
    let mut t = 0u64;
    while !paths_a.is_empty() {
        let mut num: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        let mut den: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for &(c, s, r, pr) in &paths_a {
            *num.entry((c, s)).or_default() += table.p_tx(t as usize, r as usize) * pr;
            *den.entry((c, s)).or_default() += pr;
        }
        let peer_p = |c: u64, s: u64| match den.get(&(c, s)) {
            Some(&d) if d > 0.0 => num[&(c, s)] / d,
            _ => 0.0,
        };

        let mut next_a = Vec::new();
        for &(c, s, r, pr) in &paths_a {
            let q = table.p_tx(t as usize, r as usize);
            let p = peer_p(c, s);
            let others = n - s - 1;
            let e = (1.0 - p).powi(others as i32);
            let one = if others == 0 {
                0.0
            } else {
                others as f64 * p * (1.0 - p).powi(others as i32 - 1)
            };
            let many = 1.0 - e - one;
            let branches = [
                ((c, s, r), (1.0 - q) * e),
                ((c, s + 1, r), (1.0 - q) * one),
                ((c + 1, s, r), (1.0 - q) * many),
            ];
            for ((c2, s2, r2), w) in branches {
                if w > 0.0 {
                    next_a.push((c2, s2, r2, pr * w));
                }
            }
            let won = pr * q * e;
            if won > 0.0 {
                *out.p_a.entry(time(c, s + 1, t + 1, durations)).or_default() += won;
            }
            let lost = pr * q * (1.0 - e);
            if lost > 0.0 {
                if r + 1 == rl {
                    out.fail_a += lost;
                } else {
                    next_a.push((c + 1, s, r + 1, lost));
                }
            }
        }

        let mut next_b = Vec::new();
        for &(c, s, pr) in &paths_b {
            let p = peer_p(c, s);
            let left = n - s;
            let e = (1.0 - p).powi(left as i32);
            let one = left as f64 * p * (1.0 - p).powi(left as i32 - 1);
            let many = 1.0 - e - one;
            if e > 0.0 {
                next_b.push((c, s, pr * e));
            }
            if one > 0.0 {
                if s + 1 == n {
                    *out.p_b.entry(time(c, n, t + 1, durations)).or_default() += pr * one;
                } else {
                    next_b.push((c, s + 1, pr * one));
                }
            }
            if many > 0.0 {
                next_b.push((c + 1, s, pr * many));
            }
        }
        paths_a = next_a;
        paths_b = next_b;
        t += 1;
    }
    out.stranded_b = paths_b.iter().map(|p| p.2).sum();
    out
}

pub struct ExactProtocol {
    pub tagged: BTreeMap<u64, f64>,
    pub tagged_fail: f64,
    pub all: BTreeMap<u64, f64>,
    pub all_fail: f64,
}

#[derive(Clone)]
struct Sta {
    counter: usize,
    retries: usize,
    tagged: bool,
}

/// Exact outcome probabilities of the true protocol (station 0 tagged) by
/// exhaustive enumeration of every backoff draw. Only for tiny N and CW.
pub fn exact_protocol(params: &ModelParams, durations: &SlotDurations) -> ExactProtocol {
    let n = params.n_stations as usize;
    let w0 = cw(params, 0);
    let mut out = ExactProtocol {
        tagged: BTreeMap::new(),
        tagged_fail: 0.0,
        all: BTreeMap::new(),
        all_fail: 0.0,
    };
    let total = w0.pow(n as u32);
    for code in 0..total {
        let mut x = code;
        let stas: Vec<Sta> = (0..n)
            .map(|i| {
                let c = x % w0;
                x /= w0;
                Sta {
                    counter: c,
                    retries: 0,
                    tagged: i == 0,
                }
            })
            .collect();
        explore(
            params,
            durations,
            stas,
            0,
            1.0 / total as f64,
            None,
            0,
            false,
            &mut out,
        );
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn explore(
    params: &ModelParams,
    d: &SlotDurations,
    mut stas: Vec<Sta>,
    mut now: u64,
    pr: f64,
    mut tagged_done: Option<Result<u64, u64>>,
    mut last_success: u64,
    mut any_failed: bool,
    out: &mut ExactProtocol,
) {
    loop {
        if stas.is_empty() {
            match tagged_done.expect("tagged resolved") {
                Ok(t) => *out.tagged.entry(t).or_default() += pr,
                Err(_) => out.tagged_fail += pr,
            }
            if any_failed {
                out.all_fail += pr;
            } else {
                *out.all.entry(last_success).or_default() += pr;
            }
            return;
        }
        let tx: Vec<usize> = (0..stas.len()).filter(|&i| stas[i].counter == 0).collect();
        for s in stas.iter_mut() {
            s.counter = s.counter.saturating_sub(1);
        }
        match tx.len() {
            0 => now += d.t_empty,
            1 => {
                now += d.t_success;
                let s = stas.remove(tx[0]);
                if s.tagged {
                    tagged_done = Some(Ok(now));
                }
                last_success = now;
            }
            _ => {
                now += d.t_collision;
                let mut redraw = Vec::new();
                for &i in tx.iter().rev() {
                    stas[i].retries += 1;
                    if stas[i].retries >= params.retry_limit as usize {
                        let s = stas.remove(i);
                        any_failed = true;
                        if s.tagged {
                            tagged_done = Some(Err(now));
                        }
                    } else {
                        redraw.push(i);
                    }
                }
                if redraw.is_empty() {
                    continue;
                }
                // branch over every joint redraw
                let windows: Vec<usize> = redraw
                    .iter()
                    .map(|&i| cw(params, stas[i].retries))
                    .collect();
                let combos: usize = windows.iter().product();
                for code in 0..combos {
                    let mut x = code;
                    let mut next = stas.clone();
                    for (k, &i) in redraw.iter().enumerate() {
                        next[i].counter = x % windows[k];
                        x /= windows[k];
                    }
                    explore(
                        params,
                        d,
                        next,
                        now,
                        pr / combos as f64,
                        tagged_done,
                        last_success,
                        any_failed,
                        out,
                    );
                }
                return;
            }
        }
    }
}

pub fn as_distribution(atoms: &BTreeMap<u64, f64>) -> TimeDistribution {
    TimeDistribution::from_atoms(atoms.iter().map(|(&d, &p)| (d, p)))
}

/// Durations that keep `(t, c, s)` recoverable from real time on short runs.
pub fn injective_durations() -> SlotDurations {
    SlotDurations::new(1, 100, 10_000)
}

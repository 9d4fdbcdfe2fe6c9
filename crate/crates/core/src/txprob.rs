//! Per-slot transmission hazard of a station in an infinite population.
//!
//! `a(t, r)` is the probability that a station makes its `(r+1)`-th attempt in
//! virtual slot `t`, `b(t, r)` the probability that it enters slot `t` holding
//! retry count `r` without having transmitted yet, and `p_tx = a / b` the
//! conditional transmission probability. With infinitely many contenders every
//! attempt collides, so each column of `a` is the distribution of
//! `B_0 + (1 + B_1) + ... + (1 + B_r)` with `B_j` uniform on `[0, CW_j - 1]`.

use crate::error::Result;
use crate::params::ModelParams;
use crate::sum::CompensatedSum;

#[derive(Debug, Clone)]
pub struct TxProbTable {
    t_extent: usize,
    retry_limit: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    p_tx: Vec<f64>,
}

impl TxProbTable {
    /// Materializes rows `t = 0 .. t_extent`. Lookups beyond the extent
    /// return zero.
    pub fn build(params: &ModelParams, t_extent: usize) -> Result<Self> {
        params.validate()?;
        let t_extent = t_extent.max(1);
        let rl = params.retry_limit as usize;
        let cw0 = params.cw_min as usize;
        // Columns always cover the full support so tail sums are exact even
        // when fewer rows are materialized.
        let len = t_extent.max(params.horizon() as usize + 1);

        // Column-major while building.
        let mut a_cols: Vec<Vec<f64>> = Vec::with_capacity(rl);
        let mut first = vec![0.0; len];
        for v in first.iter_mut().take(cw0) {
            *v = 1.0 / cw0 as f64;
        }
        a_cols.push(first);

        for r in 1..rl {
            let cw = params.contention_window(r as u32) as usize;
            let prev = &a_cols[r - 1];
            let (lo, hi) = support(prev);
            let mut col = vec![0.0; len];
            for (t, v) in col.iter_mut().enumerate() {
                // sum_{i = t - CW_r}^{t - 1} a(i, r - 1), negative i contributing 0
                let start = t.saturating_sub(cw).max(lo);
                let end = t.min(hi + 1);
                if start < end {
                    let window: CompensatedSum = prev[start..end].iter().copied().collect();
                    *v = window.value() / cw as f64;
                }
            }
            a_cols.push(col);
        }

        let mut a = vec![0.0; t_extent * rl];
        let mut b = vec![0.0; t_extent * rl];
        let mut p_tx = vec![0.0; t_extent * rl];

        for (t, &a0) in a_cols[0].iter().enumerate().take(t_extent.min(cw0)) {
            let idx = t * rl;
            a[idx] = a0;
            b[idx] = (cw0 - t) as f64 / cw0 as f64;
            p_tx[idx] = 1.0 / (cw0 - t) as f64;
        }

        for r in 1..rl {
            let prev = &a_cols[r - 1];
            let cur = &a_cols[r];
            // head_x(t) = sum_{i < t} x(i), tail_x(t) = sum_{i >= t} x(i)
            let head_prev = prefix_sums(prev);
            let head_cur = prefix_sums(cur);
            let tail_prev = suffix_sums(prev);
            let tail_cur = suffix_sums(cur);
            for t in 0..t_extent {
                let idx = t * rl + r;
                let at = cur[t];
                // Both forms are equal because every column sums to one; take
                // the one with smaller operands to limit cancellation.
                let bt = if head_prev[t] <= tail_cur[t] {
                    head_prev[t] - head_cur[t]
                } else {
                    tail_cur[t] - tail_prev[t]
                };
                let bt = if at > 0.0 { bt.max(at) } else { bt.max(0.0) };
                a[idx] = at;
                b[idx] = bt;
                p_tx[idx] = if bt > 0.0 {
                    (at / bt).clamp(0.0, 1.0)
                } else {
                    0.0
                };
            }
        }

        Ok(Self {
            t_extent,
            retry_limit: rl,
            a,
            b,
            p_tx,
        })
    }

    pub fn t_extent(&self) -> usize {
        self.t_extent
    }

    pub fn retry_limit(&self) -> usize {
        self.retry_limit
    }

    pub fn a(&self, t: usize, r: usize) -> f64 {
        self.lookup(&self.a, t, r)
    }

    pub fn b(&self, t: usize, r: usize) -> f64 {
        self.lookup(&self.b, t, r)
    }

    /// `Pr(TX | t, r)`; zero where `b(t, r) = 0`.
    pub fn p_tx(&self, t: usize, r: usize) -> f64 {
        self.lookup(&self.p_tx, t, r)
    }

    /// Hazards for every retry count at slot `t` (all zero past the extent).
    pub fn p_tx_row(&self, t: usize) -> &[f64] {
        if t < self.t_extent {
            &self.p_tx[t * self.retry_limit..(t + 1) * self.retry_limit]
        } else {
            &[]
        }
    }

    fn lookup(&self, data: &[f64], t: usize, r: usize) -> f64 {
        if t < self.t_extent && r < self.retry_limit {
            data[t * self.retry_limit + r]
        } else {
            0.0
        }
    }
}

fn support(col: &[f64]) -> (usize, usize) {
    let lo = col.iter().position(|&x| x > 0.0).unwrap_or(col.len());
    let hi = col.iter().rposition(|&x| x > 0.0).unwrap_or(0);
    (lo, hi)
}

fn prefix_sums(col: &[f64]) -> Vec<f64> {
    let mut acc = CompensatedSum::default();
    let mut out = Vec::with_capacity(col.len());
    for &x in col {
        out.push(acc.value());
        acc.add(x);
    }
    out
}

fn suffix_sums(col: &[f64]) -> Vec<f64> {
    let mut acc = CompensatedSum::default();
    let mut out = vec![0.0; col.len()];
    for (t, &x) in col.iter().enumerate().rev() {
        acc.add(x);
        out[t] = acc.value();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset_table() -> TxProbTable {
        let p = ModelParams::preset(7);
        TxProbTable::build(&p, p.horizon() as usize + 8).unwrap()
    }

    #[test]
    fn first_window_hazard_is_exact() {
        let table = preset_table();
        assert_eq!(table.a(0, 0), 1.0 / 16.0);
        assert_eq!(table.b(0, 0), 1.0);
        assert_eq!(table.p_tx(0, 0), 1.0 / 16.0);
        for t in 0..16 {
            assert_eq!(table.p_tx(t, 0), 1.0 / (16 - t) as f64);
        }
        assert_eq!(table.p_tx(15, 0), 1.0);
        for t in 16..100 {
            assert_eq!(table.a(t, 0), 0.0);
            assert_eq!(table.p_tx(t, 0), 0.0);
        }
    }

    #[test]
    fn hazard_reaches_one_at_the_last_slot_of_each_window() {
        let p = ModelParams::preset(7);
        let table = preset_table();
        let mut last = 0usize;
        for r in 0..7u32 {
            last += p.contention_window(r) as usize;
            assert!(table.a(last - 1, r as usize) > 0.0);
            assert_eq!(table.a(last, r as usize), 0.0);
            assert_eq!(table.p_tx(last - 1, r as usize), 1.0, "r = {r}");
        }
    }

    #[test]
    fn bounds_hold_everywhere() {
        let table = preset_table();
        for t in 0..table.t_extent() {
            for r in 0..7 {
                let (a, b, p) = (table.a(t, r), table.b(t, r), table.p_tx(t, r));
                assert!(0.0 <= a && a <= b && b <= 1.0 + 1e-12, "t={t} r={r}");
                assert!((0.0..=1.0).contains(&p));
                if b == 0.0 {
                    assert_eq!(p, 0.0);
                }
            }
        }
    }

    #[test]
    fn out_of_range_lookups_are_zero() {
        let table = preset_table();
        assert_eq!(table.p_tx(1_000_000, 0), 0.0);
        assert_eq!(table.a(0, 7), 0.0);
        assert!(table.p_tx_row(1_000_000).is_empty());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad = ModelParams::new(3, 0, 8, 2);
        assert!(TxProbTable::build(&bad, 10).is_err());
        let bad = ModelParams::new(3, 4, 8, 0);
        assert!(TxProbTable::build(&bad, 10).is_err());
    }
}

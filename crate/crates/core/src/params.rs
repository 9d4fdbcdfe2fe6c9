//! Contention parameters and virtual-slot durations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Backoff slot length used by the 802.11ah S1G PHY presets, in microseconds.
pub const SIGMA_US: u64 = 52;

/// Longest RAW slot the standard can signal, in microseconds.
pub const MAX_RAW_SLOT_US: u64 = 246_140;

/// Contention and numeric configuration shared by the chains and the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of contending stations.
    pub n_stations: u32,
    pub cw_min: u32,
    pub cw_max: u32,
    /// Maximum number of transmission attempts per frame.
    pub retry_limit: u32,
    /// Chains stop once absorbed plus dropped mass reaches `1 - epsilon`.
    pub epsilon: f64,
    /// Hard cap on model time, in virtual slots.
    pub t_max_cap: u64,
    /// State mass strictly below this floor is dropped and tallied.
    pub prune_floor: f64,
}

impl ModelParams {
    pub const DEFAULT_EPSILON: f64 = 1e-6;
    pub const DEFAULT_PRUNE_FLOOR: f64 = 1e-12;

    /// Parameters with default numeric controls: `epsilon = 1e-6`,
    /// `prune_floor = 1e-12` and a time cap of `50 * cw_max * retry_limit`.
    pub fn new(n_stations: u32, cw_min: u32, cw_max: u32, retry_limit: u32) -> Self {
        Self {
            n_stations,
            cw_min,
            cw_max,
            retry_limit,
            epsilon: Self::DEFAULT_EPSILON,
            t_max_cap: Self::default_cap(cw_max, retry_limit),
            prune_floor: Self::DEFAULT_PRUNE_FLOOR,
        }
    }

    /// `CW_min = 16`, `CW_max = 1024`, `RL = 7`.
    pub fn preset(n_stations: u32) -> Self {
        Self::new(n_stations, 16, 1024, 7)
    }

    pub fn default_cap(cw_max: u32, retry_limit: u32) -> u64 {
        50 * u64::from(cw_max) * u64::from(retry_limit)
    }

    pub fn with_n(&self, n_stations: u32) -> Self {
        Self {
            n_stations,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_stations == 0 {
            return Err(Error::Config("n_stations must be at least 1".into()));
        }
        if self.cw_min == 0 {
            return Err(Error::Config("cw_min must be positive".into()));
        }
        if self.cw_max < self.cw_min {
            return Err(Error::Config(format!(
                "cw_max ({}) must be >= cw_min ({})",
                self.cw_max, self.cw_min
            )));
        }
        if self.retry_limit == 0 {
            return Err(Error::Config("retry_limit must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Probability {
                what: "epsilon",
                value: self.epsilon,
                range: "(0, 1)",
            });
        }
        if !(0.0..1.0).contains(&self.prune_floor) {
            return Err(Error::Probability {
                what: "prune_floor",
                value: self.prune_floor,
                range: "[0, 1)",
            });
        }
        if self.t_max_cap == 0 {
            return Err(Error::Config("t_max_cap must be positive".into()));
        }
        Ok(())
    }

    /// Contention window before attempt `r + 1`: `CW_0 = cw_min`,
    /// `CW_r = min(cw_max, 2 * CW_{r-1})`.
    pub fn contention_window(&self, retries: u32) -> u32 {
        let mut cw = self.cw_min;
        for _ in 0..retries {
            if cw >= self.cw_max {
                break;
            }
            cw = cw.saturating_mul(2).min(self.cw_max);
        }
        cw
    }

    /// Number of virtual slots after which no station can still be
    /// contending: `sum_{r < RL} CW_r`.
    pub fn horizon(&self) -> u64 {
        (0..self.retry_limit)
            .map(|r| u64::from(self.contention_window(r)))
            .sum()
    }
}

/// Real-time length of each virtual-slot type, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDurations {
    pub t_empty: u64,
    pub t_success: u64,
    pub t_collision: u64,
}

impl SlotDurations {
    pub fn new(t_empty: u64, t_success: u64, t_collision: u64) -> Self {
        Self {
            t_empty,
            t_success,
            t_collision,
        }
    }

    /// MCS0 at 2 MHz with 100-byte frames: `T_e = σ = 52 µs`, `T_s = T_c = 42σ`.
    pub fn preset() -> Self {
        Self::new(SIGMA_US, 42 * SIGMA_US, 42 * SIGMA_US)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_empty == 0 || self.t_success == 0 || self.t_collision == 0 {
            return Err(Error::Config("slot durations must be positive".into()));
        }
        if self.t_success < self.t_empty || self.t_collision < self.t_empty {
            return Err(Error::Config(
                "success and collision slots must not be shorter than an empty slot".into(),
            ));
        }
        Ok(())
    }
}

/// Real time elapsed after `t` virtual slots of which `c` were collisions and
/// `s` successes: `c·T_c + s·T_s + (t − c − s)·T_e`.
pub fn state_time(c: u64, s: u64, t: u64, durations: &SlotDurations) -> Result<u64> {
    if c + s > t {
        return Err(Error::InvalidState { t, c, s });
    }
    Ok(c * durations.t_collision + s * durations.t_success + (t - c - s) * durations.t_empty)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contention_window_doubles_then_caps() {
        let p = ModelParams::preset(7);
        let cws: Vec<u32> = (0..9).map(|r| p.contention_window(r)).collect();
        assert_eq!(cws, vec![16, 32, 64, 128, 256, 512, 1024, 1024, 1024]);
        assert_eq!(p.horizon(), 2032);

        let odd = ModelParams::new(3, 5, 12, 4);
        assert_eq!(
            (0..4).map(|r| odd.contention_window(r)).collect::<Vec<_>>(),
            vec![5, 10, 12, 12]
        );
    }

    #[test]
    fn default_cap_scales_with_window_and_retries() {
        let p = ModelParams::preset(7);
        assert_eq!(p.t_max_cap, 50 * 1024 * 7);
        assert_eq!(p.epsilon, 1e-6);
        assert_eq!(p.prune_floor, 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(0, 16, 1024, 7).validate().is_err());
        assert!(ModelParams::new(1, 0, 1024, 7).validate().is_err());
        assert!(ModelParams::new(1, 32, 16, 7).validate().is_err());
        assert!(ModelParams::new(1, 16, 1024, 0).validate().is_err());
        let mut p = ModelParams::preset(2);
        p.epsilon = 0.0;
        assert!(p.validate().is_err());
        p.epsilon = 1e-6;
        p.prune_floor = 1.0;
        assert!(p.validate().is_err());
        assert!(ModelParams::preset(2).validate().is_ok());
    }

    #[test]
    fn rejects_bad_durations() {
        assert!(SlotDurations::new(0, 10, 10).validate().is_err());
        assert!(SlotDurations::new(10, 5, 10).validate().is_err());
        assert!(SlotDurations::new(10, 10, 5).validate().is_err());
        assert!(SlotDurations::preset().validate().is_ok());
    }

    #[test]
    fn state_time_examples() {
        let d = SlotDurations::preset();
        assert_eq!(d.t_success, 2184);
        assert_eq!(state_time(0, 0, 0, &d).unwrap(), 0);
        assert_eq!(state_time(1, 2, 5, &d).unwrap(), 6656);
        assert_eq!(
            state_time(3, 3, 5, &d),
            Err(Error::InvalidState { t: 5, c: 3, s: 3 })
        );
    }

    #[test]
    fn state_time_monotone_in_busy_slots() {
        let d = SlotDurations::new(9, 100, 250);
        for t in 0..12u64 {
            for c in 0..=t {
                for s in 0..=(t - c) {
                    let base = state_time(c, s, t, &d).unwrap();
                    if c + s < t {
                        assert!(state_time(c + 1, s, t, &d).unwrap() >= base);
                        assert!(state_time(c, s + 1, t, &d).unwrap() >= base);
                    }
                }
            }
        }
    }
}

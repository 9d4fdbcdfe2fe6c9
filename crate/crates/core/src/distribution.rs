//! Discrete (sub-)probability distributions over real-time durations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

pub const CSV_HEADER: &str = "duration_us,probability";

/// Atoms at integer microsecond durations. `total_mass` may fall short of one;
/// the shortfall (`deficit`) is failure probability plus any truncated or
/// pruned tail.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeDistribution {
    atoms: BTreeMap<u64, f64>,
    total_mass: f64,
}

impl TimeDistribution {
    /// Builds a distribution, merging repeated durations and discarding
    /// non-positive masses.
    pub fn from_atoms<I>(atoms: I) -> Self
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        let mut merged: BTreeMap<u64, CompensatedSum> = BTreeMap::new();
        for (d, p) in atoms {
            if p > 0.0 {
                merged.entry(d).or_default().add(p);
            }
        }
        let atoms: BTreeMap<u64, f64> = merged
            .into_iter()
            .map(|(d, acc)| (d, acc.value()))
            .filter(|&(_, p)| p > 0.0)
            .collect();
        let total_mass = atoms.values().copied().collect::<CompensatedSum>().value();
        Self { atoms, total_mass }
    }

    pub fn point_mass(duration: u64) -> Self {
        Self::from_atoms([(duration, 1.0)])
    }

    pub fn atoms(&self) -> &BTreeMap<u64, f64> {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn deficit(&self) -> f64 {
        (1.0 - self.total_mass).max(0.0)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn probability(&self, duration: u64) -> f64 {
        self.atoms.get(&duration).copied().unwrap_or(0.0)
    }

    /// Mass at durations `<= tau`.
    pub fn cdf(&self, tau: u64) -> f64 {
        self.atoms
            .range(..=tau)
            .map(|(_, &p)| p)
            .collect::<CompensatedSum>()
            .value()
    }

    /// Smallest duration whose cumulative mass reaches `q`.
    pub fn quantile(&self, q: f64) -> Result<u64> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::Probability {
                what: "quantile level",
                value: q,
                range: "(0, 1]",
            });
        }
        // Roundoff in the running sum must not turn a satisfiable request
        // into an error, so compare against the total with a little slack.
        const SLACK: f64 = 1e-12;
        if q > self.total_mass + SLACK || self.atoms.is_empty() {
            return Err(Error::UnsatisfiableQuantile {
                requested: q,
                achievable: self.total_mass,
            });
        }
        let mut acc = CompensatedSum::default();
        for (&d, &p) in &self.atoms {
            acc.add(p);
            if acc.value() >= q {
                return Ok(d);
            }
        }
        Ok(*self.atoms.keys().next_back().expect("non-empty"))
    }

    /// Atom with the largest probability (earliest on ties).
    pub fn mode(&self) -> Option<(u64, f64)> {
        self.atoms
            .iter()
            .fold(None, |best: Option<(u64, f64)>, (&d, &p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((d, p)),
            })
    }

    pub fn mean(&self) -> Option<f64> {
        if self.total_mass <= 0.0 {
            return None;
        }
        let m: CompensatedSum = self.atoms.iter().map(|(&d, &p)| d as f64 * p).collect();
        Some(m.value() / self.total_mass)
    }

    pub fn scaled(&self, weight: f64) -> Self {
        Self::from_atoms(self.atoms.iter().map(|(&d, &p)| (d, p * weight)))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.atoms.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (d, p) in &self.atoms {
            out.push_str(&format!("{d},{p}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header `{CSV_HEADER}`, found {other:?}"
                )))
            }
        }
        let mut atoms = Vec::new();
        for (i, line) in lines.enumerate() {
            let (d, p) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("row {}: expected two fields", i + 1)))?;
            let d: u64 = d
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: duration: {e}", i + 1)))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: probability: {e}", i + 1)))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parse(format!(
                    "row {}: probability {p} out of range",
                    i + 1
                )));
            }
            atoms.push((d, p));
        }
        Ok(Self::from_atoms(atoms))
    }
}

#[derive(Serialize, Deserialize)]
struct Atom {
    duration_us: u64,
    probability: f64,
}

#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    atoms: Vec<Atom>,
    total_mass: f64,
    deficit: f64,
}

impl Serialize for TimeDistribution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DistributionRepr {
            atoms: self
                .atoms
                .iter()
                .map(|(&duration_us, &probability)| Atom {
                    duration_us,
                    probability,
                })
                .collect(),
            total_mass: self.total_mass,
            deficit: self.deficit(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TimeDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = DistributionRepr::deserialize(deserializer)?;
        Ok(Self::from_atoms(
            repr.atoms
                .into_iter()
                .map(|a| (a.duration_us, a.probability)),
        ))
    }
}

/// Supremum distance between the two (sub-)distribution functions.
pub fn kolmogorov_distance(x: &TimeDistribution, y: &TimeDistribution) -> f64 {
    let mut points: Vec<u64> = x.atoms.keys().chain(y.atoms.keys()).copied().collect();
    points.sort_unstable();
    points.dedup();
    let (mut fx, mut fy) = (CompensatedSum::default(), CompensatedSum::default());
    let mut sup = 0.0f64;
    for d in points {
        fx.add(x.probability(d));
        fy.add(y.probability(d));
        sup = sup.max((fx.value() - fy.value()).abs());
    }
    sup
}

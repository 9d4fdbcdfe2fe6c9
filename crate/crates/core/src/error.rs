use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid probability {value} for {what}: must lie in {range}")]
    Probability {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    /// `c + s > t`: more busy slots than virtual slots elapsed.
    #[error("state (t={t}, c={c}, s={s}) violates c + s <= t")]
    InvalidState { t: u64, c: u64, s: u64 },

    #[error("model time cap {cap} reached with {deficit:e} probability mass unresolved")]
    Truncated { cap: u64, deficit: f64 },

    #[error("quantile {requested} unsatisfiable: distribution only reaches {achievable}")]
    UnsatisfiableQuantile { requested: f64, achievable: f64 },

    #[error("mixture has no support: {0}")]
    EmptyMixture(String),

    #[error("malformed distribution data: {0}")]
    Parse(String),
}

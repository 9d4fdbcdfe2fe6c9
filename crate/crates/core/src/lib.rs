//! Frame-delivery time distributions for `N` stations contending inside an
//! IEEE 802.11ah Restricted Access Window (RAW) slot.
//!
//! The crate has four parts:
//!
//! * [`txprob`] and [`chain`]: two layered absorbing Markov chains. Process A
//!   follows one tagged station until it delivers its frame or exhausts its
//!   retry limit; process B follows the whole group until every station has
//!   delivered. Both run on a virtual-slot time scale and are mapped back to
//!   real time through [`SlotDurations`].
//! * [`sim`]: a seeded slot-level Monte-Carlo simulator of truncated binary
//!   exponential backoff, used as an independent oracle for the chains.
//! * [`planner`]: RAW slot sizing from delivery-time quantiles, binomial
//!   mixtures over the number of active stations and group-count sweeps.
//! * [`distribution`]: the discrete time distribution type shared by all of
//!   the above, with quantiles and CSV/JSON serialization.

pub mod chain;
pub mod distribution;
pub mod error;
pub mod params;
pub mod planner;
pub mod sim;
mod sum;
pub mod txprob;

pub use chain::{run_chains, ChainOutput, ChainSelection, Diagnostics, StateLayerA, StateLayerB};
pub use distribution::{kolmogorov_distance, TimeDistribution};
pub use error::{Error, Result};
pub use params::{state_time, ModelParams, SlotDurations};
pub use txprob::TxProbTable;

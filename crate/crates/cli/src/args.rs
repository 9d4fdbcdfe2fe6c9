use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mtc_raw::planner::{Conditioning, MixtureOptions, Problem};
use mtc_raw::{ModelParams, SlotDurations};

#[derive(Debug, Parser)]
#[command(
    name = "mtc-raw",
    version,
    about = "Delivery-time model, simulator and planner for 802.11ah RAW slots"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run both chains and write P_A, P_B and their quantiles.
    Model(ModelArgs),
    /// Monte-Carlo simulation of the same contention process.
    Simulate(SimulateArgs),
    /// Compare a model output directory with a simulation output directory.
    Compare(CompareArgs),
    /// Size one RAW slot for N stations each active with probability p.
    Plan(PlanArgs),
    /// Sweep the number of groups and report total reserved time.
    Groups(GroupsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

impl From<ProblemArg> for Problem {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::A => Problem::A,
            ProblemArg::B => Problem::B,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConditioningArg {
    #[value(name = "tagged-has-packet", alias = "tagged")]
    TaggedHasPacket,
    #[value(name = "paper-literal", alias = "literal")]
    PaperLiteral,
}

impl From<ConditioningArg> for Conditioning {
    fn from(c: ConditioningArg) -> Self {
        match c {
            ConditioningArg::TaggedHasPacket => Conditioning::TaggedHasPacket,
            ConditioningArg::PaperLiteral => Conditioning::PaperLiteral,
        }
    }
}

/// Contention and timing flags. `--paper-params` fills in CW_min 16,
/// CW_max 1024, RL 7, T_e 52 µs and T_s = T_c = 2184 µs; explicit flags
/// override individual preset values.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Number of stations.
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub cw_min: Option<u32>,
    #[arg(long)]
    pub cw_max: Option<u32>,
    #[arg(long)]
    pub retry_limit: Option<u32>,
    #[arg(long, default_value_t = ModelParams::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = ModelParams::DEFAULT_PRUNE_FLOOR)]
    pub prune_floor: f64,
    /// Defaults to 50 * cw_max * retry_limit.
    #[arg(long)]
    pub t_max_cap: Option<u64>,
    #[arg(long)]
    pub te_us: Option<u64>,
    #[arg(long)]
    pub ts_us: Option<u64>,
    #[arg(long)]
    pub tc_us: Option<u64>,
    #[arg(long)]
    pub paper_params: bool,
}

impl ParamArgs {
    pub fn resolve(&self) -> Result<(ModelParams, SlotDurations), String> {
        let preset_p = ModelParams::preset(self.n);
        let preset_d = SlotDurations::preset();
        let pick = |v: Option<u32>, preset: u32, flag: &str| -> Result<u32, String> {
            match (v, self.paper_params) {
                (Some(x), _) => Ok(x),
                (None, true) => Ok(preset),
                (None, false) => Err(format!("--{flag} is required without --paper-params")),
            }
        };
        let pick_us = |v: Option<u64>, preset: u64, flag: &str| -> Result<u64, String> {
            match (v, self.paper_params) {
                (Some(x), _) => Ok(x),
                (None, true) => Ok(preset),
                (None, false) => Err(format!("--{flag} is required without --paper-params")),
            }
        };
        let cw_min = pick(self.cw_min, preset_p.cw_min, "cw-min")?;
        let cw_max = pick(self.cw_max, preset_p.cw_max, "cw-max")?;
        let retry_limit = pick(self.retry_limit, preset_p.retry_limit, "retry-limit")?;
        let mut params = ModelParams::new(self.n, cw_min, cw_max, retry_limit);
        params.epsilon = self.epsilon;
        params.prune_floor = self.prune_floor;
        if let Some(cap) = self.t_max_cap {
            params.t_max_cap = cap;
        }
        let durations = SlotDurations::new(
            pick_us(self.te_us, preset_d.t_empty, "te-us")?,
            pick_us(self.ts_us, preset_d.t_success, "ts-us")?,
            pick_us(self.tc_us, preset_d.t_collision, "tc-us")?,
        );
        params.validate().map_err(|e| e.to_string())?;
        durations.validate().map_err(|e| e.to_string())?;
        Ok((params, durations))
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub runs: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub tagged: u32,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directory written by `model`.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory written by `simulate`.
    #[arg(long)]
    pub sim: PathBuf,
    #[arg(long, value_enum, default_value_t = ProblemArg::A)]
    pub problem: ProblemArg,
    /// Largest Kolmogorov distance that still passes.
    #[arg(long, default_value_t = 0.03)]
    pub tolerance: f64,
    /// Optional directory for the full report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MixtureArgs {
    /// Probability that a station holds a frame when the slot opens.
    #[arg(long)]
    pub p: f64,
    /// Target delivery probability.
    #[arg(long)]
    pub q: f64,
    #[arg(long, value_enum, default_value_t = ConditioningArg::TaggedHasPacket)]
    pub conditioning: ConditioningArg,
    /// Evaluate every k-th active-station count only (1 = exact).
    #[arg(long, default_value_t = 1)]
    pub k_stride: u32,
    #[arg(long, default_value_t = 1e-12)]
    pub weight_floor: f64,
}

impl MixtureArgs {
    pub fn options(&self) -> Result<MixtureOptions, String> {
        if self.k_stride == 0 {
            return Err("--k-stride must be at least 1".into());
        }
        Ok(MixtureOptions {
            weight_floor: self.weight_floor,
            k_stride: self.k_stride,
        })
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub mixture: MixtureArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GroupsArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub mixture: MixtureArgs,
    #[arg(long, default_value_t = 1)]
    pub g_min: u32,
    #[arg(long)]
    pub g_max: u32,
    #[arg(long, value_enum, default_value_t = ProblemArg::A)]
    pub problem: ProblemArg,
    #[arg(long)]
    pub out: PathBuf,
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "ldpc-replica", version, about = "Replica analysis and BP simulation of regular LDPC ensembles")]
pub struct Cli {
    /// Worker threads for the parallel solvers (0 = one per core). Results do
    /// not depend on this.
    #[arg(long, global = true, env = "LDPC_REPLICA_WORKERS", default_value_t = 0)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Conditional entropy curves on the dicode erasure channel.
    DecCurve(DecCurveArgs),
    /// BP or MAP threshold on the dicode erasure channel.
    Threshold(ThresholdArgs),
    /// Population dynamics and the replica-symmetric entropy for a channel.
    De(DeArgs),
    /// Finite-length joint BP decoding.
    Simulate(SimulateArgs),
    /// Classification and structural checks of a channel spec.
    ChannelCheck(ChannelCheckArgs),
    /// Re-runs the command recorded in a manifest.
    Replay(ReplayArgs),
}

/// Where the channel comes from: a spec file, or the DEC with erasure
/// probability `--eps`.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[group(required = true, multiple = false)]
pub struct ChannelArgs {
    /// Channel spec file (JSON).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Use the dicode erasure channel with this erasure probability.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DecCurveArgs {
    /// Variable degrees; several values give several curves.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub l: Vec<usize>,
    /// Check degrees, paired with `--l`.
    #[arg(long, value_delimiter = ',', default_value = "6")]
    pub r: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub eps_start: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps_end: f64,
    /// Number of grid points, endpoints included.
    #[arg(long, default_value_t = 201)]
    pub steps: usize,
    /// Output CSV. With several ensembles, `-<l>-<r>` is appended to the stem.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    Bp,
    Map,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 3)]
    pub l: usize,
    #[arg(long, default_value_t = 6)]
    pub r: usize,
    #[arg(long, value_enum, default_value_t = ThresholdKind::Bp)]
    pub kind: ThresholdKind,
    /// Bisection tolerance.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// Manifest file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DeArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = 3)]
    pub l: usize,
    #[arg(long, default_value_t = 6)]
    pub r: usize,
    #[arg(long, default_value_t = 10_000)]
    pub pop_size: usize,
    #[arg(long, default_value_t = 200)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Monte-Carlo samples per entropy term.
    #[arg(long, default_value_t = 200_000)]
    pub mc_samples: usize,
    /// Snapshot CSV of the variable-to-check pool.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = 3)]
    pub l: usize,
    #[arg(long, default_value_t = 6)]
    pub r: usize,
    /// Block length.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ChannelCheckArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Manifest file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Redirect the primary output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use jointgap::ControllerVariant;

#[derive(Debug, Parser)]
#[command(
    name = "jointgap",
    version,
    about = "Joint-space sim-to-real gap experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a step-response experiment and write trajectory.csv and velocities.csv.
    Step(StepArgs),
    /// Accumulated error between two trajectory CSVs.
    Gap(GapArgs),
    /// Count joint velocity-limit violations in a trajectory CSV.
    Violations(ViolationsArgs),
    /// Train a home-to-zero policy with the cross-entropy method.
    Train(TrainArgs),
    /// Roll a trained policy out from home and write trajectory.csv.
    Rollout(RolloutArgs),
}

fn parse_variant(s: &str) -> Result<ControllerVariant, String> {
    s.parse().map_err(|e: jointgap::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct StepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's controller (gym-pd, sim-pd, ros-pid).
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<ControllerVariant>,
    /// Overrides the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    pub reference: PathBuf,
    pub test: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// `final` (each trajectory settles to its own last sample) or a
    /// comma-separated pose both must settle to.
    #[arg(long, default_value = "final")]
    pub settle_target: String,
    #[arg(long, default_value_t = jointgap::gap::DEFAULT_SETTLE_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = jointgap::gap::DEFAULT_SETTLE_WINDOW)]
    pub window: f64,
    /// Row label of the computed report in the printed table.
    #[arg(long, default_value = "test")]
    pub label: String,
    /// Extra table row from a stored report, as `LABEL=report.json`.
    #[arg(long = "compare", value_name = "LABEL=PATH")]
    pub compare: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ViolationsArgs {
    pub trajectory: PathBuf,
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub model: Option<PathBuf>,
    /// Take the model from a run config instead.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub population: Option<usize>,
    /// Worker threads for population evaluation; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<ControllerVariant>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

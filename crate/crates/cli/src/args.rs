use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "geozero", version, about = "Reward scoring, hard-sample mining, formatting and analysis pipelines")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config file; `GEOZERO_*` environment overrides apply on top.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Input JSON-lines file; `-` or absent reads standard input.
    #[arg(long, short, global = true)]
    pub input: Option<PathBuf>,
    /// Output file; `-` or absent writes standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Where the JSON run summary goes; standard error when absent.
    #[arg(long, global = true)]
    pub summary: Option<PathBuf>,
    /// Input lines that may fail before the run exits with status 2.
    #[arg(long, global = true, default_value_t = 0)]
    pub max_bad_lines: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score responses: one reward breakdown per input line.
    Score,
    /// Hard-sample mining.
    #[command(subcommand)]
    Mine(Mine),
    /// Wrap instructions with task descriptors, hints and system prompts.
    Format(FormatArgs),
    /// Thinking activation rate and metric/accuracy tables.
    Analyze(AnalyzeArgs),
    /// Train the toy policy and write the per-iteration history as CSV.
    TrainToy,
    /// Objective value, advantages and log-probability gradients per rollout group.
    Objective,
}

#[derive(Debug, Subcommand)]
pub enum Mine {
    /// Keep samples the filtering model got wrong.
    Stage1,
    /// Judge every trial and attach accuracy and difficulty.
    Stage2 {
        /// Trials expected per record.
        #[arg(long, default_value_t = geozero_core::mining::DEFAULT_TRIALS)]
        trials: usize,
    },
    /// Balanced, deduplicated top-quota per task.
    Select {
        /// Hard samples kept per task.
        #[arg(long)]
        quota: usize,
    },
    /// Drop raw manifest rows whose image is in the hard pool.
    Split {
        /// Hard pool (JSON-lines with `image_id`), e.g. the output of `mine select`.
        #[arg(long)]
        hard: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct FormatArgs {
    /// Directory of `sc.txt`, `vg.txt`, `vqa.txt` and `ic.txt` hint files; built-in hints when absent.
    #[arg(long)]
    pub hints_dir: Option<PathBuf>,
    /// Directory holding `system.txt` and `examples.txt`; built-in prompts when absent.
    #[arg(long)]
    pub prompts_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Binning {
    Quantile,
    Fixed,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Bins per metric.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = Binning::Quantile)]
    pub binning: Binning,
    /// Comma-separated metric names; all metrics when absent.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    /// Also write `binned_<metric>.csv` files and `summary.json` here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

mod args;
mod commands;
mod io;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::{Cli, Command};

/// Failures that end a run, grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl Failure {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Runtime(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Score => "score",
        Command::Mine(args::Mine::Stage1) => "mine stage1",
        Command::Mine(args::Mine::Stage2 { .. }) => "mine stage2",
        Command::Mine(args::Mine::Select { .. }) => "mine select",
        Command::Mine(args::Mine::Split { .. }) => "mine split",
        Command::Format(_) => "format",
        Command::Analyze(_) => "analyze",
        Command::TrainToy => "train-toy",
        Command::Objective => "objective",
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = &cli.common;
    let cfg = commands::load_config(common)?;
    let mut out = io::Output::open(common.output.as_deref())?;
    let outcome = match &cli.command {
        Command::TrainToy => commands::train_toy(&cfg, common.seed, &mut out)?,
        cmd => {
            let mut input = io::open_input(common.input.as_deref())?;
            let input = input.as_mut();
            match cmd {
                Command::Score => commands::score(&cfg, input, &mut out)?,
                Command::Mine(m) => commands::mine(m, input, &mut out)?,
                Command::Format(a) => commands::format(a, common.seed.unwrap_or(0), input, &mut out)?,
                Command::Analyze(a) => commands::analyze(&cfg, a, input, &mut out)?,
                Command::Objective => commands::objective_cmd(&cfg, input, &mut out)?,
                Command::TrainToy => unreachable!("handled above"),
            }
        }
    };
    out.finish()?;
    io::emit_summary(
        common.summary.as_deref(),
        &json!({
            "command": command_name(&cli.command),
            "lines": outcome.lines,
            "details": outcome.details,
        }),
    )?;
    match outcome.lines {
        Some(lines) if lines.bad > common.max_bad_lines => Err(Failure::Validation(format!(
            "{} of {} input lines failed (tolerance {})",
            lines.bad, lines.records, common.max_bad_lines
        ))),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

//! `earthtruth` command-line runner.
//!
//! Exit codes: 0 success, 1 data or processing error, 2 usage or config error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "earthtruth", version, about = "Event-camera star tracking scored against Earth-rotation ground truth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides `paths.output_dir`.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate events, PPS pulses and true attitude.
    Simulate(Common),
    /// Track attitude from events with the EKF.
    Track(Common),
    /// Plate-solve batch frames of events.
    Solve(Common),
    /// Build virtual-telescope ground truth from EOP and an anchoring estimate.
    Groundtruth(Common),
    /// Score an estimate series against ground truth.
    Evaluate(Common),
    /// simulate, track, solve, groundtruth and evaluate in order.
    Pipeline(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Simulate(c) => ("simulate", c),
            Command::Track(c) => ("track", c),
            Command::Solve(c) => ("solve", c),
            Command::Groundtruth(c) => ("groundtruth", c),
            Command::Evaluate(c) => ("evaluate", c),
            Command::Pipeline(c) => ("pipeline", c),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, common) = cli.command.parts();
    let mut loaded = match config::load(&common.config) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(dir) = &common.output_dir {
        loaded.config.paths.output_dir = dir.clone();
    }

    let mut run = commands::Run::new(&loaded);
    let result = match &cli.command {
        Command::Simulate(_) => run.simulate(),
        Command::Track(_) => run.track(),
        Command::Solve(_) => run.solve(),
        Command::Groundtruth(_) => run.groundtruth(),
        Command::Evaluate(_) => run.evaluate(loaded.config.evaluate.estimates),
        Command::Pipeline(_) => run.pipeline(),
    }
    .and_then(|()| {
        let manifest = loaded.config.paths.output_dir.join(format!("manifest_{name}.json"));
        run.log.write_manifest(&manifest, name, &loaded.path, &loaded.raw)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

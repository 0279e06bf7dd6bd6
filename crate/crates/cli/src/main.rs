mod cli;
mod commands;
mod manifest;
mod settings;

use std::process::ExitCode;

use calibkit::{parallel, Error};
use clap::Parser;

use cli::{Cli, Command};
use settings::Settings;

/// Exit status per error class; clap usage errors exit with 2 on their own.
fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => 2,
        Error::Parse { .. } | Error::UnsupportedVersion { .. } => 3,
        Error::Data(_)
        | Error::Domain { .. }
        | Error::Shape(_)
        | Error::DegenerateTarget(_)
        | Error::UndefinedCorrelation(_) => 4,
        Error::Integrator { .. } | Error::Divergence { .. } => 5,
        Error::Io(_) => 6,
        _ => 1,
    }
}

fn run(cli: &Cli) -> calibkit::Result<()> {
    let settings = Settings::resolve(cli.config.as_deref(), cli.seed, cli.jobs)?;
    if let Some(jobs) = settings.jobs {
        parallel::set_jobs(jobs);
    }
    match &cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a, &settings),
        Command::Doe(a) => commands::doe_cmd(a, &settings),
        Command::Sense(a) => commands::sense_cmd(a, &settings),
        Command::Pca(a) => commands::pca_cmd(a, &settings),
        Command::Train(a) => commands::train_cmd(a, &settings),
        Command::Calibrate(a) => commands::calibrate_cmd(a, &settings),
        Command::Identify(a) => commands::identify_cmd(a, &settings),
        Command::Direct(a) => commands::direct_cmd(a, &settings),
        Command::Report(a) => commands::report_cmd(a, &settings),
        Command::Pipeline(a) => commands::pipeline_cmd(a, &settings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

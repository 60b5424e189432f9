//! `vscbench`: one binary for rendering, exemplar selection, evaluation,
//! ablation sweeps and the expert annotation study.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 partial
//! run (some requests ended in transport errors).

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use crate::args::{Cli, Command};
use crate::commands::Outcome;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(&cli.log));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Render(a) => commands::render(a),
        Command::Exemplars(a) => commands::exemplars(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Serve(a) => commands::serve(a),
        Command::StudyReport(a) => commands::study_report(a),
        Command::Audit(a) => commands::audit(a),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(n)) => {
            eprintln!("warning: {n} request(s) ended in transport errors");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}


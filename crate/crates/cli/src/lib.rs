//! Command-line front end for `ctpt-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod report;
pub mod runner;

pub use error::{CliError, CliResult};

pub fn run(cli: cli::Cli) -> CliResult<()> {
    use cli::Command;
    match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Mediate(a) => commands::mediate(a),
        Command::Compare(a) => commands::compare(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Dist(a) => commands::dist(&a.op),
    }
}

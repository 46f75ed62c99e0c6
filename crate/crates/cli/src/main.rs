use std::process::ExitCode;

use cellwatch_cli::commands::{self, Cli, Command};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Run(args) => commands::run(&args).map(|state| print!("{}", cellwatch_cli::report::summary(&state))),
        Command::Report(args) => commands::report(&args).map(|text| print!("{text}")),
        Command::Serve(args) => commands::serve_state(&args).and_then(|(state, store)| {
            tokio::runtime::Runtime::new()?.block_on(cellwatch_cli::service::serve(state, store, args.port))
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", commands::error_report(&err));
            ExitCode::from(2)
        }
    }
}

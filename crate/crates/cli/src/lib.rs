//! The `clicksel` command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage error, 3 missing or
//! unreadable file, 4 invalid input data, 5 invalid parameter.

pub mod args;
pub mod commands;
pub mod error;

pub use args::{Cli, Command};
pub use commands::Globals;
pub use error::{exit, CliError, CliResult};

/// Runs one parsed command inside a thread pool sized by `--threads`.
pub fn run(cli: &Cli) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Other(format!("cannot start thread pool: {e}")))?;
    let globals = Globals { seed: cli.seed };
    pool.install(|| match &cli.command {
        Command::Synth(a) => commands::synth(a, globals).map(drop),
        Command::Split(a) => commands::split_cmd(a, globals).map(drop),
        Command::Sample(a) => commands::sample(a, globals).map(drop),
        Command::Train(a) => commands::train(a, globals).map(drop),
        Command::Segment(a) => commands::segment(a, globals).map(drop),
        Command::Evaluate(a) => {
            let outcome = commands::evaluate(a, globals)?;
            print!("{}", outcome.report.to_text_table());
            if let Some(sel) = outcome.selection {
                println!("lambda selected on {}: {}", sel.split, sel.chosen);
            }
            Ok(())
        }
        Command::Serve(a) => commands::serve(a, globals),
    })
}

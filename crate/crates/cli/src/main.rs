mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use output::CliError;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&CliError::Usage(clap_message(&e))),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return report(&CliError::Usage(format!("cannot set thread count: {e}")));
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => commands::synth(cli, a),
        Command::Cluster(a) => commands::cluster(cli, a),
        Command::Density(a) => commands::density(cli, a),
        Command::Dbs(a) => commands::dbs(cli, a),
        Command::Anova(a) => commands::anova(cli, a),
        Command::Agree(a) => commands::agree(cli, a),
        Command::Temporal(a) => commands::temporal(cli, a),
        Command::Correlate(a) => commands::correlate(cli, a),
    }
}

/// First line of a clap error without its `error: ` prefix.
fn clap_message(e: &clap::Error) -> String {
    let text = e.to_string();
    let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
    line.trim_start_matches("error: ").trim().to_string()
}

fn report(e: &CliError) -> ExitCode {
    let message = e.to_string().replace(['\n', '\t'], " ");
    eprintln!("error\t{}\t{}", e.kind(), message);
    ExitCode::from(e.exit_code())
}

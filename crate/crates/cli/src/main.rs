mod args;
mod commands;
mod output;
mod settings;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};
use settings::Settings;

fn run(cli: &Cli) -> Result<()> {
    let s = Settings::resolve(&cli.flags)?;
    let outputs = match cli.command {
        Command::Label => vec![commands::label(&s)?],
        Command::Evaluate => vec![commands::evaluate_cmd(&s)?],
        Command::Backtest => vec![commands::backtest(&s)?],
        Command::Sweep => vec![commands::sweep(&s)?],
        Command::Report => commands::full_report(&s)?,
        Command::Score => vec![commands::score(&s)?],
    };
    output::emit(&outputs, s.format, s.out.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

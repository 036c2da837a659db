mod cli;
mod commands;
mod io;

use std::panic;
use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};
use io::Failure;

fn configure_threads() {
    let Ok(v) = std::env::var("OGE_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("oge: ignoring OGE_THREADS={v:?} (expected a positive integer)"),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let c = &cli.common;
    if c.folds < 2 && matches!(cli.command, Command::Train(_) | Command::Roc(_)) {
        return Err(Failure::Usage("--folds must be at least 2".into()));
    }
    match &cli.command {
        Command::Extract(a) => commands::extract(c, a),
        Command::Metrics(a) => commands::metrics(c, a),
        Command::Train(a) => commands::train_cmd(c, a),
        Command::Predict(a) => commands::predict_cmd(c, a),
        Command::Roc(a) => commands::roc_cmd(c, a),
        Command::Synth(a) => commands::synth(c, a),
        Command::Falsecolor(a) => commands::falsecolor(c, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    configure_threads();
    match panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("oge {}: {f}", cli.command.name());
            ExitCode::from(f.exit_code())
        }
        Err(_) => ExitCode::from(3),
    }
}

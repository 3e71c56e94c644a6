//! `tailcross` command-line front end.

mod args;
mod commands;
mod config;
mod error;
mod input;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Context;
use error::{CliError, Result};

fn context(common: &args::Common, argv: Vec<String>) -> Result<Context> {
    let parallelism = match common.parallelism {
        Some(0) => return Err(CliError::usage("--parallelism must be positive")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(Context {
        seed: config::resolve_seed(common.seed)?,
        parallelism,
        argv,
    })
}

fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    let pool = |ctx: &Context| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(ctx.parallelism)
            .build()
            .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))
    };
    match cli.command {
        Command::Estimate(a) => {
            let a = config::layer(&a, a.common.config.as_deref())?;
            let ctx = context(&a.common, argv)?;
            pool(&ctx)?
                .install(|| commands::estimate::run(&a, &ctx))
                .map(drop)
        }
        Command::Simulate(a) => {
            let a = config::layer(&a, a.common.config.as_deref())?;
            let ctx = context(&a.common, argv)?;
            pool(&ctx)?
                .install(|| commands::simulate::run(&a, &ctx))
                .map(drop)
        }
        Command::Experiment(a) => {
            let a = config::layer(&a, a.common.config.as_deref())?;
            let ctx = context(&a.common, argv)?;
            pool(&ctx)?
                .install(|| commands::experiment::run(&a, &ctx))
                .map(drop)
        }
        Command::Plot(a) => {
            let a = config::layer(&a, a.common.config.as_deref())?;
            let ctx = context(&a.common, argv)?;
            commands::plot::run(&a, &ctx)
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

mod args;
mod commands;
mod config;
mod manifest;
mod svg;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command};
use config::Globals;

fn dataset_len(path: Option<&std::path::Path>) -> Result<usize> {
    let path = path.context("missing --data <dataset.csv>")?;
    Ok(dmdn::channel::Dataset::read_csv(path)
        .with_context(|| format!("loading dataset {}", path.display()))?
        .len())
}

fn run(cli: Cli) -> Result<bool> {
    let file = config::read_file_config(cli.config.as_deref())?;
    let g = Globals {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        out: cli.out.clone().or_else(|| file.out.clone()),
        paper_scale: cli.paper_scale || file.paper_scale.unwrap_or(false),
    };
    let done = match &cli.command {
        Command::Generate(a) => {
            let a = config::merge_generate(a, &file.generate);
            commands::run_generate(&config::resolve_generate(&a, &g)?)?
        }
        Command::Train(a) => {
            let a = config::merge_train(a, &file.train);
            let n = dataset_len(a.data.as_deref())?;
            commands::run_train(&config::resolve_train(&a, &g, n)?)?
        }
        Command::Transfer(a) => {
            let a = config::merge_transfer(a, &file.transfer);
            let n = dataset_len(a.train.data.as_deref())?;
            commands::run_transfer(&config::resolve_transfer(&a, &g, n)?)?
        }
        Command::Eval(a) => {
            let a = config::merge_eval(a, &file.eval);
            let s = config::resolve_eval(a.model.as_deref(), a.data.as_deref(), &a.kde, &g)?;
            commands::run_eval(&s)?
        }
        Command::Plot(a) => {
            let a = config::merge_plot(a, &file.plot);
            commands::run_plot(&config::resolve_plot(&a, &g)?)?
        }
        Command::Replay(a) => {
            let r = commands::replay(&a.manifest, g.out.as_deref())?;
            for m in &r.mismatches {
                eprintln!("mismatch: {m}");
            }
            println!("replayed {} -> {}", a.manifest.display(), r.done.manifest_path.display());
            if r.mismatches.is_empty() {
                println!("all {} outputs identical", r.done.manifest.outputs.len());
            }
            return Ok(r.mismatches.is_empty());
        }
    };
    for n in &done.manifest.notes {
        println!("{n}");
    }
    println!("manifest: {}", done.manifest_path.display());
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

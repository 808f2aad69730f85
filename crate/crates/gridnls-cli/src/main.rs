//! `gridnls`: runs one experiment described by a TOML file.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use run::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "gridnls",
    version,
    about = "Ground states of NLS energies on metric grids"
)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `out` in the config, then `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, capped at the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for randomized starts and property checks.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut out = args.out.clone();
    let result = run::load(&args.config).and_then(|mut cfg| {
        if let Some(w) = args.workers {
            cfg.workers = w;
        }
        if args.seed.is_some() {
            cfg.seed = args.seed;
        }
        let out_dir = out
            .get_or_insert_with(|| cfg.out.clone().unwrap_or_else(|| "out".into()))
            .clone();
        run::execute(&run::resolve(cfg), &out_dir)
    });
    match result {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string(&summary["pass"]).unwrap_or_default()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = e.record();
            eprintln!("{record}");
            if let Some(dir) = out.filter(|d| d.is_dir()) {
                let _ = std::fs::write(dir.join("error.json"), format!("{record:#}\n"));
            }
            ExitCode::from(match e {
                CliError::Parse(_) | CliError::Invalid(_) => 2,
                _ => 1,
            })
        }
    }
}

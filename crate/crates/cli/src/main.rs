use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixlimit_cli::{check_config, load_config, presets, report_stem, run_config, write_outputs, CliError, RunResult};

#[derive(Parser)]
#[command(name = "mixlimit", version, about = "Monte Carlo checks of distributional limit theorems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for reports.
    #[arg(long, global = true, default_value = "reports")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also write the normalised samples as CSV.
    #[arg(long, global = true)]
    dump_samples: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file or `preset/<name>`.
    Run { path: String },
    /// Run the hypothesis diagnostics for the config's system and cocycle.
    Check { path: String },
    /// List the embedded presets.
    Presets,
}

fn execute(cli: &Cli) -> Result<RunResult, CliError> {
    let (path, check) = match &cli.command {
        Command::Run { path } => (path, false),
        Command::Check { path } => (path, true),
        Command::Presets => unreachable!(),
    };
    let mut cfg = load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let result = if check { check_config(&cfg, cli.workers)? } else { run_config(&cfg, cli.workers)? };
    let stem = report_stem(path);
    let stem = if check { format!("{stem}.check") } else { stem };
    for p in write_outputs(&result, &cli.out, &stem, cli.dump_samples)? {
        println!("wrote {}", p.display());
    }
    Ok(result)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Presets = cli.command {
        for (name, _) in presets::PRESETS {
            println!("preset/{name}");
        }
        return ExitCode::SUCCESS;
    }
    match execute(&cli) {
        Ok(result) => {
            let d = &result.document;
            println!("{} seed={} pass={}", d.experiment.name(), d.seed, d.pass);
            for note in &d.notes {
                println!("note: {note}");
            }
            ExitCode::from(result.status().code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status().code() as u8)
        }
    }
}

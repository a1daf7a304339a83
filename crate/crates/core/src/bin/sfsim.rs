use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sfsim_core::harness::{run_scenario_traced, Scenario};
use sfsim_core::{run_scenario, Error};

#[derive(Parser)]
#[command(name = "sfsim", version, about = "Multi-PHY synchronous flooding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and print or write its report.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<u32>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write every node's per-slot log as NDJSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ScenarioInvalid(_) | Error::Parse(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let Command::Run {
        scenario,
        seed,
        replicas,
        format,
        out,
        trace,
    } = cli.command;

    let mut sc = Scenario::from_path(&scenario)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(r) = replicas {
        sc.replicas = r;
    }

    let report = match trace {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            let report = run_scenario_traced(&sc, &mut w)?;
            w.flush()?;
            report
        }
        None => run_scenario(&sc)?,
    };

    let body = match format {
        Format::Json => report.to_json()? + "\n",
        Format::Csv => report.to_csv()?,
    };
    match out {
        Some(path) => std::fs::write(path, body)?,
        None => io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}

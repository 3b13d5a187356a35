use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use freefrac::harness::{run_scenario, write_outputs, Format, ResultRow, Scenario, ScenarioConfig};
use freefrac::Result;

#[derive(Parser)]
#[command(name = "freefrac", version, about = "Finite-k dimension estimates for matricial microstate spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON scenario config; the built-in defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutFormat,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Packing-dimension estimate for one selfadjoint law.
    DimSingle(RunArgs),
    /// Orbit dimension ratios for a finite-dimensional algebra.
    DimAlgebra(RunArgs),
    /// Joint versus marginal estimates for freely independent laws.
    Additivity(RunArgs),
    /// Comparison of a law with its image under an injective polynomial.
    Invariance(RunArgs),
    /// Checks that orbit points at prescribed distances are reachable.
    BallDiameter(RunArgs),
    /// Closed-form constants against their oracles.
    Formulas(RunArgs),
}

fn resolve(scenario: Scenario, args: &RunArgs) -> Result<ScenarioConfig> {
    let mut c = match &args.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default_for(scenario),
    };
    if c.scenario != scenario {
        return Err(freefrac::Error::Config(format!("config is for {}, not {scenario}", c.scenario)));
    }
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(o) = &args.out {
        c.output = Some(o.clone());
    }
    Ok(c)
}

fn finish<R: Serialize>(c: &ScenarioConfig, args: &RunArgs, rows: &[ResultRow], report: &R) -> Result<()> {
    let format = match args.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    println!("{}", serde_json::to_string_pretty(report)?);
    if let Some(dir) = &c.output {
        let m = write_outputs(dir, c, rows, report, format)?;
        eprintln!("wrote {} files to {}", m.files.len(), dir.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (scenario, args) = match &cli.command {
        Command::DimSingle(a) => (Scenario::DimSingle, a),
        Command::DimAlgebra(a) => (Scenario::DimAlgebra, a),
        Command::Additivity(a) => (Scenario::Additivity, a),
        Command::Invariance(a) => (Scenario::Invariance, a),
        Command::BallDiameter(a) => (Scenario::BallDiameter, a),
        Command::Formulas(a) => (Scenario::Formulas, a),
    };
    let c = resolve(scenario, args)?;
    if args.print_config {
        println!("{}", c.to_json());
        return Ok(());
    }
    let (report, rows) = run_scenario(&c)?;
    finish(&c, args, &rows, &report)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

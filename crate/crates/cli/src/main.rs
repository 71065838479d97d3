use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use noma_sec_core::config::{parse_config, ScenarioConfig};
use noma_sec_core::experiment::{detail_path, parse_list, run_experiment, Case, ExperimentSpec, Metric};

#[derive(Parser)]
#[command(name = "noma-sec", version, about = "Secrecy-rate experiments for clustered MISO-NOMA downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write the averaged results as CSV.
    Run(RunArgs),
    /// List the built-in experiments.
    Presets,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file with `key=value` lines; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in experiment name or path to an experiment file.
    #[arg(long)]
    experiment: String,
    /// Master seed; realization `i` uses `seed + i`.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write per-realization rows to `<stem>_detail.csv`.
    #[arg(long)]
    detail: bool,
    /// Comma-separated subset of lower,upper,oma.
    #[arg(long)]
    cases: Option<String>,
    /// Comma-separated subset of mmsr,mssr.
    #[arg(long)]
    metrics: Option<String>,
    /// Override the number of realizations per sweep point.
    #[arg(long)]
    realizations: Option<usize>,
}

fn load_spec(args: &RunArgs) -> Result<ExperimentSpec> {
    let base = match &args.config {
        Some(path) => parse_config(path)?,
        None => ScenarioConfig::default(),
    };
    let mut spec = match ExperimentSpec::preset(&args.experiment, base.clone()) {
        Some(spec) => spec,
        None => {
            let path = PathBuf::from(&args.experiment);
            if !path.exists() {
                bail!(
                    "'{}' is neither a built-in experiment ({}) nor a file",
                    args.experiment,
                    ExperimentSpec::PRESETS.join(", ")
                );
            }
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentSpec::parse(&text, base).with_context(|| format!("in {}", path.display()))?
        }
    };
    spec.master_seed = args.seed;
    if let Some(cases) = &args.cases {
        spec.cases = parse_list::<Case>(cases).map_err(anyhow::Error::msg)?;
    }
    if let Some(metrics) = &args.metrics {
        spec.metrics = parse_list::<Metric>(metrics).map_err(anyhow::Error::msg)?;
    }
    if let Some(n) = args.realizations {
        spec.n_realizations = n;
    }
    spec.validate()?;
    Ok(spec)
}

fn run(args: &RunArgs) -> Result<()> {
    let spec = load_spec(args)?;
    let summary = run_experiment(&spec, &args.out, args.detail)?;
    println!("wrote {} rows to {}", summary.len(), args.out.display());
    if args.detail {
        println!("wrote details to {}", detail_path(&args.out).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Presets => {
            for name in ExperimentSpec::PRESETS {
                let spec = ExperimentSpec::preset(name, ScenarioConfig::default()).expect("preset exists");
                let values: Vec<String> = spec.values.iter().map(f64::to_string).collect();
                println!("{name:12} {} = {}", spec.sweep, values.join(","));
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

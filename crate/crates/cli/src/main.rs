use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use relay_wmmse::sim::{self, presets, Execution, ExperimentSpec};
use relay_wmmse::Scheme;

/// Monte-Carlo sum-rate experiments for MIMO relay broadcast precoding.
#[derive(Parser, Debug)]
#[command(name = "relay-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment from a TOML spec file or a preset name.
    Run(RunArgs),
    /// Inspect the shipped experiment presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand, Debug)]
enum PresetAction {
    /// Print the preset names.
    List,
    /// Print a preset's TOML source.
    Show { name: String },
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Spec file, or the name of a preset.
    spec: String,
    /// Override the base seed; realization r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of realizations per sweep point.
    #[arg(long)]
    realizations: Option<usize>,
    /// Rows CSV path; summary, metadata and trace files go next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of wmmse, mrc_mrt, mrc_rzf.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Worker threads: 1 runs sequentially, 0 uses every core.
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
    /// Do not print the summary table.
    #[arg(long)]
    quiet: bool,
}

fn load_spec(arg: &str) -> anyhow::Result<ExperimentSpec> {
    let path = PathBuf::from(arg);
    if path.exists() {
        return ExperimentSpec::from_file(&path).with_context(|| format!("reading spec {}", path.display()));
    }
    match presets::load(arg) {
        Some(spec) => Ok(spec?),
        None => bail!("{arg} is neither a spec file nor a preset (see `relay-sim presets list`)"),
    }
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let mut spec = load_spec(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    if let Some(n) = args.realizations {
        spec.realizations = n;
    }
    if let Some(schemes) = args.schemes {
        spec.schemes = schemes;
    }
    if let Some(out) = args.out {
        spec.output = Some(out);
    }
    let out = spec.output.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", spec.name)));
    spec.validate()?;

    let start = Instant::now();
    let output = sim::run_experiment(&spec, Execution::from_threads(args.parallelism))?;
    let (paths, summary) = sim::write_outputs(&spec, &output, &out)?;
    let elapsed = start.elapsed();

    if !args.quiet {
        println!("{:>12}  {:>8}  {:>10}  {:>10}  {:>6}  {:>6}", "sweep", "scheme", "mean", "stderr", "ok", "failed");
        for s in &summary {
            println!(
                "{:>12}  {:>8}  {:>10.4}  {:>10.4}  {:>6}  {:>6}",
                sim::format_sig12(s.sweep_value),
                s.scheme.name(),
                s.mean_sum_rate,
                s.std_error,
                s.successes,
                s.failures
            );
        }
        println!("rows: {}", paths.rows.display());
        println!("summary: {}", paths.summary.display());
        if let Some(t) = &paths.traces {
            println!("trace: {}", t.display());
        }
        println!("elapsed: {:.2} s", elapsed.as_secs_f64());
    }

    let empty: Vec<_> = summary.iter().filter(|s| s.successes == 0).collect();
    if !empty.is_empty() {
        for s in &empty {
            eprintln!(
                "no successful realization for {} at {}",
                s.scheme.name(),
                sim::format_sig12(s.sweep_value)
            );
        }
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Presets { action } => match action {
            PresetAction::List => {
                for name in presets::names() {
                    println!("{name}");
                }
                Ok(ExitCode::SUCCESS)
            }
            PresetAction::Show { name } => match presets::source(&name) {
                Some(text) => {
                    print!("{text}");
                    Ok(ExitCode::SUCCESS)
                }
                None => Err(anyhow::anyhow!("unknown preset {name}")),
            },
        },
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

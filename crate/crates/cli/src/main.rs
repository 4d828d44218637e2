use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lateral_ehgo::report::{compare, load_metrics};
use lateral_ehgo::runner::{execute, RunManifest, RunSummary, ScenarioSource, SweepAxis};
use lateral_ehgo::Error;

/// Closed-loop path-following simulations: single runs, parameter sweeps,
/// cross-run reports and scenario validation.
#[derive(Parser)]
#[command(name = "lateral-ehgo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Output root; one subdirectory per run
    #[arg(long, env = "LATERAL_EHGO_OUT", default_value = "runs")]
    out: PathBuf,
    /// Override every scenario's noise seed
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the SVG plots
    #[arg(long)]
    no_plots: bool,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios (TOML files or preset names)
    Run {
        #[arg(required = true)]
        scenarios: Vec<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Run every combination of the swept parameters
    Sweep {
        #[arg(required = true)]
        scenarios: Vec<String>,
        /// Axis as name=v1,v2,... (repeatable), e.g. epsilon=0.02,0.01,0.005
        #[arg(long = "param", short = 'p', required = true)]
        params: Vec<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Compare completed runs against the first one
    Report {
        /// Run directories or metrics.json files
        runs: Vec<PathBuf>,
        /// Compare runs even if their step or horizon differ
        #[arg(long)]
        allow_mismatch: bool,
        /// Print JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Load and check scenarios without running them
    Validate {
        #[arg(required = true)]
        scenarios: Vec<String>,
        /// Print the fully resolved scenario
        #[arg(long)]
        echo: bool,
    },
}

/// Runs aborted or failed a check.
const EXIT_RUN_FAILED: u8 = 1;
/// Bad arguments, unreadable or invalid input.
const EXIT_USAGE: u8 = 2;

fn seconds(t: Option<f64>) -> String {
    t.map_or_else(|| "never".into(), |t| format!("{t:.3} s"))
}

fn print_summary(summary: &RunSummary) {
    for p in &summary.points {
        let m = &p.metrics;
        let status = if let Some(reason) = &p.abort_reason {
            format!("ABORTED ({reason})")
        } else if !p.failed_checks.is_empty() {
            format!("CHECK FAILED ({})", p.failed_checks.join("; "))
        } else {
            "ok".into()
        };
        println!(
            "{status:<8} {}  rms|z1| {:.4e}  e_h1 {}  e_h3 {}  -> {}",
            p.name,
            m.rms_z1,
            seconds(m.e_h1_convergence),
            seconds(m.e_h3_convergence),
            p.dir.display()
        );
    }
}

fn run(scenarios: &[String], sweeps: Vec<SweepAxis>, output: Output) -> Result<ExitCode, Error> {
    let manifest = RunManifest {
        scenarios: scenarios.iter().map(|s| ScenarioSource::parse(s)).collect(),
        out_dir: output.out,
        sweeps,
        plots: !output.no_plots,
        seed: output.seed,
        jobs: output.jobs,
    };
    let summary = execute(&manifest)?;
    print_summary(&summary);
    Ok(if summary.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUN_FAILED)
    })
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { scenarios, output } => run(&scenarios, Vec::new(), output),
        Command::Sweep {
            scenarios,
            params,
            output,
        } => {
            let sweeps = params
                .iter()
                .map(|p| SweepAxis::parse(p))
                .collect::<Result<_, _>>()?;
            run(&scenarios, sweeps, output)
        }
        Command::Report {
            runs,
            allow_mismatch,
            json,
        } => {
            let loaded = runs
                .iter()
                .map(|p| {
                    let label = p
                        .file_name()
                        .filter(|_| p.is_dir())
                        .or_else(|| p.parent().and_then(|d| d.file_name()))
                        .map_or_else(
                            || p.display().to_string(),
                            |n| n.to_string_lossy().into_owned(),
                        );
                    load_metrics(p).map(|m| (label, m))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let table = compare(&loaded, allow_mismatch)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&table)?);
            } else {
                print!("{}", table.to_text());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { scenarios, echo } => {
            for arg in &scenarios {
                let s = ScenarioSource::parse(arg).load()?;
                if echo {
                    print!("{}", s.to_toml_string()?);
                } else {
                    println!("ok {arg} ({}, {} steps)", s.name, s.steps());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

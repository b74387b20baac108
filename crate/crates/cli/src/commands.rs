//! Command-line parsing and dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use cdg_core::checkers::{run_check, CheckConfig, Property, Verdict};
use clap::{Args, Parser, Subcommand};

use crate::demos::{demo, demo_names};
use crate::error::CliError;
use crate::output::{ensure_dir, write_json};
use crate::runner::{run_scenario, sweep, RunOptions, RunSummary, Status};
use crate::scenario::Scenario;
use crate::specs::{model_from_spec, MODEL_SPECS};

#[derive(Debug, Parser)]
#[command(name = "cdg", version, about = "Simulate and check edge-density dynamics on directed graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a scenario and run its analyses.
    Run(RunArgs),
    /// Sample one property of a named model.
    Check(CheckArgs),
    /// Run a randomized scenario many times and aggregate.
    Sweep(SweepArgs),
    /// Run a built-in scenario.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Seed for random draws and checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample count for property checks.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Tolerance for property checks.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Model spec, one of: linear:demo, linear:planted, linear:offset,
    /// ratio:n<k>, ratio:two-block, ratio:severed, laplacian:n<k>.
    #[arg(long)]
    pub model: String,
    /// gs, strong-gs, class-n, homogeneity, a5, lemma1 or equilibria-scan.
    #[arg(long)]
    pub property: String,
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Directory for the report; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub runs: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep trajectory CSVs and plots for every run.
    #[arg(long)]
    pub keep_artifacts: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Demo name; omit with --list.
    pub name: Option<String>,
    #[arg(long)]
    pub list: bool,
    /// Defaults to out/<name>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

impl Overrides {
    fn options(&self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            samples: self.samples,
            tol: self.tol,
            artifacts: true,
        }
    }
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(a) => {
            let scenario = Scenario::from_path(&a.scenario)?;
            finish_run(&scenario, &a.out, &a.overrides.options())
        }
        Command::Demo(a) => {
            if a.list {
                for name in demo_names() {
                    println!("{name}");
                }
                return Ok(());
            }
            let Some(name) = a.name else {
                return Err(CliError::Usage(format!(
                    "demo needs a name (available: {})",
                    demo_names().join(", ")
                )));
            };
            let scenario = demo(&name)?;
            let out = a.out.unwrap_or_else(|| Path::new("out").join(&name));
            finish_run(&scenario, &out, &a.overrides.options())
        }
        Command::Check(a) => check(a),
        Command::Sweep(a) => {
            let scenario = Scenario::from_path(&a.scenario)?;
            let opts = RunOptions {
                artifacts: a.keep_artifacts,
                ..a.overrides.options()
            };
            let rep = sweep(&scenario, a.runs, &a.out, &opts)?;
            println!(
                "{}: {}/{} passed, {} failed, {} errored; wrote {}",
                rep.scenario,
                rep.passed,
                rep.runs,
                rep.failed,
                rep.errored,
                a.out.join("sweep.json").display()
            );
            if rep.passed == rep.runs {
                Ok(())
            } else {
                Err(CliError::Analysis(format!(
                    "{} of {} runs did not pass",
                    rep.runs - rep.passed,
                    rep.runs
                )))
            }
        }
    }
}

fn finish_run(scenario: &Scenario, out: &Path, opts: &RunOptions) -> Result<(), CliError> {
    let summary = run_scenario(scenario, out, 0, opts)?;
    report(&summary);
    println!("wrote {}", out.display());
    let failed = summary.failures();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Analysis(format!("analysis failed: {}", failed.join(", "))))
    }
}

fn report(summary: &RunSummary) {
    for a in &summary.analyses {
        let tag = match a.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Computed => "info",
        };
        println!("{tag:>4}  {}", a.name);
    }
}

fn check(a: CheckArgs) -> Result<(), CliError> {
    let property: Property = a.property.parse().map_err(|e: cdg_core::Error| CliError::Usage(e.to_string()))?;
    let model = model_from_spec(&a.model).map_err(|e| match e {
        CliError::Core(c) => CliError::Usage(format!("{c} (known: {MODEL_SPECS})")),
        other => other,
    })?;
    let cfg = CheckConfig {
        samples: a.samples,
        seed: a.seed,
        tol: a.tol,
        ..CheckConfig::default()
    };
    let rep = run_check(&model, property, &cfg)?;
    match &a.out {
        Some(dir) => {
            ensure_dir(dir)?;
            let path = dir.join(format!("check-{}.json", property));
            write_json(&path, &rep)?;
            println!("{} on {}: {} (wrote {})", property, a.model, rep.verdict, path.display());
        }
        None => println!("{}", rep.to_json()),
    }
    if rep.verdict == Verdict::Fail {
        Err(CliError::Analysis(format!(
            "{} fails for {} ({} violations)",
            property, a.model, rep.violation_count
        )))
    } else {
        Ok(())
    }
}

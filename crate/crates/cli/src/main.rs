//! `mmg-sim`: run, sweep, plot and validate multi-microgrid scenarios.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numeric fault during a run.

mod plot;
mod sweep;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmg_core::metrics::{summarize, SimulationTrace};
use mmg_core::scenario::{self, ScenarioConfig};
use mmg_core::sim::{self, SimError};

#[derive(Parser)]
#[command(name = "mmg-sim", version, about = "Islanded multi-microgrid unbalance compensation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trace and summary.
    Run(RunArgs),
    /// Run a scenario once per value of one parameter and collect the summaries.
    Sweep(SweepArgs),
    /// Draw trace channels as an SVG line chart.
    Plot(PlotArgs),
    /// Check a scenario and print plausibility warnings.
    Validate(ScenarioArgs),
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario file; the bundled reference scenario when omitted.
    #[arg(value_name = "SCENARIO", conflicts_with = "scenario")]
    path: Option<PathBuf>,
    /// Same as the positional scenario argument.
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Override a scenario value, e.g. `--set control.n_r=0.05`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Artifacts to write.
    #[arg(long, value_delimiter = ',', default_value = "csv,json")]
    emit: Vec<Emit>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override key to vary, e.g. `control.d_r`.
    #[arg(long)]
    param: String,
    /// Comma-separated values, each applied as `<param>=<value>`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 0..)]
    values: Vec<String>,
}

#[derive(Args)]
struct PlotArgs {
    /// Trace CSV written by `run`.
    #[arg(long)]
    trace: PathBuf,
    /// Comma-separated channel names.
    #[arg(long, value_delimiter = ',', required = true)]
    channels: Vec<String>,
    #[arg(long, default_value = "plot.svg")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Csv,
    Json,
    Svg,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub(crate) enum Failure {
    Invalid(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(m) | Failure::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e.exit_code() {
            3 => Failure::Numeric(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

pub(crate) fn io_failure(path: &Path, e: impl fmt::Display) -> Failure {
    Failure::Invalid(format!("{}: {e}", path.display()))
}

pub(crate) fn load(args: &ScenarioArgs, extra: &[String]) -> Result<ScenarioConfig, Failure> {
    let overrides: Vec<String> = args.overrides.iter().chain(extra).cloned().collect();
    let cfg = match args.scenario.as_ref().or(args.path.as_ref()) {
        Some(path) => scenario::load_scenario_with(path, &overrides),
        None => scenario::parse_scenario(scenario::DEFAULT_TABLE1, &overrides),
    };
    cfg.map_err(|e| Failure::Invalid(e.to_string()))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let cfg = load(&args.scenario, &[])?;
    for w in scenario::validate_physics(&cfg) {
        eprintln!("warning: {w}");
    }
    let trace = sim::run(&cfg)?;
    let summary = if args.emit.contains(&Emit::Json) {
        Some(summarize(&trace, &cfg).map_err(|e| Failure::Invalid(format!("summary: {e}")))?)
    } else {
        None
    };
    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    if args.emit.contains(&Emit::Csv) {
        write_file(&args.out.join("trace.csv"), trace.to_csv_string().as_bytes())?;
    }
    if let Some(s) = summary {
        write_file(&args.out.join("summary.json"), format!("{}\n", s.to_json()).as_bytes())?;
    }
    if args.emit.contains(&Emit::Svg) {
        emit_plots(&trace, &args.out)?;
    }
    println!("{}: {} samples written to {}", cfg.name, trace.len(), args.out.display());
    Ok(())
}

fn emit_plots(trace: &SimulationTrace, out: &Path) -> Result<(), Failure> {
    let sets: [(&str, &[&str]); 2] = [("pcc_voltage.svg", &["v_pcc_a", "v_pcc_b", "v_pcc_c"]), ("vuf.svg", &["vuf_pcc"])];
    for (file, channels) in sets {
        let series: Vec<plot::Series> = channels
            .iter()
            .filter_map(|c| trace.channel(c).map(|v| plot::Series { name: c.to_string(), values: v.to_vec() }))
            .collect();
        if series.is_empty() {
            continue;
        }
        let svg = plot::render(&trace.time, &series);
        write_file(&out.join(file), svg.as_bytes())?;
    }
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<(), Failure> {
    let table = plot::read_trace(&args.trace)?;
    let series = table.select(&args.channels)?;
    write_file(&args.out, plot::render(&table.time, &series).as_bytes())?;
    println!("{} series written to {}", series.len(), args.out.display());
    Ok(())
}

fn cmd_validate(args: ScenarioArgs) -> Result<(), Failure> {
    let cfg = load(&args, &[])?;
    let warnings = scenario::validate_physics(&cfg);
    for w in &warnings {
        println!("warning: {w}");
    }
    println!("{}: valid ({} warning{})", cfg.name, warnings.len(), if warnings.len() == 1 { "" } else { "s" });
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => sweep::cmd_sweep(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

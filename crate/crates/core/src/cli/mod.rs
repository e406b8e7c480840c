//! Command-line front end: `solve`, `analyze`, `sweep` and `presets`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 every
//! requested analysis failed.

pub mod config;
pub mod run;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{AnalysisDoc, FieldDoc, GridDoc, Oracle, Problem, ProblemDoc, RunConfig, PRESETS};
pub use run::{analyze, convergence_table, prepare, Level, RunReport, SolveRecord, VERSION};

use crate::error::{Error, Result};
use crate::fields::field_to_csv;
use crate::io::write_atomic;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_ANALYSIS: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "obstakl", version, about = "Obstacle-problem solver and free-boundary measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Config file, or the name of a built-in preset.
    config: String,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Refinement level to run (`n · 2^level` cells per axis).
    #[arg(long, default_value_t = 0)]
    level: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve and write u.csv and diagnostics.json.
    Solve(RunArgs),
    /// Solve (or load) and write report.json plus per-analysis CSV tables.
    Analyze(RunArgs),
    /// Solve and analyze on every refinement level; writes convergence.csv.
    Sweep {
        config: String,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Built-in configurations.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Debug, Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

/// Loads `arg` as a file, falling back to a preset of that name.
/// Returns the config and the directory relative paths resolve against.
pub fn load_config(arg: &str) -> Result<(RunConfig, PathBuf)> {
    let path = Path::new(arg);
    if path.is_file() {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        return Ok((RunConfig::from_file(path)?, base));
    }
    if PRESETS.iter().any(|p| p.name == arg) {
        return Ok((RunConfig::preset(arg)?, PathBuf::from(".")));
    }
    Err(Error::Config(format!("cannot read {arg}: no such file or preset")))
}

fn exit_code(e: &Error) -> i32 {
    if e.is_solver_failure() {
        EXIT_SOLVER
    } else {
        EXIT_CONFIG
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("OBSTAKL_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn json<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn write_solve_outputs(dir: &Path, level: &Level) -> Result<()> {
    write_atomic(&dir.join("u.csv"), field_to_csv(&level.solution.u).as_bytes())?;
    write_atomic(&dir.join("diagnostics.json"), &json(&level.record))
}

fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    write_atomic(&dir.join("report.json"), &json(report))?;
    for (name, table) in &report.tables {
        write_atomic(&dir.join(format!("{name}.csv")), table.as_bytes())?;
    }
    Ok(())
}

fn output_dir(cfg: &RunConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| cfg.output_dir.clone())
}

fn cmd_solve(args: RunArgs) -> Result<i32> {
    let (mut cfg, base) = load_config(&args.config)?;
    cfg.output_dir = output_dir(&cfg, args.output_dir);
    let level = prepare(&cfg, args.level, &base, false)?;
    write_solve_outputs(&cfg.output_dir, &level)?;
    match &level.record.diagnostics {
        Some(d) => println!(
            "solved level {} (h = {:e}): residual {:.3e}, {} newton steps, {} sweeps",
            level.index, level.record.h, d.final_residual, d.newton_steps, d.sweeps
        ),
        None => println!("fixture written (h = {:e})", level.record.h),
    }
    Ok(EXIT_OK)
}

fn report_status(report: &RunReport) {
    for f in &report.errors {
        eprintln!("analysis {} failed: {}", f.analysis, f.message);
    }
}

fn cmd_analyze(args: RunArgs) -> Result<i32> {
    let (mut cfg, base) = load_config(&args.config)?;
    cfg.output_dir = output_dir(&cfg, args.output_dir);
    let level = prepare(&cfg, args.level, &base, true)?;
    if level.record.diagnostics.is_some() || level.problem.fixture.is_some() {
        write_solve_outputs(&cfg.output_dir, &level)?;
    }
    let report = analyze(&cfg, &level);
    write_report(&cfg.output_dir, &report)?;
    report_status(&report);
    println!(
        "analyzed level {}: {} of {} analyses succeeded",
        level.index,
        cfg.analyses.len() - report.errors.len(),
        cfg.analyses.len()
    );
    Ok(if report.all_failed() { EXIT_ANALYSIS } else { EXIT_OK })
}

fn cmd_sweep(config: String, flag: Option<PathBuf>) -> Result<i32> {
    let (mut cfg, base) = load_config(&config)?;
    cfg.output_dir = output_dir(&cfg, flag);
    if cfg.refinement_levels < 2 {
        return Err(Error::Config("refinement_levels must be ≥ 2".into()));
    }
    let mut reports = Vec::new();
    for k in 0..cfg.refinement_levels {
        let level = prepare(&cfg, k, &base, false)?;
        let dir = cfg.output_dir.join(format!("level_{k}"));
        write_solve_outputs(&dir, &level)?;
        let report = analyze(&cfg, &level);
        write_report(&dir, &report)?;
        report_status(&report);
        println!("level {k} (h = {:e}) done", level.record.h);
        reports.push(report);
    }
    write_atomic(&cfg.output_dir.join("convergence.csv"), convergence_table(&reports).as_bytes())?;
    Ok(if reports.iter().all(RunReport::all_failed) {
        EXIT_ANALYSIS
    } else {
        EXIT_OK
    })
}

fn cmd_presets(action: PresetAction) -> Result<i32> {
    match action {
        PresetAction::List => {
            for p in PRESETS {
                println!("{:<16} {}", p.name, p.description);
            }
        }
        PresetAction::Show { name } => {
            let p = PRESETS
                .iter()
                .find(|p| p.name == name)
                .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?;
            print!("{}", p.json);
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Sweep { config, output_dir } => cmd_sweep(config, output_dir),
        Command::Presets { action } => cmd_presets(action),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

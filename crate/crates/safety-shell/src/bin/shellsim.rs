//! Command-line front end: run the fault-injection matrix, export scenario
//! files, replay a single scenario, or print the built-in configuration.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use safety_shell::arch::Architecture;
use safety_shell::config::SimConfig;
use safety_shell::error::Result;
use safety_shell::report::{self, MatrixSelection, VariantKind};
use safety_shell::scenario::catalog;
use safety_shell::scenario::{self, ScenarioSpec};

#[derive(Parser)]
#[command(name = "shellsim", version, about = "Multi-channel arbitration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the fault-injection matrix and write result tables.
    Run(RunArgs),
    /// Write the catalog scenarios as TOML files.
    ExportScenarios(ExportArgs),
    /// Run one scenario file with one architecture and print the result.
    RunScenario(RunScenarioArgs),
    /// Print the built-in configuration as TOML.
    DefaultConfig,
}

#[derive(Args)]
struct Selection {
    /// Comma-separated test numbers (default: all).
    #[arg(long, value_delimiter = ',')]
    tests: Vec<u32>,
    /// Variants to run: single, dual, delayed, ghost-window or all.
    #[arg(long, default_value = "all")]
    variant: String,
    /// Speeds as a comma list ("8,17,25") or inclusive range ("8:25").
    #[arg(long)]
    speeds: Option<String>,
}

impl Selection {
    fn tests(&self) -> Vec<u32> {
        if self.tests.is_empty() {
            catalog::TESTS.to_vec()
        } else {
            self.tests.clone()
        }
    }

    fn variants(&self) -> std::result::Result<Vec<VariantKind>, String> {
        if self.variant.eq_ignore_ascii_case("all") {
            Ok(VariantKind::ALL.to_vec())
        } else {
            self.variant.split(',').map(|v| v.trim().parse()).collect()
        }
    }

    fn speeds(&self) -> std::result::Result<Option<Vec<f64>>, String> {
        let Some(text) = &self.speeds else { return Ok(None) };
        let bad = || format!("cannot parse speed list '{text}'");
        if let Some((lo, hi)) = text.split_once(':') {
            let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
            let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
            Ok(Some((lo..=hi).map(f64::from).collect()))
        } else {
            text.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map(Some)
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    selection: Selection,
    /// Comma-separated architectures (SC, MA, FWM, RSS, Shell-2, Shell-3).
    #[arg(long, value_delimiter = ',')]
    arch: Vec<String>,
    /// Output directory for result files.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Configuration file (TOML); defaults to the built-in stack.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (1 = sequential).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Run a fixed sub-matrix twice and verify byte-identical results
    /// instead of the selected matrix.
    #[arg(long)]
    seedless_check: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    selection: Selection,
    /// Output directory for scenario files.
    #[arg(long, default_value = "scenarios")]
    out: PathBuf,
    /// Configuration file (TOML); defaults to the built-in stack.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunScenarioArgs {
    /// Scenario file to run.
    file: PathBuf,
    /// Architecture to run it with.
    #[arg(long, default_value = "Shell-3")]
    arch: String,
    /// Include the per-step trace in the printed result.
    #[arg(long)]
    trace: bool,
    /// Configuration file (TOML); defaults to the built-in stack.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>) -> Result<SimConfig> {
    match path {
        Some(p) => SimConfig::load(p),
        None => Ok(SimConfig::standard()),
    }
}

fn parse_archs(list: &[String]) -> std::result::Result<Vec<Architecture>, String> {
    if list.is_empty() {
        Ok(Architecture::ALL.to_vec())
    } else {
        list.iter().map(|a| a.parse()).collect()
    }
}

fn cmd_run(args: &RunArgs) -> std::result::Result<(), String> {
    let sim = load_config(&args.config).map_err(|e| e.to_string())?;
    if args.seedless_check {
        let started = Instant::now();
        let identical =
            report::seedless_check(&sim, args.jobs).map_err(|e| e.to_string())?;
        let secs = started.elapsed().as_secs_f64();
        if identical {
            println!("seedless check passed: repeated sub-matrix byte-identical ({secs:.1} s)");
            return Ok(());
        }
        return Err("seedless check FAILED: repeated runs differ".into());
    }

    let sel = MatrixSelection {
        tests: args.selection.tests(),
        variants: args.selection.variants()?,
        archs: parse_archs(&args.arch)?,
        speeds: args.selection.speeds()?,
    };
    let keys = report::plan_runs(&sel);
    if keys.is_empty() {
        return Err("selection matches no runs".into());
    }
    eprintln!("running {} simulations on {} thread(s)...", keys.len(), args.jobs.max(1));
    let started = Instant::now();
    let (records, errors) = report::execute(&keys, &sim, args.jobs);
    report::write_outputs(&args.out, &records).map_err(|e| e.to_string())?;
    println!(
        "{} runs in {:.1} s -> {}",
        records.len(),
        started.elapsed().as_secs_f64(),
        args.out.display()
    );
    if errors > 0 {
        return Err(format!("{errors} run(s) failed; see raw_results.jsonl"));
    }
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> std::result::Result<(), String> {
    let sim = load_config(&args.config).map_err(|e| e.to_string())?;
    let sel = MatrixSelection {
        tests: args.selection.tests(),
        variants: args.selection.variants()?,
        archs: vec![Architecture::Shell3], // scenarios are architecture-independent
        speeds: args.selection.speeds()?,
    };
    std::fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    let mut written = 0usize;
    for key in report::plan_runs(&sel) {
        let spec = catalog::build(key.test, key.variant, key.speed, &sim)
            .map_err(|e| e.to_string())?;
        let path = args.out.join(format!("{}.toml", spec.name));
        spec.save(&path).map_err(|e| e.to_string())?;
        written += 1;
    }
    println!("wrote {written} scenario files to {}", args.out.display());
    Ok(())
}

fn cmd_run_scenario(args: &RunScenarioArgs) -> std::result::Result<(), String> {
    let sim = load_config(&args.config).map_err(|e| e.to_string())?;
    let spec = ScenarioSpec::load(&args.file).map_err(|e| e.to_string())?;
    let arch: Architecture = args.arch.parse()?;
    let result = scenario::run(arch, &spec, &sim, args.trace);
    println!(
        "{}",
        serde_json::to_string_pretty(&result).map_err(|e| e.to_string())?
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::ExportScenarios(args) => cmd_export(args),
        Command::RunScenario(args) => cmd_run_scenario(args),
        Command::DefaultConfig => SimConfig::standard()
            .to_toml_string()
            .map(|text| println!("{text}"))
            .map_err(|e| e.to_string()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

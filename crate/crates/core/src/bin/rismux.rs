use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rismux::scenario::{self, RunMetadata};

#[derive(Parser)]
#[command(
    name = "rismux",
    version,
    about = "RIS-assisted eMBB/URLLC multiplexing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (file and/or preset) and write a long-format CSV.
    Run(RunArgs),
    /// Print the resolved scenario as TOML without running it.
    Show(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario TOML file.
    scenario: Option<PathBuf>,
    /// Figure preset (fig-a .. fig-e), applied beneath the scenario file.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// CSV destination; stdout when absent. Metadata goes to `<out>.meta.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a scenario key, e.g. `--set r_urllc=2.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn resolve(args: &RunArgs) -> Result<scenario::Resolved, String> {
    let text = match &args.scenario {
        Some(path) => Some(
            fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?,
        ),
        None => None,
    };
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(trials) = args.trials {
        overrides.push(format!("trials={trials}"));
    }
    scenario::resolve_layers(args.preset.as_deref(), text.as_deref(), &overrides)
        .map_err(|e| e.to_string())
}

fn run(args: &RunArgs) -> Result<(), String> {
    if args.workers == 0 {
        return Err("invalid `workers`: must be at least 1".into());
    }
    let resolved = resolve(args)?;
    let start = Instant::now();
    let output = scenario::execute(&resolved, args.workers).map_err(|e| e.to_string())?;
    let wall = start.elapsed().as_secs_f64();
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            scenario::write_csv(&output.rows, file).map_err(|e| e.to_string())?;
            let meta = RunMetadata::new(
                &resolved,
                args.preset.as_deref(),
                args.workers,
                wall,
                output.warnings,
            );
            let mut meta_path = path.clone().into_os_string();
            meta_path.push(".meta.json");
            let json = serde_json::to_string_pretty(&meta).map_err(|e| e.to_string())?;
            fs::write(&meta_path, json + "\n")
                .map_err(|e| format!("cannot write metadata: {e}"))?;
        }
        None => {
            scenario::write_csv(&output.rows, io::stdout().lock()).map_err(|e| e.to_string())?
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Show(args) => resolve(args).map(|r| print!("{}", r.file.to_toml())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

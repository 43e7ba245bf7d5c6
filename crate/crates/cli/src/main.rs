use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phaseflow_cli::presets::{preset, PRESETS};
use phaseflow_cli::{execute, export, output, Config};

const CONFIG_ERROR: u8 = 2;
const TREATMENT_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "phaseflow",
    version,
    about = "Gaussian phase-space dynamics: one initial state, many treatments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its run directory.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `runs/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a shipped scenario as TOML.
    Preset {
        /// One of the shipped presets; `list` prints their names.
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a scenario without running it.
    Validate { config: PathBuf },
    /// Flatten a run directory into plotdata.csv.
    Export { rundir: PathBuf },
}

fn load(path: &Path) -> Result<Config, ExitCode> {
    let cfg = Config::load(path).map_err(|e| {
        eprintln!("error: {}: {e:#}", path.display());
        ExitCode::from(CONFIG_ERROR)
    })?;
    cfg.validate().map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(CONFIG_ERROR)
    })?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), ExitCode> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
            let outcome = execute(&cfg).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(CONFIG_ERROR)
            })?;
            output::write_run(&dir, &outcome).map_err(|e| {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            })?;
            for t in &outcome.summary.treatments {
                match &t.failure {
                    None => println!("{:<28} ok      {:>8.2}s", t.label, t.elapsed_s),
                    Some(f) => println!("{:<28} FAILED  at t = {}: {}", t.label, f.time, f.reason),
                }
            }
            if let Some(c) = &outcome.summary.comparison {
                println!(
                    "max pairwise deviation {:e} (within tolerance: {})",
                    c.max_deviation, c.all_within
                );
            }
            println!("wrote {}", dir.display());
            if outcome.failed() {
                return Err(ExitCode::from(TREATMENT_FAILURE));
            }
        }
        Command::Preset { name, out, seed } => {
            if name == "list" {
                PRESETS.iter().for_each(|p| println!("{p}"));
                return Ok(());
            }
            let Some(mut cfg) = preset(&name) else {
                eprintln!("error: unknown preset `{name}`; available: {}", PRESETS.join(", "));
                return Err(ExitCode::from(CONFIG_ERROR));
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let path = out.join(format!("{name}.toml"));
            std::fs::create_dir_all(&out)
                .and_then(|_| std::fs::write(&path, cfg.to_toml()))
                .map_err(|e| {
                    eprintln!("error: {}: {e}", path.display());
                    ExitCode::FAILURE
                })?;
            println!("{}", path.display());
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!("{}: ok ({} treatments)", cfg.name, cfg.treatments.len());
        }
        Command::Export { rundir } => {
            let rows = export::export(&rundir).map_err(|e| {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            })?;
            println!(
                "wrote {} rows to {}",
                rows,
                rundir.join(export::PLOTDATA_FILE).display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}

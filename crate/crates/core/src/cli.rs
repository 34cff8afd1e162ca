//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::channel::Rat;
use crate::config::{parse_config, ConfigError, MobilitySweep, Preset, ScenarioConfig};
use crate::metrics::{export_csv, render_csv};
use crate::scenario::{metadata, run_scenario_with, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "cellsim", about = "LTE vs 5G mmWave uplink video simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RatChoice {
    Lte,
    Nr,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario sweep and write the aggregated CSV.
    Run {
        /// Scenario preset (1, 2 or 3).
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        preset: Option<u8>,
        #[arg(long, value_enum)]
        rat: Option<RatChoice>,
        /// Replications per sweep point.
        #[arg(long)]
        reps: Option<u32>,
        /// Base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; metadata goes to FILE.meta. Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Configuration file applied on top of the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write one event trace per run next to the output.
        #[arg(long)]
        trace: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check a configuration file and report every invalid field.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the complete default configuration.
    PrintDefaults {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        preset: Option<u8>,
    },
}

fn preset_of(n: u8) -> Preset {
    match n {
        1 => Preset::Scenario1,
        2 => Preset::Scenario2,
        _ => Preset::Scenario3,
    }
}

fn read(path: &PathBuf) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn load(preset: Option<u8>, config: Option<&PathBuf>) -> Result<ScenarioConfig, String> {
    let Some(path) = config else {
        let preset = preset.ok_or("run needs --preset or --config")?;
        return Ok(ScenarioConfig::preset(preset_of(preset), MobilitySweep::Speed));
    };
    let mut text = read(path)?;
    if let Some(p) = preset {
        let wanted = preset_of(p);
        let has_preset = text
            .lines()
            .any(|l| l.split('#').next().unwrap_or("").trim_start().starts_with("preset"));
        if has_preset {
            let parsed = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if parsed.preset != wanted {
                return Err(format!(
                    "--preset {p} conflicts with preset = {} in {}",
                    parsed.preset.as_str(),
                    path.display()
                ));
            }
        } else {
            // keep the file's line numbers intact in diagnostics
            text.push_str(&format!("\npreset = {}\n", wanted.as_str()));
        }
    }
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    preset: Option<u8>,
    rat: Option<RatChoice>,
    reps: Option<u32>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    config: Option<PathBuf>,
    trace: bool,
    jobs: Option<usize>,
) -> Result<(), String> {
    let mut cfg = load(preset, config.as_ref())?;
    match rat {
        Some(RatChoice::Lte) => cfg.rats = vec![Rat::Lte],
        Some(RatChoice::Nr) => cfg.rats = vec![Rat::Nr],
        Some(RatChoice::Both) => cfg.rats = vec![Rat::Lte, Rat::Nr],
        None => {}
    }
    if let Some(r) = reps {
        cfg.replications = r;
    }
    if let Some(s) = seed {
        cfg.seed_base = s;
    }
    cfg.validate().map_err(|e| e.to_string())?;

    let trace_dir = trace.then(|| {
        let base = out
            .as_ref()
            .and_then(|p| p.parent().map(|d| d.to_path_buf()))
            .unwrap_or_default();
        base.join("traces")
    });
    let opts = RunOptions { jobs, trace_dir };
    let result = run_scenario_with(&cfg, &opts).map_err(|e| e.to_string())?;

    match out {
        Some(path) => {
            export_csv(&result.aggregates, &path).map_err(|e| e.to_string())?;
            let mut meta = path.clone().into_os_string();
            meta.push(".meta");
            fs::write(&meta, metadata(&cfg))
                .map_err(|e| format!("cannot write {}: {e}", PathBuf::from(&meta).display()))?;
            eprintln!(
                "wrote {} rows to {}",
                result.aggregates.len(),
                path.display()
            );
        }
        None => print!("{}", render_csv(&result.aggregates)),
    }
    Ok(())
}

fn cmd_validate(config: PathBuf) -> Result<(), String> {
    let text = read(&config)?;
    match parse_config(&text) {
        Ok(_) => {
            println!("{}: ok", config.display());
            Ok(())
        }
        Err(ConfigError::Invalid(issues)) => {
            let lines: Vec<String> = issues.iter().map(|i| format!("  {i}")).collect();
            Err(format!("{}: invalid configuration\n{}", config.display(), lines.join("\n")))
        }
        Err(e) => Err(format!("{}: {e}", config.display())),
    }
}

/// Entry point shared by the binary and tests; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Run {
            preset,
            rat,
            reps,
            seed,
            out,
            config,
            trace,
            jobs,
        } => cmd_run(preset, rat, reps, seed, out, config, trace, jobs),
        Command::Validate { config } => cmd_validate(config),
        Command::PrintDefaults { preset } => {
            let cfg = match preset {
                Some(p) => ScenarioConfig::preset(preset_of(p), MobilitySweep::Speed),
                None => ScenarioConfig::default(),
            };
            print!("{}", cfg.render());
            Ok(())
        }
    };
    match result {
        Ok(()) => 0,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

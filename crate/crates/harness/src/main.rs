use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use hetvr_harness::generate::{generate, AdversarialSpec};
use hetvr_harness::output::read_trace_csv;
use hetvr_harness::plot::{emit_plot, series_from_rows};
use hetvr_harness::{preset, run_experiment, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "hetvr", version, about = "Run, tune and plot variance-reduced solver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every solver in a config (tuning first if the config has a grid).
    Run {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tune every solver on the rate grid, then keep the best run.
    Tune {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the built-in experiment families.
    Preset {
        name: String,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the config and stop.
        #[arg(long)]
        dry_run: bool,
    },
    /// Build a worst-case instance and print it as JSON.
    Generate {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot one or more trace CSVs into a single SVG.
    Plot {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &PathBuf) -> hetvr_harness::Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn report(r: &hetvr_harness::ExperimentReport) {
    for run in &r.runs {
        let s = run.summary();
        println!(
            "{:<18} scale {:<8e} {:?} after {:.1} passes, gap {}",
            s.solver,
            s.scale,
            s.outcome,
            s.final_passes,
            s.final_gap.map_or("-".into(), |g| format!("{g:.3e}"))
        );
    }
    for s in &r.diverged_solvers {
        println!("{s:<18} diverged at every grid point");
    }
    println!("results in {}", r.dir.display());
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.clone());
            report(&run_experiment(&cfg, &dir, false).with_context(|| format!("experiment {}", cfg.name))?);
        }
        Command::Tune { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.clone());
            report(&run_experiment(&cfg, &dir, true).with_context(|| format!("tuning {}", cfg.name))?);
        }
        Command::Preset {
            name,
            scale,
            seed,
            out,
            dry_run,
        } => {
            let mut cfg = preset(&name, scale, seed)?;
            if let Some(o) = out {
                cfg.output = o;
            }
            if dry_run {
                println!("{}", cfg.to_json());
            } else {
                report(&run_experiment(&cfg, &cfg.output.clone(), false).with_context(|| format!("preset {name}"))?);
            }
        }
        Command::Generate { spec, out } => {
            let spec = AdversarialSpec::from_json(&read(&spec)?)?;
            let text = serde_json::to_string_pretty(&generate(&spec)?)?;
            match out {
                Some(path) => std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?,
                None => println!("{text}"),
            }
        }
        Command::Plot { traces, out } => {
            let mut rows = Vec::new();
            for t in &traces {
                rows.extend(read_trace_csv(t)?);
            }
            emit_plot(&series_from_rows(&rows), &out, "convergence")
                .with_context(|| format!("plotting into {}", out.display()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<HarnessError>().map_or(1, HarnessError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

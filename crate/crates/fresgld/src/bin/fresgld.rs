//! Experiment runner CLI.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime sampler error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fresgld::config::{preset, ExperimentConfig, PRESET_NAMES};
use fresgld::diagnostics::wasserstein2_1d;
use fresgld::error::{Error, Result};
use fresgld::experiment::{compare, run_experiment};

#[derive(Parser)]
#[command(name = "fresgld", version, about = "Replica-exchange Langevin sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of one experiment config and write its outputs.
    Run {
        /// TOML experiment configuration.
        config: PathBuf,
        /// Also write a gnuplot script rendering the per-seed densities.
        #[arg(long)]
        emit_gnuplot_script: bool,
    },
    /// Run several configs sharing a target and rank them.
    Compare {
        /// Two or more TOML experiment configurations.
        configs: Vec<PathBuf>,
    },
    /// Print a named preset config as TOML.
    Preset {
        /// One of the built-in preset names.
        name: String,
    },
    /// Diagnostics over existing output files.
    Diag {
        #[command(subcommand)]
        what: DiagCommand,
    },
}

#[derive(Subcommand)]
enum DiagCommand {
    /// 2-Wasserstein distance between the first columns of two sample CSVs.
    W2 { file_a: PathBuf, file_b: PathBuf },
}

fn read_first_column(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let first = line.split(',').next().unwrap_or("").trim();
        match first.parse::<f64>() {
            Ok(v) => values.push(v),
            // Header rows are allowed only at the top.
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::invalid(format!(
                    "{}: line {} is not numeric",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(Error::invalid(format!("{}: no numeric rows", path.display())));
    }
    Ok(values)
}

fn write_gnuplot_script(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let mut script = String::from("set datafile separator ','\nset key outside\n");
    script.push_str(&format!("set title '{}'\nplot \\\n", config.name));
    let lines: Vec<String> = config
        .seeds
        .iter()
        .map(|seed| {
            format!("  'kde-seed-{seed}.csv' using 1:2 skip 1 with lines title 'seed {seed}'")
        })
        .collect();
    script.push_str(&lines.join(", \\\n"));
    script.push('\n');
    std::fs::write(out_dir.join("plot.gp"), script)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            emit_gnuplot_script,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_experiment(&cfg)?;
            if emit_gnuplot_script {
                write_gnuplot_script(&cfg, &summary.output_dir)?;
            }
            println!(
                "{}: {} seeds ({} failed), outputs in {}",
                summary.name,
                summary.n_seeds,
                summary.n_failed,
                summary.output_dir.display()
            );
            if let (Some(m), Some(s)) = (summary.w2_mean, summary.w2_sd) {
                println!("w2_to_truth: {m:.6} +/- {s:.6}");
            }
            if let Some(a) = summary.annulus_coverage_mean {
                println!(
                    "annulus_coverage: {a:.4}, angular_bins: {:.1}/36",
                    summary.angular_bins_mean.unwrap_or(0.0)
                );
            }
            Ok(())
        }
        Command::Compare { configs } => {
            let cfgs = configs
                .iter()
                .map(|p| ExperimentConfig::load(p))
                .collect::<Result<Vec<_>>>()?;
            let report = compare(&cfgs)?;
            println!(
                "metric: {} ({} is better)",
                report.metric_name,
                if report.lower_is_better { "lower" } else { "higher" }
            );
            let mut ranked = report.variants.clone();
            ranked.sort_by_key(|v| v.rank);
            for v in &ranked {
                println!("  #{} {} ({:?}): {:.6}", v.rank, v.name, v.sampler, v.metric);
            }
            for p in &report.paired {
                println!(
                    "  {} vs {}: first better in {}/{} seeds",
                    p.first,
                    p.second,
                    p.first_better,
                    p.differences.len()
                );
            }
            Ok(())
        }
        Command::Preset { name } => {
            let cfg = preset(&name).map_err(|_| {
                Error::config(format!(
                    "unknown preset '{name}'; available: {}",
                    PRESET_NAMES.join(", ")
                ))
            })?;
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
        Command::Diag { what } => match what {
            DiagCommand::W2 { file_a, file_b } => {
                let a = read_first_column(&file_a)?;
                let b = read_first_column(&file_b)?;
                println!("{}", wasserstein2_1d(&a, &b)?);
                Ok(())
            }
        },
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use feedsim::harness::{
    cnot_demo, emit_report, probe_round, schedule_report, ProtocolConfig, ReportFormat, Simulation,
};
use feedsim::{EpsilonPolicy, Error, LossConfig, Result};

const OUT_DIR_ENV: &str = "FEEDSIM_OUT_DIR";

#[derive(Parser)]
#[command(name = "feedsim", version, about = "Measurement-and-feedback quantum simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble of trajectories and write reports.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: $FEEDSIM_OUT_DIR, else ./feedsim-out).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Tally beam-splitter outcomes at a fixed emission strength.
    ProbeRound {
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the compiled plan and its round budget.
    Schedule {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
    },
    /// Dressed quarter-turn against CNOT; losses use backup qubits.
    CnotDemo {
        #[arg(long, default_value_t = 0.0)]
        p_loss: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        max_rounds: usize,
    },
    /// Fidelity of the noiseless plan to exact evolution.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, format } => {
            let cfg = ProtocolConfig::load(&config).map_err(as_config)?;
            let sim = Simulation::new(cfg)?;
            let (report, trajs) = sim.run_ensemble()?;
            let dir = out
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("feedsim-out"));
            let format = match format {
                Format::Json => ReportFormat::Json,
                Format::Csv => ReportFormat::Csv,
            };
            for p in emit_report(&report, &trajs, format, &dir)? {
                println!("{}", p.display());
            }
            if let Some(f) = &report.fidelity_vs_oracle {
                eprintln!(
                    "{} trajectories, {} failed, mean fidelity {:.12}",
                    report.trajectories, report.failed, f.mean
                );
            }
            Ok(())
        }
        Command::ProbeRound { eps, samples, seed } => print_json(&probe_round(eps, samples, seed)?),
        Command::Schedule { config, confidence } => {
            let cfg = ProtocolConfig::load(&config).map_err(as_config)?;
            print_json(&schedule_report(&cfg, confidence)?)
        }
        Command::CnotDemo {
            p_loss,
            seed,
            max_rounds,
        } => {
            let loss = if p_loss > 0.0 {
                LossConfig::with_backup(p_loss)?
            } else {
                LossConfig::default()
            };
            print_json(&cnot_demo(&EpsilonPolicy::residual_exact(max_rounds), &loss, seed)?)
        }
        Command::Oracle { config } => {
            let cfg = ProtocolConfig::load(&config).map_err(as_config)?;
            print_json(&Simulation::new(cfg)?.oracle_baseline())
        }
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Io { path, source } => Error::Config(format!("{}: {source}", path.display())),
        other => other,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("feedsim: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Usage(_) | Error::Json(_) => 2,
                Error::Resource { .. } => 3,
                _ => 1,
            })
        }
    }
}

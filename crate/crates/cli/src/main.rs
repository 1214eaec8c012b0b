use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crit_cycle::config::{self, Diagnostics, ExperimentKind};

#[derive(Debug, Parser)]
#[command(name = "crit-cycle", version, about = "Cyclic drives through a quantum critical point")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment config and write its datasets.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads. Never changes the results.
        #[arg(long, env = "CRIT_CYCLE_JOBS")]
        jobs: Option<usize>,
    },
    /// Check a config and print diagnostics.
    Validate { config: PathBuf },
    /// Print the supported experiment kinds.
    ListExperiments,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

fn print_diagnostics(d: &Diagnostics) {
    for w in &d.warnings {
        eprintln!("warning: {w}");
    }
    for e in &d.errors {
        eprintln!("error: {e}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<14} {}", k.name(), k.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => {
            let d = match config::load(&config) {
                Ok(cfg) => cfg.validate(),
                Err(d) => d,
            };
            print_diagnostics(&d);
            if d.is_ok() {
                println!("ok: {} ({} warning(s))", config.display(), d.warnings.len());
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VALIDATION)
            }
        }
        Command::Run { config, out, jobs } => {
            let cfg = match config::load(&config) {
                Ok(c) => c,
                Err(d) => {
                    print_diagnostics(&d);
                    return ExitCode::from(EXIT_VALIDATION);
                }
            };
            let d = cfg.validate();
            print_diagnostics(&d);
            if !d.is_ok() {
                return ExitCode::from(EXIT_VALIDATION);
            }
            let jobs = jobs.filter(|&j| j > 0).unwrap_or_else(|| {
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
            });
            let out = out.unwrap_or_else(|| cfg.output.dir.clone());
            match crit_cycle::run(&cfg, &out, jobs, d.warnings) {
                Ok(m) => {
                    println!(
                        "{}: {} point(s) ok, {} failed, {:.2} s -> {}",
                        m.experiment,
                        m.points_ok,
                        m.points_failed,
                        m.wall_time_s,
                        out.display()
                    );
                    for p in m.points.iter().filter(|p| p.error.is_some()) {
                        eprintln!("point {}: {}", p.point.index, p.error.as_deref().unwrap_or(""));
                    }
                    if m.points_failed > 0 {
                        ExitCode::from(EXIT_PARTIAL)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: cannot write results to {}: {e}", out.display());
                    ExitCode::from(EXIT_VALIDATION)
                }
            }
        }
    }
}

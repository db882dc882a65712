use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use jsdm_cli::{load_config, run, table1_scaled, RunOptions};

#[derive(Parser)]
#[command(name = "jsdm", version, about = "Hybrid beamforming shift-angle sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file and write CSV tables plus a manifest.
    Run {
        config: PathBuf,
        #[arg(long, env = "JSDM_OUT_DIR")]
        out: Option<PathBuf>,
        /// Master seed, overriding `mc.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "JSDM_THREADS")]
        threads: Option<usize>,
        /// Write SINR, nMSE and beampattern columns in dB.
        #[arg(long)]
        db: bool,
    },
    /// Parse and check a config file without running it.
    Validate { config: PathBuf },
    /// Print a bundled scenario as a config file.
    Scenario {
        #[arg(value_enum)]
        name: ScenarioName,
        /// Antenna count M.
        #[arg(long, default_value_t = 128)]
        scale: usize,
        /// Shift-angle step in degrees; defaults to 0.1 at M = 128 and 1 otherwise.
        #[arg(long)]
        phi_step: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioName {
    Table1,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, seed, threads, db } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let opts = RunOptions { out_dir: out, seed, threads, db };
            match run(&cfg, &opts) {
                Ok(rep) if rep.failures == 0 => {
                    eprintln!("wrote {} in {:.1} s", rep.out_dir.display(), rep.wall_time_s);
                    ExitCode::SUCCESS
                }
                Ok(rep) => {
                    for (phi, e) in rep.result.failures() {
                        eprintln!("error at phi = {phi}: {e}");
                    }
                    eprintln!(
                        "{} of {} angles failed; partial outputs in {}",
                        rep.failures,
                        rep.result.phi_grid.len(),
                        rep.out_dir.display()
                    );
                    ExitCode::from(1)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                println!(
                    "ok: M = {}, {} groups, {} angles, {} beamformers x {} combiners, {} trials",
                    cfg.scenario.antennas,
                    cfg.scenario.groups.len(),
                    cfg.phi_grid().len(),
                    cfg.pipeline.beamformers.len(),
                    cfg.pipeline.combiners.len(),
                    cfg.mc.trials
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}: {e}", config.display());
                ExitCode::from(2)
            }
        },
        Command::Scenario { name: ScenarioName::Table1, scale, phi_step } => {
            let mut cfg = match table1_scaled(scale) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            cfg.sweep.phi_step = phi_step.unwrap_or(if scale >= 128 { 0.1 } else { 1.0 });
            if let Err(e) = cfg.validate() {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            print!("{}", cfg.to_toml());
            ExitCode::SUCCESS
        }
    }
}

//! Runs a configured φ sweep and writes its tables and manifest.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use jsdm_core::metrics::{phi_seeds, phi_sweep};
use jsdm_core::SweepResult;

use crate::config::ExperimentConfig;
use crate::export::{
    write_beampattern, write_capacity, write_cdf, write_summary, BEAMPATTERN_FILE, CAPACITY_FILE, CDF_FILE,
    MANIFEST_FILE, SUMMARY_FILE,
};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] jsdm_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot start worker pool: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

/// Command-line overrides applied on top of the configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub db: bool,
}

impl RunOptions {
    /// Configuration with the overrides folded in; this is what the manifest records.
    pub fn apply(&self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = cfg.clone();
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.mc.seed = seed;
        }
        cfg.output.db |= self.db;
        cfg
    }
}

#[derive(Debug, Serialize)]
struct PhiSeedRecord {
    phi: f64,
    design: u64,
    capacity: u64,
    pilots: u64,
}

#[derive(Debug, Serialize)]
struct ErrorRecord {
    phi: f64,
    message: String,
}

#[derive(Debug, Serialize)]
struct Tolerances {
    tol: f64,
    max_iter: usize,
    n_iter: usize,
    n_quad: usize,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    status: &'static str,
    master_seed: u64,
    threads: usize,
    wall_time_s: f64,
    tolerances: Tolerances,
    files: Vec<&'static str>,
    errors: Vec<ErrorRecord>,
    seeds: Vec<PhiSeedRecord>,
    /// Complete effective configuration; feeding it back reproduces the CSVs.
    config: String,
}

#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub result: SweepResult,
    pub failures: usize,
    pub wall_time_s: f64,
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path).map(BufWriter::new).map_err(|source| RunError::Io { path: path.into(), source })
}

fn write_table<F>(dir: &Path, name: &str, f: F) -> Result<(), RunError>
where
    F: FnOnce(BufWriter<File>) -> csv::Result<()>,
{
    let path = dir.join(name);
    f(create(&path)?).map_err(|source| RunError::Csv { path, source })
}

/// Sweeps φ per `cfg` (after `opts` overrides) and writes
/// `capacity.csv`, `summary.csv`, `cdf.csv`, `beampattern.csv` and
/// `manifest.json`. Failed φ points are listed in the manifest and do not
/// abort the run.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, RunError> {
    let cfg = opts.apply(cfg);
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let threads = pool.current_num_threads();
    let scn = cfg.scenario();
    let sweep = cfg.sweep_config();
    let grid = cfg.phi_grid();
    let result = pool.install(|| phi_sweep(&scn, &grid, &sweep))?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
    let in_db = cfg.output.db;
    write_table(&dir, CAPACITY_FILE, |w| write_capacity(&result, in_db, w))?;
    write_table(&dir, SUMMARY_FILE, |w| write_summary(&result, w))?;
    write_table(&dir, CDF_FILE, |w| write_cdf(&result, cfg.output.cdf_points, w))?;
    write_table(&dir, BEAMPATTERN_FILE, |w| write_beampattern(&result, in_db, w))?;

    let errors: Vec<ErrorRecord> =
        result.failures().into_iter().map(|(phi, e)| ErrorRecord { phi, message: e.to_string() }).collect();
    let failures = errors.len();
    let manifest = Manifest {
        tool: "jsdm",
        version: env!("CARGO_PKG_VERSION"),
        core_version: jsdm_core::VERSION,
        status: if failures == 0 { "complete" } else { "partial" },
        master_seed: cfg.mc.seed,
        threads,
        wall_time_s,
        tolerances: Tolerances {
            tol: cfg.numerics.tol,
            max_iter: cfg.numerics.max_iter,
            n_iter: cfg.numerics.n_iter,
            n_quad: cfg.numerics.n_quad,
        },
        files: vec![CAPACITY_FILE, SUMMARY_FILE, CDF_FILE, BEAMPATTERN_FILE],
        errors,
        seeds: grid
            .iter()
            .map(|&phi| {
                let s = phi_seeds(cfg.mc.seed, phi);
                PhiSeedRecord { phi, design: s.design, capacity: s.capacity, pilots: s.pilots }
            })
            .collect(),
        config: cfg.to_toml(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest always serializes");
    std::fs::write(&path, text + "\n").map_err(|source| RunError::Io { path, source })?;
    Ok(RunReport { out_dir: dir, result, failures, wall_time_s })
}

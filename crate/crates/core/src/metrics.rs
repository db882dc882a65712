//! Beampatterns, shift-angle sweeps and empirical CDFs.

use rayon::prelude::*;

use crate::chanest::{
    active_delays_per_user, build_pilots_with, effective_channel_covariance, lmmse_estimator, ls_estimator, nmse,
};
use crate::channel::{build_covariances_with, steering, Scenario, DEFAULT_QUAD_POINTS};
use crate::error::{Error, Result};
use crate::geb::compute_geb;
use crate::linksim::{ergodic_capacities, CapacityEstimate, CombinerKind, DEFAULT_BLOCK_LEN};
use crate::numerics::{qr, CMat};
use crate::pipeline::{design_beamformer, BeamformerKind, DesignSettings};
use crate::rng::derive_seed;
use crate::statistics::{expected_sinr, group_statistics, reduce};

/// `‖Q^H u(θ)‖²` with `Q` an orthonormal basis of `span(S)`, i.e. the power
/// of the steering vector projected onto the beamformer's column space.
pub fn beampattern(s: &CMat, theta_grid_deg: &[f64]) -> Result<Vec<f64>> {
    let q = qr(s)?.q;
    let qh = q.adjoint();
    Ok(theta_grid_deg.iter().map(|&t| (&qh * steering(t, s.nrows())).norm_squared()).collect())
}

/// `-90°..=90°` in `step` increments.
pub fn theta_grid(step_deg: f64) -> Vec<f64> {
    let n = (180.0 / step_deg).round() as usize;
    (0..=n).map(|i| -90.0 + i as f64 * step_deg).collect()
}

/// Evenly spaced grid from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidArgument(format!("bad grid {start}..{stop} step {step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Empirical `P(v < c)` at each grid point `c`.
pub fn cdf(values: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empirical CDF of an empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(grid.iter().map(|&c| (c, sorted.partition_point(|&v| v < c) as f64 / n)).collect())
}

/// Value below which a fraction `q` of the sample lies (nearest rank).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Lmmse,
    Ls,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Lmmse => "lmmse",
            EstimatorKind::Ls => "ls",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [EstimatorKind::Lmmse, EstimatorKind::Ls]
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Group whose beamformers are designed and evaluated.
    pub group: usize,
    pub beamformers: Vec<BeamformerKind>,
    pub combiners: Vec<CombinerKind>,
    pub estimator: Option<EstimatorKind>,
    pub pilot_len: usize,
    /// Per-symbol pilot energy; `None` uses the data-phase `E_s/K`.
    pub pilot_energy: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub block_len: usize,
    pub n_quad: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub n_iter: usize,
    /// Shift angles at which beampatterns are stored.
    pub beampattern_phis: Vec<f64>,
    pub theta_grid: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let d = DesignSettings::default();
        Self {
            group: 0,
            beamformers: vec![BeamformerKind::Geb],
            combiners: vec![CombinerKind::Lmmse],
            estimator: None,
            pilot_len: 32,
            pilot_energy: None,
            trials: 200,
            seed: 0,
            block_len: DEFAULT_BLOCK_LEN,
            n_quad: DEFAULT_QUAD_POINTS,
            tol: d.tol,
            max_iter: d.max_iter,
            n_iter: d.n_iter,
            beampattern_phis: Vec::new(),
            theta_grid: theta_grid(0.05),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub kind: BeamformerKind,
    pub expected_sinr: f64,
    pub nmse: Option<f64>,
    /// One estimate per configured combiner, in configuration order.
    pub capacity: Vec<CapacityEstimate>,
    pub beampattern: Option<Vec<f64>>,
    pub analog: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiPoint {
    pub phi: f64,
    pub designs: Vec<DesignResult>,
}

impl PhiPoint {
    pub fn design(&self, kind: BeamformerKind) -> Option<&DesignResult> {
        self.designs.iter().find(|d| d.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub phi_grid: Vec<f64>,
    /// One entry per grid point; failed points keep their error.
    pub points: Vec<std::result::Result<PhiPoint, Error>>,
    pub config: SweepConfig,
}

impl SweepResult {
    pub fn failures(&self) -> Vec<(f64, &Error)> {
        self.phi_grid.iter().zip(&self.points).filter_map(|(&phi, p)| p.as_ref().err().map(|e| (phi, e))).collect()
    }

    fn combiner_index(&self, combiner: CombinerKind) -> Option<usize> {
        self.config.combiners.iter().position(|&c| c == combiner)
    }

    /// `C_φ`: user-averaged mean capacity at each successful φ.
    pub fn capacity_series(&self, kind: BeamformerKind, combiner: CombinerKind) -> Vec<f64> {
        let Some(ci) = self.combiner_index(combiner) else { return Vec::new() };
        self.points
            .iter()
            .filter_map(|p| p.as_ref().ok())
            .filter_map(|p| p.design(kind))
            .map(|d| d.capacity[ci].average())
            .collect()
    }

    /// Mean over φ and users.
    pub fn average_capacity(&self, kind: BeamformerKind, combiner: CombinerKind) -> f64 {
        let s = self.capacity_series(kind, combiner);
        s.iter().sum::<f64>() / s.len() as f64
    }
}

/// Stable integer key of a shift angle, used to derive per-angle seeds so a
/// given angle draws the same randomness on any grid.
pub fn phi_key(phi: f64) -> u64 {
    (phi * 1e6).round() as i64 as u64
}

/// Seeds used at angle `phi`: design initializations, capacity trials, pilots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhiSeeds {
    pub design: u64,
    pub capacity: u64,
    pub pilots: u64,
}

pub fn phi_seeds(master: u64, phi: f64) -> PhiSeeds {
    let key = phi_key(phi);
    PhiSeeds {
        design: derive_seed(master, &[key, 0]),
        capacity: derive_seed(master, &[key, 1]),
        pilots: derive_seed(master, &[key, 2]),
    }
}

/// Full pipeline at one shift angle: CCMs, GEB, every configured design,
/// expected SINR, ergodic capacities and optionally nMSE and beampatterns.
pub fn evaluate_phi(template: &Scenario, phi: f64, cfg: &SweepConfig) -> Result<PhiPoint> {
    let scn = template.with_phi(phi);
    let g = cfg.group;
    let d = scn.group(g)?.rf_chains;
    let cov = build_covariances_with(&scn, cfg.n_quad)?;
    let stats = group_statistics(&cov, &scn, g)?;
    let geb = compute_geb(&stats, d)?;
    let key = phi_key(phi);
    let seeds = phi_seeds(cfg.seed, phi);
    let settings = DesignSettings { tol: cfg.tol, max_iter: cfg.max_iter, n_iter: cfg.n_iter, seed: seeds.design };
    let designs = cfg
        .beamformers
        .iter()
        .map(|&kind| design_beamformer(kind, &scn, g, &stats, &geb, &settings))
        .collect::<Result<Vec<_>>>()?;
    let analogs: Vec<CMat> = designs.iter().map(|d| d.analog.clone()).collect();
    let capacities =
        ergodic_capacities(&scn, &cov, g, &analogs, &cfg.combiners, cfg.block_len, cfg.trials, seeds.capacity)?;
    let keep_pattern = cfg.beampattern_phis.iter().any(|&p| phi_key(p) == key);
    let pilots = match cfg.estimator {
        Some(_) => {
            let grp = scn.group(g)?;
            let energy = cfg.pilot_energy.unwrap_or(grp.energy_per_user());
            Some(build_pilots_with(grp.num_users(), scn.taps, cfg.pilot_len, energy, seeds.pilots)?)
        }
        None => None,
    };
    let designs = designs
        .into_iter()
        .zip(capacities)
        .map(|(des, capacity)| {
            let nmse = match (cfg.estimator, &pilots) {
                (Some(kind), Some(p)) => {
                    let r_h = effective_channel_covariance(&cov, g, &des.analog)?;
                    let eta = reduce(&stats, &des.analog)?.r_eta;
                    let z = match kind {
                        EstimatorKind::Lmmse => lmmse_estimator(p, &r_h, &eta)?,
                        EstimatorKind::Ls => ls_estimator(p, &active_delays_per_user(&scn, g)?, d)?,
                    };
                    Some(nmse(&z, p, &r_h, &eta)?)
                }
                _ => None,
            };
            let beampattern = if keep_pattern { Some(beampattern(&des.analog, &cfg.theta_grid)?) } else { None };
            Ok(DesignResult {
                kind: des.kind,
                expected_sinr: expected_sinr(&stats, &des.analog)?,
                nmse,
                capacity,
                beampattern,
                analog: des.analog,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhiPoint { phi, designs })
}

/// Evaluates every grid angle independently; a failing angle records its
/// error and the sweep continues.
pub fn phi_sweep(template: &Scenario, phi_grid: &[f64], cfg: &SweepConfig) -> Result<SweepResult> {
    template.validate()?;
    template.group(cfg.group)?;
    if cfg.beamformers.is_empty() || cfg.combiners.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one beamformer and one combiner".into()));
    }
    let points = phi_grid.par_iter().map(|&phi| evaluate_phi(template, phi, cfg)).collect();
    Ok(SweepResult { phi_grid: phi_grid.to_vec(), points, config: cfg.clone() })
}

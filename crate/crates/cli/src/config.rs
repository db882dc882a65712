//! Experiment configuration: a TOML document with the sections
//! `[scenario]`, `[pipeline]`, `[sweep]`, `[mc]`, `[numerics]` and `[output]`.
//! Only `[scenario]` is required; everything else has documented defaults
//! (listed in the README).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use jsdm_core::metrics::{linear_grid, theta_grid};
use jsdm_core::{BeamformerKind, CombinerKind, EstimatorKind, GroupProfile, Mpc, Scenario, SweepConfig, UserProfile};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid<T>(field: impl Into<String>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid { field: field.into(), message: message.into() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub antennas: usize,
    pub taps: usize,
    #[serde(default = "one")]
    pub noise_power: f64,
    #[serde(default)]
    pub phi_deg: f64,
    pub groups: Vec<GroupSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    /// `D_g`; deliberately without a default.
    pub rf_chains: usize,
    pub symbol_energy_db: f64,
    #[serde(default)]
    pub mobile: bool,
    pub users: Vec<UserSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSection {
    #[serde(default = "one")]
    pub gain: f64,
    pub mpcs: Vec<MpcSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSection {
    pub delay: usize,
    pub aoa_deg: f64,
    pub spread_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    /// Index of the group under test (0-based).
    pub group: usize,
    pub beamformers: Vec<String>,
    pub combiners: Vec<String>,
    /// `lmmse`, `ls` or `none`.
    pub estimator: String,
    pub pilot_len: usize,
    /// Per-symbol pilot energy in dB; defaults to the group's data-phase `E_s/K`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_energy_db: Option<f64>,
    pub block_len: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            group: 0,
            beamformers: vec!["geb".into()],
            combiners: vec!["lmmse".into()],
            estimator: "none".into(),
            pilot_len: 32,
            pilot_energy_db: None,
            block_len: jsdm_core::linksim::DEFAULT_BLOCK_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub phi_start: f64,
    pub phi_stop: f64,
    pub phi_step: f64,
    /// Angles whose beampatterns are exported.
    pub beampattern_phis: Vec<f64>,
    pub theta_step: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { phi_start: -45.0, phi_stop: 45.0, phi_step: 1.0, beampattern_phis: Vec::new(), theta_step: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub trials: usize,
    pub seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        Self { trials: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    pub tol: f64,
    pub max_iter: usize,
    pub n_iter: usize,
    pub n_quad: usize,
}

impl Default for NumericsSection {
    fn default() -> Self {
        let d = jsdm_core::DesignSettings::default();
        Self { tol: d.tol, max_iter: d.max_iter, n_iter: d.n_iter, n_quad: jsdm_core::channel::DEFAULT_QUAD_POINTS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Export SINR and nMSE columns in dB.
    pub db: bool,
    /// Points of the capacity grid in the CDF table.
    pub cdf_points: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), db: false, cdf_points: 201 }
    }
}

fn one() -> f64 {
    1.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    parse_config(&text)
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn scenario(&self) -> Scenario {
        let s = &self.scenario;
        Scenario {
            antennas: s.antennas,
            taps: s.taps,
            noise_power: s.noise_power,
            phi_deg: s.phi_deg,
            groups: s
                .groups
                .iter()
                .map(|g| GroupProfile {
                    rf_chains: g.rf_chains,
                    symbol_energy: db_to_linear(g.symbol_energy_db),
                    mobile: g.mobile,
                    users: g
                        .users
                        .iter()
                        .map(|u| UserProfile {
                            gain: u.gain,
                            mpcs: u
                                .mpcs
                                .iter()
                                .map(|m| Mpc { delay: m.delay, aoa_deg: m.aoa_deg, spread_deg: m.spread_deg })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn beamformers(&self) -> Vec<BeamformerKind> {
        self.pipeline.beamformers.iter().map(|b| b.parse().expect("validated")).collect()
    }

    pub fn combiners(&self) -> Vec<CombinerKind> {
        self.pipeline.combiners.iter().map(|b| b.parse().expect("validated")).collect()
    }

    pub fn estimator(&self) -> Option<EstimatorKind> {
        match self.pipeline.estimator.as_str() {
            "none" => None,
            e => Some(e.parse().expect("validated")),
        }
    }

    pub fn phi_grid(&self) -> Vec<f64> {
        let s = &self.sweep;
        linear_grid(s.phi_start, s.phi_stop, s.phi_step).expect("validated")
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            group: self.pipeline.group,
            beamformers: self.beamformers(),
            combiners: self.combiners(),
            estimator: self.estimator(),
            pilot_len: self.pipeline.pilot_len,
            pilot_energy: self.pipeline.pilot_energy_db.map(|db| 10f64.powf(db / 10.0)),
            trials: self.mc.trials,
            seed: self.mc.seed,
            block_len: self.pipeline.block_len,
            n_quad: self.numerics.n_quad,
            tol: self.numerics.tol,
            max_iter: self.numerics.max_iter,
            n_iter: self.numerics.n_iter,
            beampattern_phis: self.sweep.beampattern_phis.clone(),
            theta_grid: theta_grid(self.sweep.theta_step),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let sc = &self.scenario;
        for (g, grp) in sc.groups.iter().enumerate() {
            if grp.rf_chains == 0 {
                return invalid(format!("scenario.groups[{g}].rf_chains"), "D_g must be at least 1");
            }
            if !grp.symbol_energy_db.is_finite() {
                return invalid(format!("scenario.groups[{g}].symbol_energy_db"), "must be finite");
            }
        }
        self.scenario().validate().or_else(|e| invalid("scenario", e.to_string()))?;

        let p = &self.pipeline;
        if p.group >= sc.groups.len() {
            return invalid(
                "pipeline.group",
                format!("{} is not a group index (scenario has {})", p.group, sc.groups.len()),
            );
        }
        if p.beamformers.is_empty() {
            return invalid("pipeline.beamformers", "list is empty");
        }
        for (i, b) in p.beamformers.iter().enumerate() {
            if let Err(e) = b.parse::<BeamformerKind>() {
                return invalid(format!("pipeline.beamformers[{i}]"), e.to_string());
            }
            if p.beamformers[..i].contains(b) {
                return invalid(format!("pipeline.beamformers[{i}]"), format!("'{b}' listed twice"));
            }
        }
        if p.combiners.is_empty() {
            return invalid("pipeline.combiners", "list is empty");
        }
        for (i, c) in p.combiners.iter().enumerate() {
            if let Err(e) = c.parse::<CombinerKind>() {
                return invalid(format!("pipeline.combiners[{i}]"), e.to_string());
            }
            if p.combiners[..i].contains(c) {
                return invalid(format!("pipeline.combiners[{i}]"), format!("'{c}' listed twice"));
            }
        }
        if p.estimator != "none" {
            if let Err(e) = p.estimator.parse::<EstimatorKind>() {
                return invalid("pipeline.estimator", e.to_string());
            }
            if p.pilot_len == 0 {
                return invalid("pipeline.pilot_len", "must be at least 1");
            }
            if p.pilot_energy_db.is_some_and(|e| !e.is_finite()) {
                return invalid("pipeline.pilot_energy_db", "must be finite");
            }
        }
        if p.block_len < sc.taps {
            return invalid(
                "pipeline.block_len",
                format!("{} is shorter than the channel memory {}", p.block_len, sc.taps),
            );
        }
        let d = sc.groups[p.group].rf_chains;
        let fixed = self
            .beamformers()
            .iter()
            .any(|k| matches!(k, BeamformerKind::FixedOrdered | BeamformerKind::FixedInterlaced));
        if fixed && !sc.antennas.is_multiple_of(d) {
            return invalid(
                "pipeline.beamformers",
                format!("fixed subarrays need M = {} divisible by D_g = {d}", sc.antennas),
            );
        }

        let s = &self.sweep;
        let in_range = |x: f64| x.is_finite() && (-90.0..=90.0).contains(&x);
        if !in_range(s.phi_start) || !in_range(s.phi_stop) {
            return invalid("sweep", "phi_start and phi_stop must lie in [-90, 90]");
        }
        if linear_grid(s.phi_start, s.phi_stop, s.phi_step).is_err() {
            return invalid("sweep.phi_step", "need phi_step > 0 and phi_stop >= phi_start");
        }
        if let Some(p) = s.beampattern_phis.iter().find(|p| !in_range(**p)) {
            return invalid("sweep.beampattern_phis", format!("{p} outside [-90, 90]"));
        }
        if !(s.theta_step > 0.0 && s.theta_step <= 180.0) {
            return invalid("sweep.theta_step", "must be in (0, 180]");
        }

        if self.mc.trials == 0 {
            return invalid("mc.trials", "must be at least 1");
        }
        let n = &self.numerics;
        if !(n.tol > 0.0) {
            return invalid("numerics.tol", "must be positive");
        }
        if n.max_iter == 0 {
            return invalid("numerics.max_iter", "must be at least 1");
        }
        if n.n_iter == 0 {
            return invalid("numerics.n_iter", "must be at least 1");
        }
        if n.n_quad < 8 {
            return invalid("numerics.n_quad", "must be at least 8");
        }
        if self.output.cdf_points < 2 {
            return invalid("output.cdf_points", "must be at least 2");
        }
        Ok(())
    }
}

/// The bundled four-group reference scenario file.
pub const TABLE1_CFG: &str = include_str!("../scenarios/table1.cfg");

/// Bundled reference configuration with `M` antennas; RF-chain counts are capped at `M`.
pub fn table1_scaled(antennas: usize) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = parse_config(TABLE1_CFG)?;
    cfg.scenario.antennas = antennas;
    for g in &mut cfg.scenario.groups {
        g.rf_chains = g.rf_chains.min(antennas);
    }
    cfg.validate()?;
    Ok(cfg)
}

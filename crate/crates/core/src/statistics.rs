//! Group signal and interference-plus-noise covariances, their reduced
//! (post analog stage) versions and the expected-SINR trace ratio.

use crate::channel::{CovarianceSet, Scenario};
use crate::error::{Error, Result};
use crate::numerics::{c, identity, qr, trace, CMat};

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStatistics {
    /// `R_s = (E_s/K) Σ_m Σ_l R_l` of the intended group.
    pub r_s: CMat,
    /// Other groups' signal covariance plus `N_0 I`.
    pub r_eta: CMat,
    pub noise_power: f64,
    pub energy_per_user: f64,
    pub num_users: usize,
}

impl GroupStatistics {
    pub fn antennas(&self) -> usize {
        self.r_s.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedStatistics {
    pub r_s: CMat,
    pub r_eta: CMat,
}

fn group_signal(cov: &CovarianceSet, scn: &Scenario, g: usize) -> CMat {
    let grp = &scn.groups[g];
    let sum = cov.groups[g].iter().fold(CMat::zeros(cov.antennas, cov.antennas), |acc, u| acc + u.sum(cov.antennas));
    sum * c(grp.energy_per_user())
}

pub fn group_statistics(cov: &CovarianceSet, scn: &Scenario, g: usize) -> Result<GroupStatistics> {
    let grp = scn.group(g)?;
    if cov.groups.len() != scn.groups.len() || cov.antennas != scn.antennas {
        return Err(Error::Dimension {
            op: "group_statistics",
            detail: "covariance set does not match scenario".into(),
        });
    }
    let m = scn.antennas;
    let mut r_eta = identity(m) * c(scn.noise_power);
    for gp in (0..scn.groups.len()).filter(|&gp| gp != g) {
        r_eta += group_signal(cov, scn, gp);
    }
    Ok(GroupStatistics {
        r_s: group_signal(cov, scn, g),
        r_eta,
        noise_power: scn.noise_power,
        energy_per_user: grp.energy_per_user(),
        num_users: grp.num_users(),
    })
}

fn check_beamformer(stats: &GroupStatistics, s: &CMat, op: &'static str) -> Result<()> {
    if s.nrows() != stats.antennas() {
        return Err(Error::Dimension {
            op,
            detail: format!("beamformer has {} rows, expected {}", s.nrows(), stats.antennas()),
        });
    }
    // rank check only; the factor itself is not needed
    qr(s).map(|_| ()).map_err(|e| match e {
        Error::RankDeficient { column, pivot, .. } => Error::RankDeficient { op, column, pivot },
        other => other,
    })
}

/// `S^H R_s S` and `S^H R_eta S`.
pub fn reduce(stats: &GroupStatistics, s: &CMat) -> Result<ReducedStatistics> {
    check_beamformer(stats, s, "reduce")?;
    let sh = s.adjoint();
    Ok(ReducedStatistics { r_s: &sh * &stats.r_s * s, r_eta: &sh * &stats.r_eta * s })
}

/// `tr(S^H R_s S) / tr(S^H R_eta S)` as a linear ratio.
pub fn expected_sinr(stats: &GroupStatistics, s: &CMat) -> Result<f64> {
    check_beamformer(stats, s, "expected_sinr")?;
    Ok(trace_ratio(stats, s))
}

/// Trace ratio without the rank check, for callers that already know `S`
/// has full column rank.
pub(crate) fn trace_ratio(stats: &GroupStatistics, s: &CMat) -> f64 {
    let sh = s.adjoint();
    let num = trace(&(&sh * &stats.r_s * s)).re;
    let den = trace(&(&sh * &stats.r_eta * s)).re;
    num / den
}

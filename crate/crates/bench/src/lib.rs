//! Shared fixtures for the criterion benches.

use jsdm_core::channel::{build_covariances, CovarianceSet};
use jsdm_core::geb::compute_geb;
use jsdm_core::statistics::group_statistics;
use jsdm_core::{GroupStatistics, Scenario, UnconstrainedBeamformer};

pub struct Fixture {
    pub scenario: Scenario,
    pub covariances: CovarianceSet,
    pub stats: GroupStatistics,
    pub geb: UnconstrainedBeamformer,
}

/// Reference layout at `antennas` elements, all groups at 40 dB, shifted by `phi` degrees.
pub fn table1(antennas: usize, rf_chains: usize, phi: f64) -> Fixture {
    let scenario = Scenario::table1(antennas, [rf_chains; 4], [1e4; 4]).with_phi(phi);
    let covariances = build_covariances(&scenario).expect("valid scenario");
    let stats = group_statistics(&covariances, &scenario, 0).expect("group 0 exists");
    let geb = compute_geb(&stats, rf_chains).expect("geb");
    Fixture { scenario, covariances, stats, geb }
}

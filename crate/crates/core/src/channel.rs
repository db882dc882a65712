//! Scenario geometry, one-ring covariance matrices and correlated Rayleigh
//! channel sampling for a half-wavelength ULA.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{c, psd_sqrt, CMat, CVec};
use crate::rng::{complex_gaussian, derive_seed, rng_from_seed};

/// Default number of midpoint-rule nodes per multipath component.
pub const DEFAULT_QUAD_POINTS: usize = 200;

/// One multipath component of a user: delay tap, mean AoA and angular spread.
#[derive(Debug, Clone, PartialEq)]
pub struct Mpc {
    pub delay: usize,
    pub aoa_deg: f64,
    pub spread_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    /// Total channel power γ, i.e. the sum of CCM traces over delays.
    pub gain: f64,
    pub mpcs: Vec<Mpc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupProfile {
    pub users: Vec<UserProfile>,
    pub rf_chains: usize,
    /// Linear symbol energy of the whole group, split evenly across users.
    pub symbol_energy: f64,
    /// Mobile groups have all their AoAs offset by the scenario's shift angle.
    pub mobile: bool,
}

impl GroupProfile {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Per-user symbol energy `E_s / K`.
    pub fn energy_per_user(&self) -> f64 {
        self.symbol_energy / self.users.len() as f64
    }
}

/// Mean AoA of one delay cluster of a group, averaged over the users that
/// have an MPC at that delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub delay: usize,
    pub mean_aoa_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub antennas: usize,
    /// Total number of delay taps `L`.
    pub taps: usize,
    pub noise_power: f64,
    pub groups: Vec<GroupProfile>,
    /// Shift angle applied to mobile groups, degrees.
    pub phi_deg: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.antennas == 0 {
            return bad("antenna count must be at least 1".into());
        }
        if self.taps == 0 {
            return bad("tap count L must be at least 1".into());
        }
        if !(self.noise_power > 0.0) || !self.noise_power.is_finite() {
            return bad(format!("noise power must be positive, got {}", self.noise_power));
        }
        if self.groups.is_empty() {
            return bad("scenario has no groups".into());
        }
        if !self.phi_deg.is_finite() {
            return bad("shift angle must be finite".into());
        }
        for (g, grp) in self.groups.iter().enumerate() {
            if grp.users.is_empty() {
                return bad(format!("group {g} has no users"));
            }
            if grp.rf_chains == 0 || grp.rf_chains > self.antennas {
                return bad(format!("group {g}: rf_chains = {} must be in 1..={}", grp.rf_chains, self.antennas));
            }
            if !(grp.symbol_energy >= 0.0) || !grp.symbol_energy.is_finite() {
                return bad(format!("group {g}: symbol energy must be non-negative"));
            }
            for (m, user) in grp.users.iter().enumerate() {
                if !(user.gain > 0.0) || !user.gain.is_finite() {
                    return bad(format!("group {g} user {m}: gain must be positive"));
                }
                if user.mpcs.is_empty() {
                    return bad(format!("group {g} user {m}: no active multipath components"));
                }
                let mut seen = vec![false; self.taps];
                for mpc in &user.mpcs {
                    if mpc.delay >= self.taps {
                        return bad(format!("group {g} user {m}: delay {} outside 0..{}", mpc.delay, self.taps));
                    }
                    if seen[mpc.delay] {
                        return bad(format!("group {g} user {m}: duplicate delay {}", mpc.delay));
                    }
                    seen[mpc.delay] = true;
                    if !(mpc.spread_deg > 0.0) || !mpc.spread_deg.is_finite() {
                        return bad(format!("group {g} user {m}: angular spread must be positive"));
                    }
                    if !mpc.aoa_deg.is_finite() {
                        return bad(format!("group {g} user {m}: AoA must be finite"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, g: usize) -> Result<&GroupProfile> {
        self.groups.get(g).ok_or(Error::UnknownGroup(g))
    }

    pub fn with_phi(&self, phi_deg: f64) -> Scenario {
        Scenario { phi_deg, ..self.clone() }
    }

    /// AoA of an MPC of group `g` after the mobility offset.
    pub fn shifted_aoa_deg(&self, g: usize, mpc: &Mpc) -> f64 {
        if self.groups[g].mobile {
            mpc.aoa_deg + self.phi_deg
        } else {
            mpc.aoa_deg
        }
    }

    /// Sorted union of the active delays of all users in group `g`.
    pub fn active_delays(&self, g: usize) -> Result<Vec<usize>> {
        let grp = self.group(g)?;
        let mut d: Vec<usize> = grp.users.iter().flat_map(|u| u.mpcs.iter().map(|m| m.delay)).collect();
        d.sort_unstable();
        d.dedup();
        Ok(d)
    }

    pub fn clusters(&self, g: usize) -> Result<Vec<Cluster>> {
        let grp = self.group(g)?;
        Ok(self
            .active_delays(g)?
            .into_iter()
            .map(|delay| {
                let aoas: Vec<f64> = grp
                    .users
                    .iter()
                    .flat_map(|u| u.mpcs.iter().filter(|m| m.delay == delay))
                    .map(|m| self.shifted_aoa_deg(g, m))
                    .collect();
                Cluster { delay, mean_aoa_deg: aoas.iter().sum::<f64>() / aoas.len() as f64 }
            })
            .collect())
    }

    /// The four-group angle-delay profile with group 0 mobile.
    ///
    /// `rf_chains` and `symbol_energy` (linear) are per group.
    pub fn table1(antennas: usize, rf_chains: [usize; 4], symbol_energy: [f64; 4]) -> Scenario {
        let layout: [&[(usize, [f64; 2])]; 4] = [
            &[(0, [-15.5, -14.5]), (5, [-2.5, -1.5]), (11, [16.5, 17.5])],
            &[(3, [40.5, 41.5]), (9, [20.5, 21.5])],
            &[(8, [-10.5, -9.5]), (17, [-20.5, -19.5])],
            &[(29, [-40.5, -39.5])],
        ];
        let groups = layout
            .iter()
            .enumerate()
            .map(|(g, clusters)| GroupProfile {
                users: (0..2)
                    .map(|m| UserProfile {
                        gain: 1.0,
                        mpcs: clusters
                            .iter()
                            .map(|&(delay, aoas)| Mpc { delay, aoa_deg: aoas[m], spread_deg: 2.0 })
                            .collect(),
                    })
                    .collect(),
                rf_chains: rf_chains[g],
                symbol_energy: symbol_energy[g],
                mobile: g == 0,
            })
            .collect();
        Scenario { antennas, taps: 32, noise_power: 1.0, groups, phi_deg: 0.0 }
    }

    /// Groups 0 and 1 of [`Scenario::table1`] merged into a single mobile
    /// group of four users whose five clusters keep their relative layout
    /// (taken at a shift of 15°) and are centred on the shift angle.
    /// The remaining two groups are fixed interferers.
    pub fn table1_merged(antennas: usize, rf_chains: usize, symbol_energy: [f64; 3]) -> Scenario {
        let base = Scenario::table1(antennas, [1, 1, 1, 1], [1.0; 4]).with_phi(15.0);
        // extreme cluster means at φ = 15°: 0° (delay 0) and 41° (delay 3)
        let centre = 20.5;
        let mut users = Vec::new();
        for g in 0..2 {
            for u in &base.groups[g].users {
                users.push(UserProfile {
                    gain: u.gain,
                    mpcs: u
                        .mpcs
                        .iter()
                        .map(|m| Mpc { aoa_deg: base.shifted_aoa_deg(g, m) - centre, ..m.clone() })
                        .collect(),
                });
            }
        }
        let mut groups = vec![GroupProfile { users, rf_chains, symbol_energy: symbol_energy[0], mobile: true }];
        for (i, g) in [2usize, 3].into_iter().enumerate() {
            let mut grp = base.groups[g].clone();
            grp.symbol_energy = symbol_energy[i + 1];
            grp.rf_chains = rf_chains.min(antennas);
            groups.push(grp);
        }
        Scenario { antennas, taps: 32, noise_power: 1.0, groups, phi_deg: 0.0 }
    }
}

/// Unit-norm ULA steering vector, entry `m` = `exp(j m π sin θ) / sqrt(M)`.
pub fn steering(theta_deg: f64, antennas: usize) -> CVec {
    let s = (theta_deg.to_radians()).sin();
    let amp = 1.0 / (antennas as f64).sqrt();
    CVec::from_fn(antennas, |m, _| Complex64::from_polar(amp, m as f64 * PI * s))
}

/// One-ring CCM with uniform angular power profile, normalized to trace `power`.
///
/// The integral is evaluated with an `n_quad`-point midpoint rule. A ULA
/// covariance is Toeplitz, so only the first column is integrated.
pub fn ccm_one_ring(mu_deg: f64, delta_deg: f64, power: f64, antennas: usize, n_quad: usize) -> CMat {
    assert!(delta_deg > 0.0, "angular spread must be positive");
    assert!(n_quad >= 1);
    let mu = mu_deg.to_radians();
    let delta = delta_deg.to_radians();
    let h = delta / n_quad as f64;
    let sines: Vec<f64> = (0..n_quad).map(|i| (mu - delta / 2.0 + (i as f64 + 0.5) * h).sin()).collect();
    // first column r[d] = E{ u_d u_0^* } = (1/M) mean_i exp(j d π sin θ_i)
    let norm = 1.0 / (antennas as f64 * n_quad as f64);
    let col: Vec<Complex64> = (0..antennas)
        .map(|d| sines.iter().map(|&s| Complex64::from_polar(1.0, d as f64 * PI * s)).sum::<Complex64>() * norm)
        .collect();
    let mut r = CMat::from_fn(antennas, antennas, |p, q| if p >= q { col[p - q] } else { col[q - p].conj() });
    let tr: f64 = r.diagonal().iter().map(|z| z.re).sum();
    r *= c(power / tr);
    r
}

/// Per-user CCMs of the active delays. Inactive delays are implicit zeros.
#[derive(Debug, Clone)]
pub struct UserCovariance {
    /// `(delay, R_l)` sorted by delay.
    pub taps: Vec<(usize, CMat)>,
}

impl UserCovariance {
    pub fn at(&self, delay: usize) -> Option<&CMat> {
        self.taps.iter().find(|(l, _)| *l == delay).map(|(_, r)| r)
    }

    /// `Σ_l R_l`
    pub fn sum(&self, antennas: usize) -> CMat {
        self.taps.iter().fold(CMat::zeros(antennas, antennas), |acc, (_, r)| acc + r)
    }
}

#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub antennas: usize,
    pub taps: usize,
    /// `groups[g][m]`
    pub groups: Vec<Vec<UserCovariance>>,
}

impl CovarianceSet {
    /// `R_l` of user `m` in group `g`; `None` means the zero matrix.
    pub fn ccm(&self, g: usize, m: usize, delay: usize) -> Option<&CMat> {
        self.groups.get(g)?.get(m)?.at(delay)
    }
}

pub fn build_covariances(scn: &Scenario) -> Result<CovarianceSet> {
    build_covariances_with(scn, DEFAULT_QUAD_POINTS)
}

/// Builds every user's per-delay CCMs. A user's gain is split evenly across
/// its active MPCs and mobile-group AoAs are offset by the shift angle.
pub fn build_covariances_with(scn: &Scenario, n_quad: usize) -> Result<CovarianceSet> {
    scn.validate()?;
    if n_quad == 0 {
        return Err(Error::InvalidArgument("n_quad must be positive".into()));
    }
    let groups = scn
        .groups
        .iter()
        .enumerate()
        .map(|(g, grp)| {
            grp.users
                .iter()
                .map(|u| {
                    let power = u.gain / u.mpcs.len() as f64;
                    let mut taps: Vec<(usize, CMat)> = u
                        .mpcs
                        .iter()
                        .map(|m| {
                            let aoa = scn.shifted_aoa_deg(g, m);
                            (m.delay, ccm_one_ring(aoa, m.spread_deg, power, scn.antennas, n_quad))
                        })
                        .collect();
                    taps.sort_by_key(|(l, _)| *l);
                    UserCovariance { taps }
                })
                .collect()
        })
        .collect();
    Ok(CovarianceSet { antennas: scn.antennas, taps: scn.taps, groups })
}

/// Instantaneous channel taps `H_l^(g)` (`M x K_g`) for every group and delay.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `taps[g][l]`; inactive delays hold zero matrices.
    pub taps: Vec<Vec<CMat>>,
    /// Delays with at least one nonzero CCM, per group.
    pub active: Vec<Vec<usize>>,
}

impl ChannelRealization {
    pub fn num_taps(&self) -> usize {
        self.taps.first().map_or(0, |g| g.len())
    }
}

/// Precomputed CCM square roots for repeated sampling.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    antennas: usize,
    taps: usize,
    /// `factors[g][m]` = `(delay, R_l^{1/2})`
    factors: Vec<Vec<Vec<(usize, CMat)>>>,
}

impl ChannelSampler {
    pub fn new(cov: &CovarianceSet) -> Result<Self> {
        let factors = cov
            .groups
            .iter()
            .map(|users| {
                users
                    .iter()
                    .map(|u| u.taps.iter().map(|(l, r)| Ok((*l, psd_sqrt(r)?))).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { antennas: cov.antennas, taps: cov.taps, factors })
    }

    pub fn num_groups(&self) -> usize {
        self.factors.len()
    }

    /// Taps of one group. The stream depends only on `(seed, g)`, so sampling
    /// a single group reproduces that group's part of [`Self::sample`].
    pub fn sample_group(&self, g: usize, seed: u64) -> Vec<CMat> {
        let users = &self.factors[g];
        let mut rng = rng_from_seed(derive_seed(seed, &[g as u64]));
        let mut taps = vec![CMat::zeros(self.antennas, users.len()); self.taps];
        for (m, user) in users.iter().enumerate() {
            for (l, sqrt_r) in user {
                let z = CVec::from_fn(self.antennas, |_, _| complex_gaussian(&mut rng, 1.0));
                taps[*l].set_column(m, &(sqrt_r * z));
            }
        }
        taps
    }

    pub fn active_delays(&self, g: usize) -> Vec<usize> {
        let mut d: Vec<usize> = self.factors[g].iter().flat_map(|u| u.iter().map(|(l, _)| *l)).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    pub fn sample(&self, seed: u64) -> ChannelRealization {
        ChannelRealization {
            taps: (0..self.num_groups()).map(|g| self.sample_group(g, seed)).collect(),
            active: (0..self.num_groups()).map(|g| self.active_delays(g)).collect(),
        }
    }
}

/// Draws `h_l = R_l^{1/2} z` independently for every user and delay.
pub fn sample_channels(cov: &CovarianceSet, seed: u64) -> Result<ChannelRealization> {
    Ok(ChannelSampler::new(cov)?.sample(seed))
}

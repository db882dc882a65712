//! Pilot-based estimation of the effective (post analog stage) channel with
//! LMMSE and pruned LS estimators, and the closed-form nMSE.
//!
//! The stacked channel `h̄` orders entries as user, then delay, then RF
//! chain: index `(m L + l) D + d` holds `[S^H h_l^(m)]_d`. The stacked
//! observation `ȳ` holds `ỹ_n` at `n D + d`.

use num_complex::Complex64;

use crate::channel::{ChannelRealization, CovarianceSet, Scenario};
use crate::error::{Error, Result};
use crate::numerics::{identity, kron, qr, solve_hpd, trace, CMat, CVec};
use crate::rng::{complex_gaussian, derive_seed, qpsk, rng_from_seed, unit_phase};

#[derive(Debug, Clone, PartialEq)]
pub struct PilotBlock {
    /// Pilot length `T`.
    pub len: usize,
    pub taps: usize,
    pub users: usize,
    /// Per-symbol pilot energy.
    pub energy: f64,
    /// Unit-modulus pilot symbols per user.
    pub sequences: Vec<Vec<Complex64>>,
    /// `T x (K L)` equivalent pilot matrix, entries `sqrt(energy) x_{(i-j) mod T}`.
    pub x: CMat,
}

impl PilotBlock {
    /// Pilot block from explicit unit-modulus sequences of equal length.
    pub fn from_sequences(sequences: Vec<Vec<Complex64>>, taps: usize, energy: f64) -> Result<Self> {
        let users = sequences.len();
        let len = sequences.first().map_or(0, |s| s.len());
        if users == 0 || taps == 0 || len == 0 || sequences.iter().any(|s| s.len() != len) {
            return Err(Error::InvalidArgument("pilot sequences must be nonempty and of equal length".into()));
        }
        let amp = energy.sqrt();
        let x = CMat::from_fn(len, users * taps, |i, col| {
            let (m, j) = (col / taps, col % taps);
            let idx = (i as i64 - j as i64).rem_euclid(len as i64) as usize;
            sequences[m][idx] * amp
        });
        Ok(PilotBlock { len, taps, users, energy, sequences, x })
    }

    /// Column of `x` carrying user `m` at delay `l`.
    pub fn column(&self, m: usize, l: usize) -> usize {
        m * self.taps + l
    }

    /// `X ⊗ I_D`
    pub fn expanded(&self, d: usize) -> CMat {
        kron(&self.x, &identity(d))
    }
}

/// Pilots of group `g` at the data symbol energy `E_s / K`.
pub fn build_pilots(scn: &Scenario, g: usize, len: usize, seed: u64) -> Result<PilotBlock> {
    let grp = scn.group(g)?;
    build_pilots_with(grp.num_users(), scn.taps, len, grp.energy_per_user(), seed)
}

/// Random unit-phase pilots, one independent stream per user. Sequences
/// drawn with the same seed are prefixes of each other across lengths.
pub fn build_pilots_with(users: usize, taps: usize, len: usize, energy: f64, seed: u64) -> Result<PilotBlock> {
    if users == 0 || taps == 0 || len == 0 {
        return Err(Error::InvalidArgument("pilot block needs users, taps and length".into()));
    }
    if !(energy >= 0.0) || !energy.is_finite() {
        return Err(Error::InvalidArgument(format!("pilot energy {energy} must be non-negative")));
    }
    let sequences: Vec<Vec<Complex64>> = (0..users)
        .map(|m| {
            let mut rng = rng_from_seed(derive_seed(seed, &[m as u64]));
            (0..len).map(|_| unit_phase(&mut rng)).collect()
        })
        .collect();
    PilotBlock::from_sequences(sequences, taps, energy)
}

/// Stacked effective channel `h̄` of group `g` after analog stage `s`.
pub fn stack_effective_channel(real: &ChannelRealization, g: usize, s: &CMat) -> Result<CVec> {
    let taps = real.taps.get(g).ok_or(Error::UnknownGroup(g))?;
    let d = s.ncols();
    let l_max = taps.len();
    let users = taps[0].ncols();
    let sh = s.adjoint();
    let mut h = CVec::zeros(users * l_max * d);
    for (l, tap) in taps.iter().enumerate() {
        let eff = &sh * tap;
        for m in 0..users {
            h.rows_mut((m * l_max + l) * d, d).copy_from(&eff.column(m));
        }
    }
    Ok(h)
}

/// Block-diagonal covariance of `h̄`: diagonal blocks `S^H R_l S` per user and delay.
pub fn effective_channel_covariance(cov: &CovarianceSet, g: usize, s: &CMat) -> Result<CMat> {
    let users = cov.groups.get(g).ok_or(Error::UnknownGroup(g))?;
    let d = s.ncols();
    let l_max = cov.taps;
    let sh = s.adjoint();
    let mut r = CMat::zeros(users.len() * l_max * d, users.len() * l_max * d);
    for (m, u) in users.iter().enumerate() {
        for (l, r_l) in &u.taps {
            let at = (m * l_max + l) * d;
            r.view_mut((at, at), (d, d)).copy_from(&(&sh * r_l * s));
        }
    }
    Ok(r)
}

/// Stacked observation `ȳ` of group `g` during its pilot phase. Other groups
/// send random data symbols at their own energy, and noise enters through
/// the analog stage.
pub fn receive_pilots(
    pilots: &PilotBlock,
    real: &ChannelRealization,
    s: &CMat,
    scn: &Scenario,
    g: usize,
    seed: u64,
) -> Result<CVec> {
    scn.group(g)?;
    let t_len = pilots.len;
    let d = s.ncols();
    let m_ant = scn.antennas;
    let l_max = real.num_taps();
    if pilots.users != real.taps[g][0].ncols() || pilots.taps != l_max || s.nrows() != m_ant {
        return Err(Error::Dimension {
            op: "receive_pilots",
            detail: "pilots, channel and beamformer disagree".into(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut y = CMat::zeros(m_ant, t_len);
    let amp = pilots.energy.sqrt();
    for &l in &real.active[g] {
        let h = &real.taps[g][l];
        for n in 0..t_len {
            let idx = (n as i64 - l as i64).rem_euclid(t_len as i64) as usize;
            let x = CVec::from_fn(pilots.users, |m, _| pilots.sequences[m][idx] * amp);
            let mut col = y.column_mut(n);
            col += h * x;
        }
    }
    for (gp, grp) in scn.groups.iter().enumerate().filter(|(gp, _)| *gp != g) {
        // data symbols at times -(L-1)..T-1, stored with offset L-1
        let a = grp.energy_per_user().sqrt();
        let data = CMat::from_fn(grp.num_users(), t_len + l_max - 1, |_, _| qpsk(&mut rng) * a);
        for &l in &real.active[gp] {
            let h = &real.taps[gp][l];
            for n in 0..t_len {
                let mut col = y.column_mut(n);
                col += h * data.column(n + l_max - 1 - l);
            }
        }
    }
    let noise = CMat::from_fn(m_ant, t_len, |_, _| complex_gaussian(&mut rng, scn.noise_power));
    let yt = s.adjoint() * (y + noise);
    Ok(CVec::from_fn(t_len * d, |i, _| yt[(i % d, i / d)]))
}

/// `R_ȳ = (X ⊗ I) R_h (X ⊗ I)^H + I_T ⊗ R_η̃` and `R_ȳh̄ = (X ⊗ I) R_h`.
fn observation_covariances(pilots: &PilotBlock, r_h: &CMat, rd_eta: &CMat) -> Result<(CMat, CMat)> {
    let d = rd_eta.nrows();
    let a = pilots.expanded(d);
    if a.ncols() != r_h.nrows() {
        return Err(Error::Dimension {
            op: "chanest",
            detail: format!("R_h is {}x{}, pilots expect {}", r_h.nrows(), r_h.ncols(), a.ncols()),
        });
    }
    let cross = &a * r_h;
    let r_y = &cross * a.adjoint() + kron(&identity(pilots.len), rd_eta);
    Ok((r_y, cross))
}

/// `Z = R_ȳ^{-1} R_ȳh̄`; the estimate is `Z^H ȳ`.
pub fn lmmse_estimator(pilots: &PilotBlock, r_h: &CMat, rd_eta: &CMat) -> Result<CMat> {
    let (r_y, cross) = observation_covariances(pilots, r_h, rd_eta)?;
    solve_hpd(&r_y, &cross)
}

fn ls_on_columns(pilots: &PilotBlock, keep: &[usize], d: usize) -> Result<CMat> {
    let xp = CMat::from_fn(pilots.len, keep.len(), |i, j| pilots.x[(i, keep[j])]);
    let f = qr(&xp).map_err(|_| Error::PilotDesign { pilot_len: pilots.len })?;
    let r_inv_h =
        f.r.adjoint()
            .solve_lower_triangular(&identity(keep.len()))
            .ok_or(Error::PilotDesign { pilot_len: pilots.len })?;
    let zp = f.q * r_inv_h;
    let mut z = CMat::zeros(pilots.len, pilots.x.ncols());
    for (j, &col) in keep.iter().enumerate() {
        z.set_column(col, &zp.column(j));
    }
    Ok(kron(&z, &identity(d)))
}

/// LS estimator on the active delays of each user; inactive taps are
/// estimated as exactly zero.
pub fn ls_estimator(pilots: &PilotBlock, active: &[Vec<usize>], d: usize) -> Result<CMat> {
    if active.len() != pilots.users {
        return Err(Error::Dimension {
            op: "ls_estimator",
            detail: format!("{} active lists for {} users", active.len(), pilots.users),
        });
    }
    let mut keep: Vec<usize> = Vec::new();
    for (m, delays) in active.iter().enumerate() {
        for &l in delays {
            if l >= pilots.taps {
                return Err(Error::InvalidArgument(format!("delay {l} outside 0..{}", pilots.taps)));
            }
            keep.push(pilots.column(m, l));
        }
    }
    keep.sort_unstable();
    keep.dedup();
    ls_on_columns(pilots, &keep, d)
}

/// LS estimator over every delay tap, without pruning.
pub fn ls_estimator_unpruned(pilots: &PilotBlock, d: usize) -> Result<CMat> {
    let keep: Vec<usize> = (0..pilots.x.ncols()).collect();
    ls_on_columns(pilots, &keep, d)
}

/// Per-user active delays of group `g`.
pub fn active_delays_per_user(scn: &Scenario, g: usize) -> Result<Vec<Vec<usize>>> {
    Ok(scn
        .group(g)?
        .users
        .iter()
        .map(|u| {
            let mut d: Vec<usize> = u.mpcs.iter().map(|m| m.delay).collect();
            d.sort_unstable();
            d
        })
        .collect())
}

/// Closed-form `E‖h̄ − Z^H ȳ‖² / tr R_h`.
pub fn nmse(z: &CMat, pilots: &PilotBlock, r_h: &CMat, rd_eta: &CMat) -> Result<f64> {
    let tr_h = trace(r_h).re;
    if !(tr_h > 0.0) {
        return Err(Error::ZeroChannelEnergy);
    }
    let (r_y, cross) = observation_covariances(pilots, r_h, rd_eta)?;
    if z.shape() != cross.shape() {
        return Err(Error::Dimension {
            op: "nmse",
            detail: format!("estimator is {:?}, expected {:?}", z.shape(), cross.shape()),
        });
    }
    let zh = z.adjoint();
    let quad = trace(&(&zh * &r_y * z)).re;
    let lin = trace(&(&zh * &cross)).re;
    Ok((tr_h + quad - 2.0 * lin) / tr_h)
}

/// Estimate `Z^H ȳ`.
pub fn apply_estimator(z: &CMat, y: &CVec) -> CVec {
    z.adjoint() * y
}

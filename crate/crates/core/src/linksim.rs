//! SC-FDE uplink link simulation and semi-analytic output SINR.
//!
//! Capacities come from the Bussgang decomposition of the soft outputs,
//! evaluated in closed form per channel realization. The symbol-level block
//! simulation exists to cross-check that evaluation.

use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::channel::{ChannelRealization, ChannelSampler, CovarianceSet, Scenario};
use crate::digital::{lmmse_combiners, zf_combiners, CombinerBank, EffectiveChannel};
use crate::error::{Error, Result};
use crate::numerics::{c, CMat};
use crate::rng::{complex_gaussian, derive_seed, qpsk, rng_from_seed};
use crate::statistics::{group_statistics, reduce, ReducedStatistics};

pub const DEFAULT_BLOCK_LEN: usize = 64;

/// Symbol alphabet used by the block simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Constellation {
    /// Unit-energy QPSK.
    #[default]
    Qpsk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockConfig {
    /// Block length `N`.
    pub n: usize,
    pub cp_len: usize,
    pub constellation: Constellation,
    pub trials: usize,
    pub seed: u64,
}

impl BlockConfig {
    /// Default block length with the cyclic prefix equal to the channel memory.
    pub fn for_scenario(scn: &Scenario, trials: usize, seed: u64) -> Self {
        Self { n: DEFAULT_BLOCK_LEN, cp_len: scn.taps, constellation: Constellation::Qpsk, trials, seed }
    }

    pub fn validate(&self, taps: usize) -> Result<()> {
        if self.n < taps {
            return Err(Error::BlockLength { n: self.n, l: taps });
        }
        if self.cp_len < taps {
            return Err(Error::InvalidArgument(format!(
                "cyclic prefix {} shorter than channel memory {taps}",
                self.cp_len
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CombinerKind {
    Zf,
    Lmmse,
}

impl CombinerKind {
    pub fn label(self) -> &'static str {
        match self {
            CombinerKind::Zf => "zf",
            CombinerKind::Lmmse => "lmmse",
        }
    }
}

impl std::str::FromStr for CombinerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [CombinerKind::Zf, CombinerKind::Lmmse]
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown combiner '{s}'")))
    }
}

pub fn build_combiners(
    kind: CombinerKind,
    eff: &EffectiveChannel,
    rd: &ReducedStatistics,
    e_s: f64,
    k_g: usize,
) -> Result<CombinerBank> {
    match kind {
        CombinerKind::Zf => zf_combiners(eff),
        CombinerKind::Lmmse => lmmse_combiners(eff, rd, e_s, k_g),
    }
}

/// Row-wise unitary DFT (`inverse = false`) or its inverse.
pub fn normalized_dft_rows(x: &CMat, inverse: bool) -> CMat {
    let n = x.ncols();
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let scale = c(1.0 / (n as f64).sqrt());
    let mut out = x.clone();
    let mut buf = vec![c(0.0); n];
    for r in 0..x.nrows() {
        for (k, z) in buf.iter_mut().enumerate() {
            *z = x[(r, k)];
        }
        fft.process(&mut buf);
        for (k, z) in buf.iter().enumerate() {
            out[(r, k)] = z * scale;
        }
    }
    out
}

/// Analog stage and per-bin combiners of one receiving group.
#[derive(Debug, Clone)]
pub struct GroupReceiver {
    pub group: usize,
    /// Overall `M x D` analog stage.
    pub analog: CMat,
    pub combiners: CombinerBank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutput {
    /// Transmitted symbols per group, `K_g x N`.
    pub symbols: Vec<CMat>,
    /// Noise-free contribution of each group at the antennas, `M x N`.
    pub contributions: Vec<CMat>,
    /// Total received block including noise, `M x N`.
    pub received: CMat,
    /// Soft estimates per receiver, `K_g x N`.
    pub estimates: Vec<CMat>,
}

/// Circular convolution of the group taps with its symbol block.
fn convolve(taps: &[CMat], active: &[usize], x: &CMat) -> CMat {
    let n = x.ncols();
    let m = taps[0].nrows();
    let mut y = CMat::zeros(m, n);
    for &l in active {
        let h = &taps[l];
        for t in 0..n {
            let src = (t + n - l % n) % n;
            let mut col = y.column_mut(t);
            col += h * x.column(src);
        }
    }
    y
}

/// One SC-FDE block: i.i.d. QPSK symbols at energy `E_s / K` per user, cyclic
/// convolution through every group's taps, AWGN of power `N_0` per antenna,
/// then per receiver the analog stage, a unitary DFT, per-bin combining and
/// the inverse DFT.
pub fn simulate_block(
    scn: &Scenario,
    real: &ChannelRealization,
    receivers: &[GroupReceiver],
    cfg: &BlockConfig,
    seed: u64,
) -> Result<BlockOutput> {
    cfg.validate(real.num_taps())?;
    if real.taps.len() != scn.num_groups() {
        return Err(Error::Dimension {
            op: "simulate_block",
            detail: "realization and scenario disagree on the number of groups".into(),
        });
    }
    let n = cfg.n;
    let m = scn.antennas;
    let mut rng = rng_from_seed(seed);
    let mut symbols = Vec::with_capacity(scn.num_groups());
    let mut contributions = Vec::with_capacity(scn.num_groups());
    for (g, grp) in scn.groups.iter().enumerate() {
        let amp = grp.energy_per_user().sqrt();
        let x = CMat::from_fn(grp.num_users(), n, |_, _| match cfg.constellation {
            Constellation::Qpsk => qpsk(&mut rng) * amp,
        });
        contributions.push(convolve(&real.taps[g], &real.active[g], &x));
        symbols.push(x);
    }
    let noise = CMat::from_fn(m, n, |_, _| complex_gaussian(&mut rng, scn.noise_power));
    let received = contributions.iter().fold(noise, |acc, y| acc + y);
    let estimates = receivers
        .iter()
        .map(|rx| {
            if rx.combiners.w.len() != n {
                return Err(Error::Dimension {
                    op: "simulate_block",
                    detail: format!("combiner bank has {} bins, block has {n}", rx.combiners.w.len()),
                });
            }
            let yf = normalized_dft_rows(&(rx.analog.adjoint() * &received), false);
            let k_g = rx.combiners.w[0].ncols();
            let mut xf = CMat::zeros(k_g, n);
            for (k, w) in rx.combiners.w.iter().enumerate() {
                xf.set_column(k, &(w.adjoint() * yf.column(k)));
            }
            Ok(normalized_dft_rows(&xf, true))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockOutput { symbols, contributions, received, estimates })
}

/// Bussgang decomposition `x̂ = a x + b` of one user's soft output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserLinkReport {
    pub a: num_complex::Complex64,
    /// Power of the residual `b`.
    pub b_power: f64,
    pub sinr: f64,
    /// `log2(1 + sinr)` in bits/s/Hz.
    pub capacity: f64,
}

/// Semi-analytic report for user `m`: `a = mean_k w_k^H Λ_k e_m`,
/// `E|x̂|² = mean_k w_k^H (ρ Λ_k Λ_k^H + R_η̃) w_k` and `b = E|x̂|² − ρ|a|²`
/// with `ρ = E_s / K`.
pub fn bussgang_report(
    eff: &EffectiveChannel,
    combiners: &CombinerBank,
    rd: &ReducedStatistics,
    e_s: f64,
    k_g: usize,
    m: usize,
) -> Result<UserLinkReport> {
    let n = eff.block_len();
    if combiners.w.len() != n {
        return Err(Error::Dimension {
            op: "bussgang_report",
            detail: format!("{} combiners for {n} bins", combiners.w.len()),
        });
    }
    if m >= eff.users() {
        return Err(Error::InvalidArgument(format!("user {m} out of range")));
    }
    let rho = e_s / k_g as f64;
    let mut a = c(0.0);
    let mut power = 0.0;
    for (w, lam) in combiners.w.iter().zip(&eff.freq) {
        let wm = w.column(m);
        a += wm.dotc(&lam.column(m));
        let lw = lam.adjoint() * wm;
        power += rho * lw.norm_squared() + wm.dotc(&(&rd.r_eta * wm)).re;
    }
    a /= c(n as f64);
    power /= n as f64;
    let signal = rho * a.norm_sqr();
    let mut b_power = power - signal;
    if b_power < 0.0 {
        if b_power < -1e-12 * power.max(1.0) {
            return Err(Error::NegativePower { value: b_power });
        }
        b_power = 0.0;
    }
    let sinr = if signal == 0.0 { 0.0 } else { signal / b_power };
    Ok(UserLinkReport { a, b_power, sinr, capacity: (1.0 + sinr).log2() })
}

pub fn bussgang_reports(
    eff: &EffectiveChannel,
    combiners: &CombinerBank,
    rd: &ReducedStatistics,
    e_s: f64,
    k_g: usize,
) -> Result<Vec<UserLinkReport>> {
    (0..eff.users()).map(|m| bussgang_report(eff, combiners, rd, e_s, k_g, m)).collect()
}

/// Running estimate of `a`, `b` and the SINR from transmitted and estimated symbols.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BussgangAccumulator {
    cross: num_complex::Complex64,
    x_power: f64,
    xhat_power: f64,
    count: usize,
}

impl BussgangAccumulator {
    pub fn push(&mut self, xhat: num_complex::Complex64, x: num_complex::Complex64) {
        self.cross += xhat * x.conj();
        self.x_power += x.norm_sqr();
        self.xhat_power += xhat.norm_sqr();
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `E{x̂ x*} / E{|x|²}`
    pub fn a(&self) -> num_complex::Complex64 {
        self.cross / self.x_power
    }

    pub fn sinr(&self) -> f64 {
        let n = self.count as f64;
        let signal = self.a().norm_sqr() * self.x_power / n;
        signal / (self.xhat_power / n - signal)
    }
}

/// Mean and standard error of per-user capacities over channel trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    /// `samples[trial][user]`
    pub samples: Vec<Vec<f64>>,
}

impl CapacityEstimate {
    pub fn from_samples(samples: Vec<Vec<f64>>) -> Self {
        let t = samples.len() as f64;
        let users = samples.first().map_or(0, |s| s.len());
        let mean: Vec<f64> = (0..users).map(|m| samples.iter().map(|s| s[m]).sum::<f64>() / t).collect();
        let std_err = (0..users)
            .map(|m| {
                if samples.len() < 2 {
                    return 0.0;
                }
                let var = samples.iter().map(|s| (s[m] - mean[m]).powi(2)).sum::<f64>() / (t - 1.0);
                (var / t).sqrt()
            })
            .collect();
        Self { mean, std_err, samples }
    }

    /// Average over users.
    pub fn average(&self) -> f64 {
        self.mean.iter().sum::<f64>() / self.mean.len() as f64
    }
}

/// Ergodic capacities of group `g` for several analog stages and combiner
/// kinds over common channel draws: `out[analog][kind]`.
///
/// The analog stages stay fixed while only the intended group's channel is
/// redrawn; other groups enter through the statistical `R_η̃`.
pub fn ergodic_capacities(
    scn: &Scenario,
    cov: &CovarianceSet,
    g: usize,
    analogs: &[CMat],
    kinds: &[CombinerKind],
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<CapacityEstimate>>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if n < scn.taps {
        return Err(Error::BlockLength { n, l: scn.taps });
    }
    let grp = scn.group(g)?;
    let stats = group_statistics(cov, scn, g)?;
    let reduced = analogs.iter().map(|s| reduce(&stats, s)).collect::<Result<Vec<_>>>()?;
    let sampler = ChannelSampler::new(cov)?;
    let k_g = grp.num_users();
    // per_trial[t][analog][kind] -> per-user capacities
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let taps = sampler.sample_group(g, derive_seed(seed, &[t as u64]));
            analogs
                .iter()
                .zip(&reduced)
                .map(|(s, rd)| {
                    let sh = s.adjoint();
                    let eff = EffectiveChannel::from_taps(taps.iter().map(|h| &sh * h).collect(), n)?;
                    kinds
                        .iter()
                        .map(|&kind| {
                            let bank = build_combiners(kind, &eff, rd, grp.symbol_energy, k_g)?;
                            Ok(bussgang_reports(&eff, &bank, rd, grp.symbol_energy, k_g)?
                                .iter()
                                .map(|r| r.capacity)
                                .collect::<Vec<f64>>())
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..analogs.len())
        .map(|a| {
            (0..kinds.len())
                .map(|k| CapacityEstimate::from_samples(per_trial.iter().map(|tr| tr[a][k].clone()).collect()))
                .collect()
        })
        .collect())
}

pub fn ergodic_capacity(
    scn: &Scenario,
    cov: &CovarianceSet,
    g: usize,
    analog: &CMat,
    kind: CombinerKind,
    cfg: &BlockConfig,
) -> Result<CapacityEstimate> {
    cfg.validate(scn.taps)?;
    let mut out = ergodic_capacities(scn, cov, g, std::slice::from_ref(analog), &[kind], cfg.n, cfg.trials, cfg.seed)?;
    Ok(out.remove(0).remove(0))
}

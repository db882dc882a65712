//! Frequency-domain effective channels and per-bin ZF / LMMSE combiners.

use rustfft::FftPlanner;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::numerics::{c, identity, qr, solve_hpd, CMat};
use crate::statistics::ReducedStatistics;

/// Channel seen after the analog stage, per delay tap and per DFT bin.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    /// `S^H H_l`, one `D x K` matrix per tap.
    pub taps: Vec<CMat>,
    /// `Σ_l S^H H_l exp(-j2πkl/N)`, one matrix per bin.
    pub freq: Vec<CMat>,
}

impl EffectiveChannel {
    pub fn block_len(&self) -> usize {
        self.freq.len()
    }

    pub fn rf_chains(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn users(&self) -> usize {
        self.taps[0].ncols()
    }

    /// Builds the bin responses of arbitrary `D x K` taps with an `N`-point FFT.
    pub fn from_taps(taps: Vec<CMat>, n: usize) -> Result<Self> {
        let l = taps.len();
        if l == 0 {
            return Err(Error::InvalidArgument("effective channel needs at least one tap".into()));
        }
        if n < l {
            return Err(Error::BlockLength { n, l });
        }
        let (d, k) = taps[0].shape();
        if taps.iter().any(|t| t.shape() != (d, k)) {
            return Err(Error::Dimension { op: "effective_channel", detail: "taps differ in shape".into() });
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        let mut freq = vec![CMat::zeros(d, k); n];
        let mut buf = vec![c(0.0); n];
        for row in 0..d {
            for col in 0..k {
                buf.iter_mut().for_each(|z| *z = c(0.0));
                for (slot, t) in buf.iter_mut().zip(&taps) {
                    *slot = t[(row, col)];
                }
                fft.process(&mut buf);
                for (f, z) in freq.iter_mut().zip(&buf) {
                    f[(row, col)] = *z;
                }
            }
        }
        Ok(Self { taps, freq })
    }
}

/// Effective channel of source group `g_src` after analog stage `s`
/// (the overall `S_c S_cm` for constrained designs).
pub fn effective_channel(s: &CMat, real: &ChannelRealization, g_src: usize, n: usize) -> Result<EffectiveChannel> {
    let taps = real.taps.get(g_src).ok_or(Error::UnknownGroup(g_src))?;
    let m = taps.first().map_or(0, |t| t.nrows());
    if s.nrows() != m {
        return Err(Error::Dimension {
            op: "effective_channel",
            detail: format!("beamformer has {} rows, channel has {m} antennas", s.nrows()),
        });
    }
    if n < taps.len() {
        return Err(Error::BlockLength { n, l: taps.len() });
    }
    let sh = s.adjoint();
    EffectiveChannel::from_taps(taps.iter().map(|h| &sh * h).collect(), n)
}

/// Per-bin combiners `W_k` (`D x K`); the soft estimate of bin `k` is `W_k^H ỹ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerBank {
    pub w: Vec<CMat>,
}

/// `W_k = Λ_k (Λ_k^H Λ_k)^{-1}`, evaluated as `Q R^{-H}` from `Λ_k = QR`.
pub fn zf_combiners(eff: &EffectiveChannel) -> Result<CombinerBank> {
    let w = eff
        .freq
        .iter()
        .enumerate()
        .map(|(bin, lam)| {
            let f = qr(lam).map_err(|_| Error::SingularBin { bin })?;
            let k = lam.ncols();
            let r_inv_h = f.r.adjoint().solve_lower_triangular(&identity(k)).ok_or(Error::SingularBin { bin })?;
            Ok(f.q * r_inv_h)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CombinerBank { w })
}

/// `W_k = (ρ Λ_k Λ_k^H + R_η̃)^{-1} ρ Λ_k` with `ρ = E_s / K` and the reduced
/// statistical interference-plus-noise covariance `R_η̃`.
pub fn lmmse_combiners(eff: &EffectiveChannel, rd: &ReducedStatistics, e_s: f64, k_g: usize) -> Result<CombinerBank> {
    let d = eff.rf_chains();
    if rd.r_eta.shape() != (d, d) {
        return Err(Error::Dimension {
            op: "lmmse_combiners",
            detail: format!("reduced covariance is {:?}, expected {d}x{d}", rd.r_eta.shape()),
        });
    }
    let rho = c(e_s / k_g as f64);
    let w = eff
        .freq
        .iter()
        .map(|lam| {
            let ry = lam * lam.adjoint() * rho + &rd.r_eta;
            solve_hpd(&ry, &(lam * rho))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CombinerBank { w })
}

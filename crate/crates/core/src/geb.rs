//! Generalized eigenbeamformer and the reduced-dimension mutual information
//! it maximizes.

use crate::error::{Error, Result};
use crate::numerics::{c, generalized_hermitian_eig, log2_det_hpd, qr, CMat};
use crate::statistics::GroupStatistics;

#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedBeamformer {
    /// `M x D` with orthonormal columns spanning the dominant generalized
    /// eigenvectors of `(R_s, R_eta)`.
    pub s: CMat,
    /// The `D` largest generalized eigenvalues, descending.
    pub gen_eigenvalues: Vec<f64>,
}

impl UnconstrainedBeamformer {
    pub fn antennas(&self) -> usize {
        self.s.nrows()
    }

    pub fn rf_chains(&self) -> usize {
        self.s.ncols()
    }
}

/// Rotates each column so that its largest-magnitude entry is real positive.
fn fix_column_phases(v: &mut CMat) {
    for mut col in v.column_iter_mut() {
        let pivot = col.iter().copied().fold(c(0.0), |best, z| if z.norm() > best.norm() { z } else { best });
        if pivot.norm() > 0.0 {
            let rot = pivot.conj() / pivot.norm();
            col *= rot;
        }
    }
}

pub fn compute_geb(stats: &GroupStatistics, d: usize) -> Result<UnconstrainedBeamformer> {
    let m = stats.antennas();
    if d == 0 || d > m {
        return Err(Error::InvalidArgument(format!("number of RF chains {d} must be in 1..={m}")));
    }
    let eig = generalized_hermitian_eig(&stats.r_s, &stats.r_eta)?;
    let mut v = eig.vectors.columns(0, d).into_owned();
    fix_column_phases(&mut v);
    let q = qr(&v)?.q;
    Ok(UnconstrainedBeamformer { s: q, gen_eigenvalues: eig.values[..d].to_vec() })
}

/// `log2 det(I + (S^H R_eta S)^{-1} S^H R_s S)` in bits.
///
/// Evaluated on an orthonormal basis `Q` of `span(S)` as
/// `log2 det(Q^H (R_s + R_eta) Q) - log2 det(Q^H R_eta Q)`, which equals the
/// expression above for any full-rank `S` and stays well conditioned when
/// `S` is not.
pub fn reduced_mutual_info(stats: &GroupStatistics, s: &CMat) -> Result<f64> {
    if s.nrows() != stats.antennas() {
        return Err(Error::Dimension {
            op: "reduced_mutual_info",
            detail: format!("beamformer has {} rows, expected {}", s.nrows(), stats.antennas()),
        });
    }
    let q = qr(s)?.q;
    let qh = q.adjoint();
    let eta = &qh * &stats.r_eta * &q;
    let total = &eta + &qh * &stats.r_s * &q;
    Ok(log2_det_hpd(&total)? - log2_det_hpd(&eta)?)
}

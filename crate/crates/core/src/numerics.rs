//! Dense complex linear-algebra kernels.
//!
//! Every decomposition used elsewhere in the crate goes through this module.
//! Hermitian inputs are symmetrized as `(A + A^H) / 2` before factorization,
//! eigenvalues are returned in descending order, and factor phases are
//! normalized so results are deterministic.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Eigenpairs with values sorted non-increasing and unit-norm eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

/// Thin SVD `A = U diag(s) V^H` with `s` non-increasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v: CMat,
}

/// Thin QR with `R` carrying a real positive diagonal.
#[derive(Debug, Clone)]
pub struct Qr {
    pub q: CMat,
    pub r: CMat,
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5)
}

pub fn ensure_finite(a: &CMat, op: &'static str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

fn ensure_square(a: &CMat, op: &'static str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension {
            op,
            detail: format!("expected square matrix, got {}x{}", a.nrows(), a.ncols()),
        });
    }
    Ok(())
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest absolute eigenvalue of a Hermitian matrix.
pub fn spectral_norm_hermitian(a: &CMat) -> f64 {
    let e = hermitian_part(a).symmetric_eigenvalues();
    e.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn trace(a: &CMat) -> Complex64 {
    a.diagonal().iter().sum()
}

pub fn hermitian_eig(a: &CMat) -> Result<EigDecomposition> {
    ensure_square(a, "hermitian_eig")?;
    ensure_finite(a, "hermitian_eig")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(EigDecomposition { values: Vec::new(), vectors: CMat::zeros(0, 0) });
    }
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let norm = col.norm();
        vectors.set_column(dst, &(col / c(norm)));
    }
    Ok(EigDecomposition { values, vectors })
}

/// Solves `A v = λ B v` for Hermitian `A` and Hermitian positive-definite `B`
/// by reducing through the Cholesky factor `B = L L^H`.
pub fn generalized_hermitian_eig(a: &CMat, b: &CMat) -> Result<EigDecomposition> {
    ensure_square(a, "generalized_hermitian_eig")?;
    ensure_square(b, "generalized_hermitian_eig")?;
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension {
            op: "generalized_hermitian_eig",
            detail: format!("A is {}x{}, B is {}x{}", a.nrows(), a.ncols(), b.nrows(), b.ncols()),
        });
    }
    ensure_finite(a, "generalized_hermitian_eig")?;
    ensure_finite(b, "generalized_hermitian_eig")?;
    let n = a.nrows();
    let bh = hermitian_part(b);
    let b_eigs = bh.clone().symmetric_eigenvalues();
    let b_norm = b_eigs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let b_min = b_eigs.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let threshold = 1e-12 * b_norm;
    if n > 0 && !(b_min > threshold) {
        return Err(Error::NotPositiveDefinite { eigenvalue: b_min, threshold });
    }
    let chol = bh.cholesky().ok_or(Error::NotPositiveDefinite { eigenvalue: b_min, threshold })?;
    let l = chol.l();
    // C = L^{-1} A L^{-H}
    let linv_a =
        l.solve_lower_triangular(&hermitian_part(a)).ok_or(Error::NonFinite { op: "generalized_hermitian_eig" })?;
    let cmat =
        l.solve_lower_triangular(&linv_a.adjoint()).ok_or(Error::NonFinite { op: "generalized_hermitian_eig" })?;
    let std = hermitian_eig(&cmat)?;
    // v = L^{-H} w
    let lh = l.adjoint();
    let mut vectors =
        lh.solve_upper_triangular(&std.vectors).ok_or(Error::NonFinite { op: "generalized_hermitian_eig" })?;
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        col /= c(norm);
    }
    Ok(EigDecomposition { values: std.values, vectors })
}

pub fn svd(a: &CMat) -> Result<Svd> {
    ensure_finite(a, "svd")?;
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok(Svd { u: CMat::zeros(m, 0), singular_values: Vec::new(), v: CMat::zeros(n, 0) });
    }
    let s = a.clone().svd(true, true);
    let u_raw = s.u.expect("requested U");
    let v_raw = s.v_t.expect("requested V^H").adjoint();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s.singular_values[j].total_cmp(&s.singular_values[i]));
    let mut u = CMat::zeros(m, k);
    let mut v = CMat::zeros(n, k);
    let mut singular_values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &u_raw.column(src));
        v.set_column(dst, &v_raw.column(src));
        singular_values.push(s.singular_values[src]);
    }
    Ok(Svd { u, singular_values, v })
}

/// Thin Householder QR of a full-column-rank `m x n` matrix (`m >= n`).
pub fn qr(a: &CMat) -> Result<Qr> {
    ensure_finite(a, "qr")?;
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::Dimension { op: "qr", detail: format!("need rows >= cols, got {m}x{n}") });
    }
    let scale = a.norm();
    let f = a.clone().qr();
    let mut q = f.q();
    let mut r = f.r();
    for j in 0..n {
        let d = r[(j, j)];
        let mag = d.norm();
        if !(mag >= 1e-12 * scale) || scale == 0.0 {
            return Err(Error::RankDeficient { op: "qr", column: j, pivot: mag });
        }
        let phase = d / c(mag);
        let mut qc = q.column_mut(j);
        qc *= phase;
        let mut rr = r.row_mut(j);
        rr *= phase.conj();
    }
    Ok(Qr { q, r })
}

/// Orthonormal basis of the column span (errors when rank deficient).
pub fn orthonormalize(a: &CMat) -> Result<CMat> {
    Ok(qr(a)?.q)
}

/// Hermitian square root `V diag(sqrt λ) V^H` of a PSD matrix.
pub fn psd_sqrt(r: &CMat) -> Result<CMat> {
    ensure_square(r, "psd_sqrt")?;
    let eig = hermitian_eig(r)?;
    let norm = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let n = r.nrows();
    let mut scaled = eig.vectors.clone();
    for (j, &lam) in eig.values.iter().enumerate() {
        if lam < -1e-6 * norm {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: lam });
        }
        let s = lam.max(0.0).sqrt();
        let mut col = scaled.column_mut(j);
        col *= c(s);
    }
    let out = &scaled * eig.vectors.adjoint();
    debug_assert_eq!(out.nrows(), n);
    Ok(hermitian_part(&out))
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat> {
    ensure_square(a, "solve_hpd")?;
    let chol = hermitian_part(a).cholesky().ok_or_else(|| {
        let e = hermitian_part(a).symmetric_eigenvalues();
        let min = e.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        Error::NotPositiveDefinite { eigenvalue: min, threshold: 0.0 }
    })?;
    Ok(chol.solve(b))
}

/// `log2 det A` for Hermitian positive-definite `A`.
pub fn log2_det_hpd(a: &CMat) -> Result<f64> {
    ensure_square(a, "log2_det_hpd")?;
    let chol = hermitian_part(a).cholesky().ok_or_else(|| {
        let e = hermitian_part(a).symmetric_eigenvalues();
        let min = e.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        Error::NotPositiveDefinite { eigenvalue: min, threshold: 0.0 }
    })?;
    let l = chol.l();
    Ok(2.0 * l.diagonal().iter().map(|d| d.re.log2()).sum::<f64>())
}

/// General square solve via LU; `None` on singular input.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Relative Frobenius distance `‖a - b‖ / ‖b‖`.
pub fn rel_fro(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm()
}

//! Thin wrappers over nalgebra's dense factorizations.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const SVD_MAX_ITERS: usize = 0;

/// Thin SVD `M = U · diag(s) · Vᵀ` with `s` nonincreasing.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

impl ThinSvd {
    pub fn compose(&self, values: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (j, &s) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * &self.v_t
    }
}

/// Full thin SVD; `mode` only labels the error.
pub fn thin_svd(m: &DMatrix<f64>, mode: usize) -> Result<ThinSvd> {
    if m.nrows() < m.ncols() {
        // Bidiagonalize the tall orientation.
        let t = thin_svd(&m.transpose(), mode)?;
        return Ok(ThinSvd {
            u: t.v_t.transpose(),
            s: t.s,
            v_t: t.u.transpose(),
        });
    }
    let svd = nalgebra::SVD::try_new(m.clone(), true, true, f64::EPSILON, SVD_MAX_ITERS).ok_or(Error::Svd { mode })?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Svd { mode }),
    };
    Ok(ThinSvd {
        u,
        s: svd.singular_values.iter().copied().collect(),
        v_t,
    })
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &DMatrix<f64>, mode: usize) -> Result<Vec<f64>> {
    let tall = if m.nrows() < m.ncols() {
        m.transpose()
    } else {
        m.clone()
    };
    let svd = nalgebra::SVD::try_new(tall, false, false, f64::EPSILON, SVD_MAX_ITERS).ok_or(Error::Svd { mode })?;
    Ok(svd.singular_values.iter().copied().collect())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>, mode: usize) -> Result<f64> {
    Ok(singular_values(m, mode)?.first().copied().unwrap_or(0.0))
}

/// Rebuilds `m` with every singular value replaced by `min(s, cap)`.
pub fn clip_singular_values(m: &DMatrix<f64>, cap: f64, mode: usize) -> Result<DMatrix<f64>> {
    let svd = thin_svd(m, mode)?;
    if svd.s.first().is_none_or(|&s| s <= cap) {
        return Ok(m.clone());
    }
    let clipped: Vec<f64> = svd.s.iter().map(|&s| s.min(cap)).collect();
    Ok(svd.compose(&clipped))
}

/// `n × k` matrix of i.i.d. standard normals.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal basis of the column space of a full-column-rank matrix (thin QR).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    // Fix signs so the factor is a deterministic function of `m`.
    let r = qr.r();
    for j in 0..q.ncols().min(r.nrows()) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthonormal columns spanning a random Gaussian subspace.
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    orthonormalize(&gaussian_matrix(rows, cols, rng))
}

/// Random orthogonal `n × n` matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    random_orthonormal(n, n, rng)
}

/// Columns `U_⊥` (`n × (n − r)`) such that `(U | U_⊥)` is orthogonal, for
/// `U` with orthonormal columns. Gaussian fill orthogonalized against `U`.
pub fn orthonormal_completion<R: Rng + ?Sized>(u: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    let (n, r) = u.shape();
    if r >= n {
        return DMatrix::zeros(n, 0);
    }
    let mut fill = gaussian_matrix(n, n - r, rng);
    // Two projection passes keep the completion orthogonal to U at round-off level.
    for _ in 0..2 {
        let coeffs = u.transpose() * &fill;
        fill -= u * coeffs;
    }
    let q = orthonormalize(&fill);
    let coeffs = u.transpose() * &q;
    let q = &q - u * coeffs;
    orthonormalize(&q)
}

/// `‖UᵀU − I‖_F`.
pub fn orthonormality_defect(u: &DMatrix<f64>) -> f64 {
    let gram = u.transpose() * u;
    (gram - DMatrix::identity(u.ncols(), u.ncols())).norm()
}

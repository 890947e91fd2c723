//! Gaussian measurements and an ADMM solver for
//! `min ‖X‖_*  subject to  ‖Φ(X) − y‖₂ ≤ η` on order-3 tensors.
//!
//! The split carries one copy `W_d` of each matricization (weighted `1/3`
//! in the objective) and `z = Φ(X)` confined to the `η`-ball around `y`.
//! Each iteration runs three singular value thresholdings, one ball
//! projection, and one solve with the fixed matrix `3I + ΦᵀΦ`, which is
//! factored once (through the `m × m` Woodbury form when `m < N`).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;
use crate::spectral;
use crate::tensor::{DenseTensor, Shape};

/// `Φ` as an `m × N` matrix of i.i.d. standard normals, acting on the flat
/// layout of the tensor. Entries are not rescaled by `1/√m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasurement {
    matrix: DMatrix<f64>,
    shape: Shape,
    seed: u64,
}

impl GaussianMeasurement {
    pub fn new(shape: Shape, m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("measurement count must be at least 1".into()));
        }
        let n = shape.len();
        let mut rng = seed::rng(seed);
        // Row by row, so a prefix of rows does not depend on m.
        let mut rows = Vec::with_capacity(m * n);
        for _ in 0..m * n {
            rows.push(rng.sample::<f64, _>(StandardNormal));
        }
        let matrix = DMatrix::from_row_slice(m, n, &rows);
        Ok(GaussianMeasurement { matrix, shape, seed })
    }

    /// Wraps an explicit matrix (used for tests and structured maps).
    pub fn from_matrix(matrix: DMatrix<f64>, shape: Shape) -> Result<Self> {
        if matrix.ncols() != shape.len() || matrix.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "measurement matrix is {}x{}, shape {shape} needs {} columns",
                matrix.nrows(),
                matrix.ncols(),
                shape.len()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "measurement matrix has non-finite entries".into(),
            ));
        }
        Ok(GaussianMeasurement { matrix, shape, seed: 0 })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &DenseTensor) -> Result<DVector<f64>> {
        if x.shape() != &self.shape {
            return Err(Error::Dimension(format!("Φ expects {}, got {}", self.shape, x.shape())));
        }
        Ok(&self.matrix * DVector::from_column_slice(x.data()))
    }

    pub fn adjoint(&self, v: &DVector<f64>) -> Result<DenseTensor> {
        if v.len() != self.rows() {
            return Err(Error::Dimension(format!(
                "adjoint expects length {}, got {}",
                self.rows(),
                v.len()
            )));
        }
        let flat = self.matrix.tr_mul(v);
        DenseTensor::new(self.shape.clone(), flat.iter().copied().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// `ξ` uniform on the sphere of radius `η`.
    ExactEta,
    /// Gaussian `ξ`, rescaled onto the sphere of radius `η` if it exceeds it.
    GaussianClipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: Vec<f64>,
    pub eta: f64,
    /// Realized `‖ξ‖`.
    pub xi_norm: f64,
}

pub fn observe(
    phi: &GaussianMeasurement,
    truth: &DenseTensor,
    eta: f64,
    mode: NoiseMode,
    seed: u64,
) -> Result<Observation> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "eta must be a finite nonnegative number, got {eta}"
        )));
    }
    let clean = phi.apply(truth)?;
    if eta == 0.0 {
        return Ok(Observation {
            y: clean.iter().copied().collect(),
            eta,
            xi_norm: 0.0,
        });
    }
    let mut rng = seed::rng(seed);
    let mut xi: DVector<f64> = DVector::from_fn(phi.rows(), |_, _| rng.sample(StandardNormal));
    let norm = xi.norm();
    match mode {
        NoiseMode::ExactEta => xi *= eta / norm,
        NoiseMode::GaussianClipped => {
            if norm > eta {
                xi *= eta / norm;
            }
        }
    }
    let xi_norm = xi.norm();
    Ok(Observation {
        y: (clean + xi).iter().copied().collect(),
        eta,
        xi_norm,
    })
}

/// Proximal map of `θ‖·‖_nuclear`: `U · max(Σ − θ, 0) · Vᵀ`.
pub fn svt(m: &DMatrix<f64>, threshold: f64) -> Result<DMatrix<f64>> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    let svd = linalg::thin_svd(m, 0)?;
    let shrunk: Vec<f64> = svd.s.iter().map(|&s| (s - threshold).max(0.0)).collect();
    Ok(svd.compose(&shrunk))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub rho: f64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    /// Residual balancing: ρ is doubled or halved whenever one residual
    /// exceeds the other tenfold.
    pub adaptive_rho: bool,
    pub verbose: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1.0,
            max_iters: 5000,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            adaptive_rho: true,
            verbose: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.tol_primal > 0.0 && self.tol_dual > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    #[serde(skip)]
    pub estimate: Option<DenseTensor>,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `‖X̂‖_*`.
    pub objective: f64,
    /// `max(0, ‖Φ(X̂) − y‖ − η)`.
    pub feasibility_gap: f64,
    /// `⟨v, y⟩ − η‖v‖` for the multiplier `v` below.
    pub dual_objective: f64,
    /// `max_d 3‖Λ_d‖_op`; at most 1 for an exact certificate.
    pub dual_spectral_bound: f64,
    /// `‖Σ_d fold(Λ_d) − Φᵀ v‖_F`.
    pub dual_infeasibility: f64,
    #[serde(skip)]
    pub multiplier: Vec<f64>,
}

impl RecoveryResult {
    pub fn estimate(&self) -> &DenseTensor {
        self.estimate.as_ref().expect("solver always sets the estimate")
    }
}

/// Applies `(3I + ΦᵀΦ)⁻¹`.
enum NormalSolver {
    Direct(Cholesky<f64, Dyn>),
    /// `(3I_m + ΦΦᵀ)` factor for the Woodbury identity.
    Woodbury(Cholesky<f64, Dyn>),
}

impl NormalSolver {
    fn new(phi: &DMatrix<f64>) -> Result<Self> {
        let (m, n) = phi.shape();
        if m < n {
            let gram = phi * phi.transpose() + DMatrix::identity(m, m) * 3.0;
            Cholesky::new(gram)
                .map(NormalSolver::Woodbury)
                .ok_or_else(|| Error::InvalidArgument("Woodbury factorization failed".into()))
        } else {
            let gram = phi.tr_mul(phi) + DMatrix::identity(n, n) * 3.0;
            Cholesky::new(gram)
                .map(NormalSolver::Direct)
                .ok_or_else(|| Error::InvalidArgument("normal-system factorization failed".into()))
        }
    }

    fn solve(&self, phi: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            NormalSolver::Direct(chol) => chol.solve(rhs),
            NormalSolver::Woodbury(chol) => {
                let inner = chol.solve(&(phi * rhs));
                (rhs - phi.tr_mul(&inner)) / 3.0
            }
        }
    }
}

fn project_to_ball(point: &DVector<f64>, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let offset = point - center;
    let norm = offset.norm();
    if norm <= radius {
        point.clone()
    } else {
        center + offset * (radius / norm)
    }
}

pub fn admm_recover(phi: &GaussianMeasurement, obs: &Observation, config: &SolverConfig) -> Result<RecoveryResult> {
    config.validate()?;
    let shape = phi.shape().clone();
    if shape.order() != 3 {
        return Err(Error::UnsupportedOrder(shape.order()));
    }
    if obs.y.len() != phi.rows() {
        return Err(Error::Dimension(format!(
            "y has length {}, Φ has {} rows",
            obs.y.len(),
            phi.rows()
        )));
    }
    let a = phi.matrix();
    let y = DVector::from_column_slice(&obs.y);
    let solver = NormalSolver::new(a)?;
    let mut rho = config.rho;

    let mut x = DenseTensor::zeros(shape.clone());
    let mut ax = DVector::zeros(phi.rows());
    let mut w: Vec<DMatrix<f64>> = (1..=3).map(|d| x.matricize(d)).collect::<Result<_>>()?;
    let mut dual_w: Vec<DMatrix<f64>> = w.iter().map(|m| DMatrix::zeros(m.nrows(), m.ncols())).collect();
    let mut dual_z = DVector::zeros(phi.rows());

    let mut iterations = 0;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut converged = false;
    for k in 0..config.max_iters {
        iterations = k + 1;
        for d in 0..3 {
            w[d] = svt(&(x.matricize(d + 1)? + &dual_w[d]), 1.0 / (3.0 * rho))?;
        }
        let z = project_to_ball(&(&ax + &dual_z), &y, obs.eta);

        let mut rhs = DVector::from_column_slice(phi.adjoint(&(&z - &dual_z))?.data());
        for d in 0..3 {
            let folded = DenseTensor::fold(&(&w[d] - &dual_w[d]), d + 1, &shape)?;
            rhs += DVector::from_column_slice(folded.data());
        }
        let next = solver.solve(a, &rhs);
        let delta_x = &next - DVector::from_column_slice(x.data());
        x = DenseTensor::new(shape.clone(), next.iter().copied().collect())?;
        let next_ax = a * &next;
        let delta_ax = &next_ax - &ax;
        ax = next_ax;

        let mut primal_sq = 0.0;
        for d in 0..3 {
            let gap = x.matricize(d + 1)? - &w[d];
            primal_sq += gap.norm_squared();
            dual_w[d] += gap;
        }
        let gap_z = &ax - &z;
        primal_sq += gap_z.norm_squared();
        dual_z += gap_z;

        primal = primal_sq.sqrt();
        dual = rho * (3.0 * delta_x.norm_squared() + delta_ax.norm_squared()).sqrt();
        if config.verbose && (k % 100 == 0) {
            eprintln!("admm iter {k}: primal {primal:.3e} dual {dual:.3e}");
        }
        if primal < config.tol_primal && dual < config.tol_dual {
            converged = true;
            break;
        }
        if config.adaptive_rho {
            // Scaled duals are multiplier / ρ and must follow ρ.
            let factor = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                dual_z /= factor;
                for u in dual_w.iter_mut() {
                    *u /= factor;
                }
            }
        }
    }

    let objective = spectral::snn_norm(&x)?;
    let residual = (&ax - &y).norm();
    let feasibility_gap = (residual - obs.eta).max(0.0);

    // Unscaled multipliers: Λ_d = ρ·dual_w[d], μ = ρ·dual_z, and v = −μ.
    let v = -&dual_z * rho;
    let mut sum_lambda = DenseTensor::zeros(shape.clone());
    let mut spectral_bound: f64 = 0.0;
    for (d, scaled) in dual_w.iter().enumerate() {
        let lambda = scaled * rho;
        spectral_bound = spectral_bound.max(3.0 * linalg::spectral_norm(&lambda, d + 1)?);
        sum_lambda = sum_lambda.add(&DenseTensor::fold(&lambda, d + 1, &shape)?)?;
    }
    let dual_infeasibility = sum_lambda.sub(&phi.adjoint(&v)?)?.frobenius_norm();
    let dual_objective = v.dot(&y) - obs.eta * v.norm();

    Ok(RecoveryResult {
        estimate: Some(x),
        iterations,
        converged,
        primal_residual: primal,
        dual_residual: dual,
        objective,
        feasibility_gap,
        dual_objective,
        dual_spectral_bound: spectral_bound,
        dual_infeasibility,
        multiplier: v.iter().copied().collect(),
    })
}

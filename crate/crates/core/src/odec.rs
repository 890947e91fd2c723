//! Orthogonally decomposable (ODEC) tensors and the subdifferential of the
//! SNN norm at an ODEC point.
//!
//! An ODEC tensor is `X = Σ_i α_i u_i⁽¹⁾ ⊗ … ⊗ u_i⁽ᴰ⁾` where each family
//! `{u_i⁽ᵈ⁾}` is orthonormal. Equivalently `X = D(α) ×_1 U⁽¹⁾ ⋯ ×_D U⁽ᴰ⁾`
//! with a diagonal core. Every matricization of `X` then has singular values
//! exactly `α`, so `‖X‖ = α_1`, `‖X‖_* = Σ α_i` and `‖X‖_F = ‖α‖₂`.
//!
//! ## Subgradients
//!
//! An [`OmegaElement`] is `D(1) ×_1 U⁽¹⁾ ⋯ ×_D U⁽ᴰ⁾ + T ×_1 U⊥⁽¹⁾ ⋯ ×_D U⊥⁽ᴰ⁾`.
//! Bounding the corner `T` by its tensor operator norm is not enough for this
//! to be a subgradient: `T = I_k ⊗ e_1` has operator norm 1 yet
//! `‖T‖_F² = k > snn(T)`. The corner is therefore certified through the dual
//! of the SNN norm. If `s_d = σ_max(T_(d))` and `Σ_d 1/s_d ≥ D`, then
//! `T = (1/D) Σ_d c_d T` with `c_d = D/(s_d Σ_e 1/s_e) ≤ 1/s_d`, which places
//! the whole element in the SNN dual unit ball; its pairing with `X` is
//! `Σ α_i = ‖X‖_*`. The certificate is the harmonic mean
//! `D / Σ_d 1/s_d` and must not exceed 1.
//!
//! ## Distance to the scaled subdifferential
//!
//! For a Gaussian `G` the estimators rotate into the completed bases
//! `Ũ⁽ᵈ⁾ = (U⁽ᵈ⁾ | U⊥⁽ᵈ⁾)`, split `H = G ×_d Ũ⁽ᵈ⁾ᵀ` into the leading
//! `r×r×r` block `H₁₁₁`, the corner `H₂₂₂` and the six mixed blocks, and
//! measure `‖H₁₁₁ − τ D(1)‖² + ‖H₂₂₂ − τ T‖² + Σ mixed` for feasible `(τ, T)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;
use crate::spectral;
use crate::tensor::{outer_rank1, DenseTensor, Shape};

/// Tolerance on `‖UᵀU − I‖_F` accepted by [`OdecTensor::new`].
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Slack below which a subgradient inequality counts as violated.
pub const SUBGRADIENT_SLACK_TOL: f64 = 1e-9;

/// Factored ODEC tensor `(α; U⁽¹⁾, …, U⁽ᴰ⁾)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdecTensor {
    alpha: Vec<f64>,
    factors: Vec<DMatrix<f64>>,
    shape: Shape,
}

impl OdecTensor {
    pub fn new(alpha: Vec<f64>, factors: Vec<DMatrix<f64>>, shape: Shape) -> Result<Self> {
        let rank = alpha.len();
        validate_alpha(&alpha, &shape)?;
        if factors.len() != shape.order() {
            return Err(Error::Dimension(format!(
                "{} factors for an order-{} tensor",
                factors.len(),
                shape.order()
            )));
        }
        for (d, u) in factors.iter().enumerate() {
            if u.shape() != (shape.dims()[d], rank) {
                return Err(Error::Dimension(format!(
                    "factor {} is {}x{}, expected {}x{rank}",
                    d + 1,
                    u.nrows(),
                    u.ncols(),
                    shape.dims()[d]
                )));
            }
            if let Some(pos) = u.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(pos));
            }
            let defect = linalg::orthonormality_defect(u);
            if defect > ORTHONORMALITY_TOL {
                return Err(Error::InvalidArgument(format!(
                    "factor {} is not orthonormal (defect {defect:.3e})",
                    d + 1
                )));
            }
        }
        Ok(OdecTensor { alpha, factors, shape })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.alpha.len()
    }

    /// `Σ_i α_i u_i⁽¹⁾ ⊗ … ⊗ u_i⁽ᴰ⁾`.
    pub fn to_dense(&self) -> DenseTensor {
        sum_of_rank1(&self.alpha, &self.factors, &self.shape)
    }

    /// `D(α) ×_1 U⁽¹⁾ ⋯ ×_D U⁽ᴰ⁾`, the core-times-factors construction.
    pub fn to_dense_via_core(&self) -> Result<DenseTensor> {
        let core = DiagonalCore::new(self.alpha.clone(), self.shape.order())?;
        let mut out = core.to_dense();
        for (d, u) in self.factors.iter().enumerate() {
            out = out.mode_product(u, d + 1)?;
        }
        Ok(out)
    }

    /// `(‖X‖, ‖X‖_*, ‖X‖_F) = (α_1, Σ α_i, ‖α‖₂)` without any SVD.
    pub fn norms(&self) -> OdecNorms {
        OdecNorms {
            opnorm: self.alpha[0],
            snn: self.alpha.iter().sum(),
            frobenius: self.alpha.iter().map(|a| a * a).sum::<f64>().sqrt(),
        }
    }

    /// Same factors with a new spectrum `β`.
    pub fn with_spectrum(&self, beta: Vec<f64>) -> Result<OdecTensor> {
        OdecTensor::new(beta, self.factors.clone(), self.shape.clone())
    }

    /// Seeded orthonormal completions `U⊥⁽ᵈ⁾`, one per mode.
    pub fn completions(&self, seed: u64) -> Vec<DMatrix<f64>> {
        self.factors
            .iter()
            .enumerate()
            .map(|(d, u)| {
                let mut rng = seed::rng(seed::derive(seed, &[d as u64]));
                linalg::orthonormal_completion(u, &mut rng)
            })
            .collect()
    }

    /// `D(1) ×_1 U⁽¹⁾ ⋯ ×_D U⁽ᴰ⁾`, the subgradient with an empty corner.
    pub fn identity_part(&self) -> DenseTensor {
        sum_of_rank1(&vec![1.0; self.rank()], &self.factors, &self.shape)
    }
}

fn validate_alpha(alpha: &[f64], shape: &Shape) -> Result<()> {
    let rank = alpha.len();
    let min_dim = *shape.dims().iter().min().expect("order >= 2");
    if rank == 0 || rank > min_dim {
        return Err(Error::Rank {
            rank,
            reason: format!("must lie in 1..={min_dim} for shape {shape}"),
        });
    }
    if alpha.iter().any(|a| !a.is_finite() || *a <= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha:?}")));
    }
    if alpha.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be nonincreasing, got {alpha:?}"
        )));
    }
    Ok(())
}

fn sum_of_rank1(weights: &[f64], factors: &[DMatrix<f64>], shape: &Shape) -> DenseTensor {
    let mut data = vec![0.0; shape.len()];
    for (i, &w) in weights.iter().enumerate() {
        let columns: Vec<Vec<f64>> = factors.iter().map(|u| u.column(i).iter().copied().collect()).collect();
        let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
        let term = outer_rank1(&refs).expect("factor columns are nonempty");
        for (acc, t) in data.iter_mut().zip(term.data()) {
            *acc += w * t;
        }
    }
    DenseTensor::new(shape.clone(), data).expect("finite sum of finite terms")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdecNorms {
    pub opnorm: f64,
    pub snn: f64,
    pub frobenius: f64,
}

/// Diagonal core `D(v)` of size `r × … × r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCore {
    values: Vec<f64>,
    shape: Shape,
}

impl DiagonalCore {
    pub fn new(values: Vec<f64>, order: usize) -> Result<Self> {
        let shape = Shape::cubic(values.len(), order)?;
        Ok(DiagonalCore { values, shape })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn to_dense(&self) -> DenseTensor {
        let r = self.values.len();
        let step: usize = self.shape.strides().iter().sum();
        let mut data = vec![0.0; self.shape.len()];
        for i in 0..r {
            data[i * step] = self.values[i];
        }
        DenseTensor::new(self.shape.clone(), data).expect("finite diagonal")
    }
}

/// Draws an ODEC tensor with orthonormalized Gaussian factors.
pub fn sample_random_odec(shape: &Shape, rank: usize, alpha: &[f64], seed: u64) -> Result<OdecTensor> {
    if alpha.len() != rank {
        return Err(Error::Rank {
            rank,
            reason: format!("alpha has {} entries", alpha.len()),
        });
    }
    validate_alpha(alpha, shape)?;
    let factors = shape
        .dims()
        .iter()
        .enumerate()
        .map(|(d, &n)| {
            let mut rng = seed::rng(seed::derive(seed, &[d as u64]));
            linalg::random_orthonormal(n, rank, &mut rng)
        })
        .collect();
    OdecTensor::new(alpha.to_vec(), factors, shape.clone())
}

/// SNN-dual certificate of a corner: the harmonic mean of the mode spectral
/// norms. A corner with certificate `≤ 1` yields a valid subgradient.
pub fn corner_certificate(corner: &DenseTensor) -> Result<f64> {
    let mut inverse_sum = 0.0;
    for d in 1..=corner.order() {
        let s = linalg::spectral_norm(&corner.matricize(d)?, d)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        inverse_sum += 1.0 / s;
    }
    Ok(corner.order() as f64 / inverse_sum)
}

fn corner_shape(x: &OdecTensor) -> Option<Shape> {
    let r = x.rank();
    if x.shape.dims().contains(&r) {
        return None;
    }
    Some(Shape::new(x.shape.dims().iter().map(|&n| n - r).collect::<Vec<_>>()).expect("positive"))
}

/// One element of the inner subgradient set at an ODEC point.
#[derive(Debug, Clone)]
pub struct OmegaElement {
    base: OdecTensor,
    corner: Option<DenseTensor>,
    completions: Vec<DMatrix<f64>>,
    certificate: f64,
}

impl OmegaElement {
    pub fn base(&self) -> &OdecTensor {
        &self.base
    }

    /// `None` when some mode has `n_d = r` and the corner is empty.
    pub fn corner(&self) -> Option<&DenseTensor> {
        self.corner.as_ref()
    }

    pub fn completions(&self) -> &[DMatrix<f64>] {
        &self.completions
    }

    pub fn certificate(&self) -> f64 {
        self.certificate
    }

    /// `V = T ×_1 U⊥⁽¹⁾ ⋯ ×_D U⊥⁽ᴰ⁾` (zero when the corner is empty).
    pub fn corner_dense(&self) -> Result<DenseTensor> {
        match &self.corner {
            None => Ok(DenseTensor::zeros(self.base.shape.clone())),
            Some(t) => {
                let mut v = t.clone();
                for (d, perp) in self.completions.iter().enumerate() {
                    v = v.mode_product(perp, d + 1)?;
                }
                Ok(v)
            }
        }
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        self.base.identity_part().add(&self.corner_dense()?)
    }

    /// `max_d ‖V ×_d U⁽ᵈ⁾ᵀ‖_F`, zero in exact arithmetic.
    pub fn orthogonality_defect(&self) -> Result<f64> {
        let v = self.corner_dense()?;
        let mut worst: f64 = 0.0;
        for (d, u) in self.base.factors.iter().enumerate() {
            worst = worst.max(v.mode_product(&u.transpose(), d + 1)?.frobenius_norm());
        }
        Ok(worst)
    }
}

/// Builds `D(1) ×_d U⁽ᵈ⁾ + T ×_d U⊥⁽ᵈ⁾`. `completions` default to the seeded
/// completion of `x`. Rejects corners whose certificate exceeds 1.
pub fn omega_element(
    x: &OdecTensor,
    corner: Option<DenseTensor>,
    completions: Option<Vec<DMatrix<f64>>>,
    seed: u64,
) -> Result<OmegaElement> {
    let expected = corner_shape(x);
    let corner = match (corner, &expected) {
        (Some(t), Some(shape)) => {
            if t.shape() != shape {
                return Err(Error::Dimension(format!(
                    "corner has shape {}, expected {shape}",
                    t.shape()
                )));
            }
            Some(t)
        }
        (Some(t), None) => {
            return Err(Error::Dimension(format!(
                "rank {} fills a mode of {}, no room for a {} corner",
                x.rank(),
                x.shape,
                t.shape()
            )))
        }
        (None, _) => None,
    };
    let certificate = match &corner {
        Some(t) => corner_certificate(t)?,
        None => 0.0,
    };
    if certificate > 1.0 + 1e-10 {
        return Err(Error::InfeasibleSubgradient { certificate });
    }
    let completions = match completions {
        Some(c) => {
            check_completions(x, &c)?;
            c
        }
        None => x.completions(seed),
    };
    Ok(OmegaElement {
        base: x.clone(),
        corner,
        completions,
        certificate,
    })
}

fn check_completions(x: &OdecTensor, completions: &[DMatrix<f64>]) -> Result<()> {
    if completions.len() != x.shape.order() {
        return Err(Error::Dimension(format!(
            "{} completions for order {}",
            completions.len(),
            x.shape.order()
        )));
    }
    for (d, (u, perp)) in x.factors.iter().zip(completions).enumerate() {
        let n = u.nrows();
        if perp.shape() != (n, n - x.rank()) {
            return Err(Error::Dimension(format!(
                "completion {} is {}x{}, expected {n}x{}",
                d + 1,
                perp.nrows(),
                perp.ncols(),
                n - x.rank()
            )));
        }
        let full = basis(u, perp);
        let defect = linalg::orthonormality_defect(&full);
        if defect > ORTHONORMALITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "completion {} does not make an orthogonal basis (defect {defect:.3e})",
                d + 1
            )));
        }
    }
    Ok(())
}

/// `(U | U⊥)` as one square matrix.
fn basis(u: &DMatrix<f64>, perp: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = u.shape();
    DMatrix::from_fn(n, n, |i, j| if j < r { u[(i, j)] } else { perp[(i, j - r)] })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientReport {
    pub trials: usize,
    pub violations: usize,
    /// Smallest `snn(Y) − snn(X) − ⟨g, Y − X⟩` observed.
    pub worst_slack: f64,
}

/// Probes `snn(Y) ≥ snn(X) + ⟨g, Y − X⟩` along `trials` directions that
/// cycle through Gaussian draws, rescalings and sign flips of `X`, ODEC
/// perturbations and perturbations confined to the complement corner.
pub fn subgradient_check(x: &OdecTensor, g: &DenseTensor, trials: usize, seed: u64) -> Result<SubgradientReport> {
    let dense = x.to_dense();
    if g.shape() != dense.shape() {
        return Err(Error::Dimension(format!(
            "subgradient shape {} vs {}",
            g.shape(),
            dense.shape()
        )));
    }
    let base_value = spectral::snn_norm(&dense)?;
    let scale = dense.frobenius_norm().max(1.0);
    let completions = x.completions(seed::derive(seed, &[u64::MAX]));
    let corner = corner_shape(x);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for k in 0..trials {
        let mut rng = seed::rng(seed::derive(seed, &[k as u64]));
        let t: f64 = rand::Rng::random_range(&mut rng, -2.0..2.0);
        let y = match k % 6 {
            0 => DenseTensor::gaussian(x.shape.clone(), &mut rng).scale(scale * t.abs()),
            1 => dense.scale(1.0 + t),
            2 => dense.scale(-(1.0 + t.abs())),
            3 => {
                let r = rand::Rng::random_range(&mut rng, 1..=x.rank());
                let mut beta: Vec<f64> = (0..r).map(|_| rand::Rng::random_range(&mut rng, 0.1..2.0)).collect();
                beta.sort_by(|a, b| b.total_cmp(a));
                let other = sample_random_odec(&x.shape, r, &beta, rand::Rng::random(&mut rng))?;
                dense.axpy(t * scale, &other.to_dense())?
            }
            4 => match &corner {
                Some(cs) => {
                    let mut v = DenseTensor::gaussian(cs.clone(), &mut rng);
                    for (d, perp) in completions.iter().enumerate() {
                        v = v.mode_product(perp, d + 1)?;
                    }
                    let n = v.frobenius_norm().max(f64::MIN_POSITIVE);
                    dense.axpy(t * scale / n, &v)?
                }
                None => DenseTensor::gaussian(x.shape.clone(), &mut rng).scale(t),
            },
            _ => dense.axpy(0.1 * t, &DenseTensor::gaussian(x.shape.clone(), &mut rng))?,
        };
        let slack = spectral::snn_norm(&y)? - base_value - g.inner_product(&y.sub(&dense)?)?;
        if slack < -SUBGRADIENT_SLACK_TOL {
            violations += 1;
        }
        worst = worst.min(slack);
    }
    Ok(SubgradientReport {
        trials,
        violations,
        worst_slack: worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoalignedPairing {
    /// `⟨X, Y⟩` from the dense tensors.
    pub dense: f64,
    /// `Σ α_i β_i`.
    pub spectral: f64,
}

/// Pairs `X` with the tensor sharing its factors and carrying spectrum `β`.
/// Fails if the dense and spectral pairings disagree beyond `1e−10`.
pub fn coaligned_pairing(x: &OdecTensor, beta: &[f64]) -> Result<CoalignedPairing> {
    if beta.len() != x.rank() {
        return Err(Error::Dimension(format!(
            "beta has {} entries, rank is {}",
            beta.len(),
            x.rank()
        )));
    }
    let y = sum_of_rank1(beta, &x.factors, &x.shape);
    let dense = x.to_dense().inner_product(&y)?;
    let spectral: f64 = x.alpha.iter().zip(beta).map(|(a, b)| a * b).sum();
    let tol = 1e-10 * (1.0 + spectral.abs());
    if (dense - spectral).abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "coaligned pairing mismatch: dense {dense} vs spectral {spectral}"
        )));
    }
    Ok(CoalignedPairing { dense, spectral })
}

/// How the upper distance estimator picks `(τ, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauStrategy {
    /// Minimize over `τ` with the corner set to the closest certified point.
    #[default]
    Optimized,
    /// `τ` = certificate of `H₂₂₂` and `T = H₂₂₂/τ`, so the corner term vanishes.
    ScaledCorner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub tau: f64,
}

/// Rotated blocks of `G` in the completed bases of an order-3 ODEC tensor.
#[derive(Debug, Clone)]
pub struct BlockSplit {
    /// Leading `r×r×r` block.
    pub head: DenseTensor,
    /// Corner `(n₁−r)×(n₂−r)×(n₃−r)`, absent when some `n_d = r`.
    pub corner: Option<DenseTensor>,
    /// `Σ ‖·‖_F²` over the six mixed blocks.
    pub mixed_sq: f64,
}

impl BlockSplit {
    pub fn head_diagonal(&self) -> Vec<f64> {
        let r = self.head.dims()[0];
        (1..=r).map(|i| self.head.get(&[i, i, i]).expect("in range")).collect()
    }

    /// `‖H₁₁₁ − τ D(1)‖_F²`.
    pub fn head_residual_sq(&self, tau: f64) -> f64 {
        let total: f64 = self.head.data().iter().map(|v| v * v).sum();
        let diag = self.head_diagonal();
        let diag_sq: f64 = diag.iter().map(|v| v * v).sum();
        let shifted: f64 = diag.iter().map(|v| (v - tau) * (v - tau)).sum();
        total - diag_sq + shifted
    }
}

/// Orthogonal bases `(U⁽ᵈ⁾ | U⊥⁽ᵈ⁾)` around an order-3 ODEC point.
#[derive(Debug, Clone)]
pub struct SubdiffGeometry {
    rank: usize,
    shape: Shape,
    bases: Vec<DMatrix<f64>>,
}

/// Sweeps of block-coordinate projection per `τ` evaluation.
const CORNER_SWEEPS: usize = 200;
const CORNER_SWEEP_TOL: f64 = 1e-12;
const GOLDEN_STEPS: usize = 60;

impl SubdiffGeometry {
    pub fn new(x: &OdecTensor, completion_seed: u64) -> Result<Self> {
        let completions = x.completions(completion_seed);
        SubdiffGeometry::with_completions(x, &completions)
    }

    pub fn with_completions(x: &OdecTensor, completions: &[DMatrix<f64>]) -> Result<Self> {
        if x.shape.order() != 3 {
            return Err(Error::UnsupportedOrder(x.shape.order()));
        }
        check_completions(x, completions)?;
        let bases = x.factors.iter().zip(completions).map(|(u, p)| basis(u, p)).collect();
        Ok(SubdiffGeometry {
            rank: x.rank(),
            shape: x.shape.clone(),
            bases,
        })
    }

    pub fn split(&self, g: &DenseTensor) -> Result<BlockSplit> {
        if g.shape() != &self.shape {
            return Err(Error::Dimension(format!(
                "G has shape {}, expected {}",
                g.shape(),
                self.shape
            )));
        }
        let mut h = g.clone();
        for (d, b) in self.bases.iter().enumerate() {
            h = h.mode_product(&b.transpose(), d + 1)?;
        }
        let r = self.rank;
        let dims = self.shape.dims();
        let head_shape = Shape::cubic(r, 3)?;
        let mut head = Vec::with_capacity(r * r * r);
        let corner_dims: Vec<usize> = dims.iter().map(|&n| n - r).collect();
        let has_corner = corner_dims.iter().all(|&n| n > 0);
        let mut corner = Vec::new();
        let mut mixed_sq = 0.0;
        let mut offset = 0;
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let v = h.data()[offset];
                    offset += 1;
                    let lead = (i < r, j < r, k < r);
                    match lead {
                        (true, true, true) => head.push(v),
                        (false, false, false) => corner.push(v),
                        _ => mixed_sq += v * v,
                    }
                }
            }
        }
        let corner = if has_corner {
            Some(DenseTensor::new(Shape::new(corner_dims)?, corner)?)
        } else {
            None
        };
        Ok(BlockSplit {
            head: DenseTensor::new(head_shape, head)?,
            corner,
            mixed_sq,
        })
    }

    /// Certified upper estimate of `inf_τ dist²_F(G, τ ∂‖X‖_*)`.
    pub fn upper(&self, g: &DenseTensor, strategy: TauStrategy) -> Result<DistanceEstimate> {
        let split = self.split(g)?;
        let corner = match &split.corner {
            None => {
                let tau = match strategy {
                    TauStrategy::ScaledCorner => 0.0,
                    TauStrategy::Optimized => best_head_tau(&split),
                };
                return Ok(DistanceEstimate {
                    value: split.head_residual_sq(tau) + split.mixed_sq,
                    tau,
                });
            }
            Some(c) => c,
        };
        match strategy {
            TauStrategy::ScaledCorner => {
                let tau = corner_certificate(corner)?;
                Ok(DistanceEstimate {
                    value: split.head_residual_sq(tau) + split.mixed_sq,
                    tau,
                })
            }
            TauStrategy::Optimized => {
                let mut fit = CornerFit::new(corner.clone());
                let hi = corner_certificate(corner)?.max(best_head_tau(&split));
                let mut eval = |tau: f64| -> Result<f64> { Ok(split.head_residual_sq(tau) + fit.residual_sq(tau)?) };
                let (mut a, mut b) = (0.0, hi);
                let ratio = (5f64.sqrt() - 1.0) / 2.0;
                let mut c = b - ratio * (b - a);
                let mut e = a + ratio * (b - a);
                let mut fc = eval(c)?;
                let mut fe = eval(e)?;
                for _ in 0..GOLDEN_STEPS {
                    if fc <= fe {
                        b = e;
                        e = c;
                        fe = fc;
                        c = b - ratio * (b - a);
                        fc = eval(c)?;
                    } else {
                        a = c;
                        c = e;
                        fc = fe;
                        e = a + ratio * (b - a);
                        fe = eval(e)?;
                    }
                }
                // Endpoints are feasible too; keep the best evaluated point.
                let mut best = if fc <= fe { (fc, c) } else { (fe, e) };
                for tau in [0.0, hi] {
                    let v = eval(tau)?;
                    if v < best.0 {
                        best = (v, tau);
                    }
                }
                Ok(DistanceEstimate {
                    value: best.0 + split.mixed_sq,
                    tau: best.1,
                })
            }
        }
    }

    /// Relaxed companion: the corner is left free, so only the head and the
    /// mixed blocks contribute.
    pub fn lower(&self, g: &DenseTensor) -> Result<f64> {
        let split = self.split(g)?;
        Ok(split.head_residual_sq(best_head_tau(&split)) + split.mixed_sq)
    }
}

/// `argmin_{τ ≥ 0} ‖H₁₁₁ − τ D(1)‖²`.
fn best_head_tau(split: &BlockSplit) -> f64 {
    let diag = split.head_diagonal();
    (diag.iter().sum::<f64>() / diag.len() as f64).max(0.0)
}

/// Closest point to `H` in `τ · C` where `C = {(1/D) Σ_d V_d : ‖V_d,(d)‖ ≤ 1}`,
/// found by exact block-coordinate minimization over `S_d = (τ/D) V_d`.
/// Every iterate is feasible, so every residual reported is attained.
struct CornerFit {
    target: DenseTensor,
    parts: Vec<DenseTensor>,
}

impl CornerFit {
    fn new(target: DenseTensor) -> Self {
        let parts = vec![DenseTensor::zeros(target.shape().clone()); target.order()];
        CornerFit { target, parts }
    }

    fn residual(&self) -> DenseTensor {
        let mut r = self.target.clone();
        for p in &self.parts {
            r = r.sub(p).expect("same shape");
        }
        r
    }

    fn residual_sq(&mut self, tau: f64) -> Result<f64> {
        let order = self.target.order();
        let cap = tau / order as f64;
        // Rescale the warm start into the new feasible set.
        for (d, p) in self.parts.iter_mut().enumerate() {
            let s = linalg::spectral_norm(&p.matricize(d + 1)?, d + 1)?;
            if s > cap {
                *p = if s > 0.0 { p.scale(cap / s) } else { p.clone() };
            }
        }
        let mut previous = self.residual().frobenius_norm().powi(2);
        let scale = self.target.frobenius_norm().powi(2).max(1.0);
        for _ in 0..CORNER_SWEEPS {
            for d in 0..order {
                let others = self.residual().add(&self.parts[d])?;
                let m = others.matricize(d + 1)?;
                let clipped = linalg::clip_singular_values(&m, cap, d + 1)?;
                self.parts[d] = DenseTensor::fold(&clipped, d + 1, self.target.shape())?;
            }
            let current = self.residual().frobenius_norm().powi(2);
            let done = previous - current <= CORNER_SWEEP_TOL * scale;
            previous = current;
            if done {
                break;
            }
        }
        Ok(previous)
    }
}

/// Upper estimator with default completions and the optimized strategy.
pub fn dist_to_subdiff_upper(x: &OdecTensor, g: &DenseTensor) -> Result<DistanceEstimate> {
    SubdiffGeometry::new(x, 0)?.upper(g, TauStrategy::Optimized)
}

/// Relaxed lower companion of [`dist_to_subdiff_upper`].
pub fn dist_to_subdiff_lower(x: &OdecTensor, g: &DenseTensor) -> Result<f64> {
    SubdiffGeometry::new(x, 0)?.lower(g)
}

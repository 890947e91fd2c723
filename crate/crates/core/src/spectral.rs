//! Mode-wise singular values, the normalized spectrum and the tensor norms.
//!
//! The spectrum of an order-`D` tensor concatenates the singular values of
//! its `D` matricizations and scales by `1/√D`, so its ℓ₂ norm equals the
//! Frobenius norm. The SNN norm is the mean of the matricization nuclear
//! norms. The operator norm `max ⟨X, u⁽¹⁾⊗…⊗u⁽ᴰ⁾⟩` over unit vectors is
//! NP-hard in general and is returned as a bracket: a lower value reached by
//! rank-1 alternating power iteration and an upper value
//! `min_d σ_max(X_(d))`, which is certified because every unit rank-1 tensor
//! has a unit-norm mode-`d` matricization of rank one.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::Result;
use crate::linalg;
use crate::seed;
use crate::tensor::DenseTensor;

/// Relative cutoff below which singular values count as zero in ℓ₁ sums.
pub const RANK_CLAMP: f64 = 1e-12;

/// Singular values of `X_(d)`, nonincreasing, zero-padded to length `n_d`.
pub fn mode_singular_values(x: &DenseTensor, d: usize) -> Result<Vec<f64>> {
    let m = x.matricize(d)?;
    let mut s = linalg::singular_values(&m, d)?;
    s.resize(x.shape().dim(d), 0.0);
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// `σ⁽ᵈ⁾(X)` for `d = 1..=D`.
    pub per_mode: Vec<Vec<f64>>,
    /// Concatenation of `per_mode` scaled by `1/√D`.
    pub normalized: Vec<f64>,
}

impl SpectrumReport {
    pub fn normalized_norm(&self) -> f64 {
        self.normalized.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn spectrum(x: &DenseTensor) -> Result<SpectrumReport> {
    let per_mode = (1..=x.order())
        .map(|d| mode_singular_values(x, d))
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / (x.order() as f64).sqrt();
    let normalized = per_mode.iter().flatten().map(|s| s * scale).collect();
    Ok(SpectrumReport { per_mode, normalized })
}

fn clamped_l1(values: &[f64]) -> f64 {
    let cutoff = values.first().copied().unwrap_or(0.0) * RANK_CLAMP;
    values.iter().filter(|&&s| s > cutoff).sum()
}

/// Nuclear norm of the mode-`d` matricization.
pub fn mode_nuclear_norm(x: &DenseTensor, d: usize) -> Result<f64> {
    let s = linalg::singular_values(&x.matricize(d)?, d)?;
    Ok(clamped_l1(&s))
}

/// `‖X‖_* = (1/D) Σ_d ‖X_(d)‖_nuclear`.
pub fn snn_norm(x: &DenseTensor) -> Result<f64> {
    let total = (1..=x.order()).map(|d| mode_nuclear_norm(x, d)).sum::<Result<f64>>()?;
    Ok(total / x.order() as f64)
}

/// `min_d σ_max(X_(d))`, a certified upper bound on the operator norm.
pub fn opnorm_upper(x: &DenseTensor) -> Result<f64> {
    let mut best = f64::INFINITY;
    for d in 1..=x.order() {
        best = best.min(linalg::spectral_norm(&x.matricize(d)?, d)?);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpNormConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for OpNormConfig {
    fn default() -> Self {
        OpNormConfig {
            restarts: 20,
            max_iters: 500,
            tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpNormBracket {
    pub lower: f64,
    pub upper: f64,
    /// Unit vectors reaching `lower`, one per mode.
    pub maximizer: Vec<Vec<f64>>,
}

/// Contracts `x` against `vectors` on every mode except `d` (0-based).
fn contract_all_but(x: &DenseTensor, vectors: &[Vec<f64>], d: usize) -> Vec<f64> {
    let dims = x.dims();
    let order = dims.len();
    let mut out = vec![0.0; dims[d]];
    let mut index = vec![0usize; order];
    for &value in x.data() {
        let mut weight = value;
        for e in 0..order {
            if e != d {
                weight *= vectors[e][index[e]];
            }
        }
        out[index[d]] += weight;
        for e in (0..order).rev() {
            index[e] += 1;
            if index[e] < dims[e] {
                break;
            }
            index[e] = 0;
        }
    }
    out
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
    norm
}

fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if normalize(&mut v) > 0.0 {
            return v;
        }
    }
}

/// One run of rank-1 alternating power iteration from a seeded start.
fn rank1_power_iteration(x: &DenseTensor, config: &OpNormConfig, seed: u64) -> (f64, Vec<Vec<f64>>) {
    let mut rng = seed::rng(seed);
    let mut vectors: Vec<Vec<f64>> = x.dims().iter().map(|&n| random_unit(n, &mut rng)).collect();
    let mut value = f64::NEG_INFINITY;
    for _ in 0..config.max_iters {
        let mut current = 0.0;
        for d in 0..x.order() {
            let mut next = contract_all_but(x, &vectors, d);
            current = normalize(&mut next);
            if current > 0.0 {
                vectors[d] = next;
            }
        }
        let done = (current - value).abs() < config.tol;
        value = current;
        if done {
            break;
        }
    }
    // Report the exact correlation of the returned vectors.
    let last = x.order() - 1;
    let contraction = contract_all_but(x, &vectors, last);
    let exact: f64 = contraction.iter().zip(&vectors[last]).map(|(a, b)| a * b).sum();
    (exact, vectors)
}

pub fn opnorm_bracket(x: &DenseTensor, config: &OpNormConfig) -> Result<OpNormBracket> {
    let upper = opnorm_upper(x)?;
    if x.frobenius_norm() == 0.0 {
        return Ok(OpNormBracket {
            lower: 0.0,
            upper: 0.0,
            maximizer: x
                .dims()
                .iter()
                .map(|&n| {
                    let mut e = vec![0.0; n];
                    e[0] = 1.0;
                    e
                })
                .collect(),
        });
    }
    let restarts = config.restarts.max(1);
    let runs: Vec<(f64, Vec<Vec<f64>>)> = (0..restarts)
        .into_par_iter()
        .map(|k| rank1_power_iteration(x, config, config.seed.wrapping_add(k as u64)))
        .collect();
    // First best in restart order, independent of scheduling.
    let (lower, maximizer) = runs
        .into_iter()
        .reduce(|best, run| if run.0 > best.0 { run } else { best })
        .expect("at least one restart");
    Ok(OpNormBracket {
        lower,
        upper,
        maximizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{outer_rank1, Shape};

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter().map(|a| a / n).collect()
    }

    #[test]
    fn zero_tensor() {
        let z = DenseTensor::zeros(Shape::new(vec![2, 3, 4]).unwrap());
        assert_eq!(mode_singular_values(&z, 2).unwrap(), vec![0.0; 3]);
        assert!(spectrum(&z).unwrap().normalized.iter().all(|&v| v == 0.0));
        assert_eq!(snn_norm(&z).unwrap(), 0.0);
        let b = opnorm_bracket(&z, &OpNormConfig::default()).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
    }

    #[test]
    fn padding_to_mode_size() {
        // 4x1x1: mode-1 matricization is 4x1 so only one singular value exists.
        let x = DenseTensor::new(Shape::new(vec![4, 1, 1]).unwrap(), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(mode_singular_values(&x, 1).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rank1_unit_tensor() {
        let (u, v, w) = (unit(&[1.0, 2.0, 2.0]), unit(&[3.0, 4.0]), unit(&[1.0, -1.0, 0.5, 2.0]));
        let x = outer_rank1(&[&u, &v, &w]).unwrap();
        for d in 1..=3 {
            let s = mode_singular_values(&x, d).unwrap();
            assert!((s[0] - 1.0).abs() < 1e-12);
            assert!(s[1..].iter().all(|&t| t.abs() < 1e-12));
        }
        assert!((snn_norm(&x).unwrap() - 1.0).abs() < 1e-12);
        let b = opnorm_bracket(&x, &OpNormConfig::default()).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-8 && (b.upper - 1.0).abs() < 1e-8);
    }

    #[test]
    fn maximizer_realizes_lower_value() {
        let mut rng = seed::rng(9);
        let x = DenseTensor::gaussian(Shape::new(vec![3, 4, 5]).unwrap(), &mut rng);
        let b = opnorm_bracket(&x, &OpNormConfig::default()).unwrap();
        let refs: Vec<&[f64]> = b.maximizer.iter().map(Vec::as_slice).collect();
        let value = x.inner_product(&outer_rank1(&refs).unwrap()).unwrap();
        assert!((value - b.lower).abs() < 1e-8);
        assert!(b.lower >= 0.0 && b.lower <= b.upper + 1e-8);
        for v in &b.maximizer {
            assert!((v.iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bracket_is_schedule_independent() {
        let mut rng = seed::rng(21);
        let x = DenseTensor::gaussian(Shape::cubic(4, 3).unwrap(), &mut rng);
        let config = OpNormConfig {
            seed: 77,
            ..OpNormConfig::default()
        };
        let a = opnorm_bracket(&x, &config).unwrap();
        let b = opnorm_bracket(&x, &config).unwrap();
        assert_eq!(a, b);
    }
}

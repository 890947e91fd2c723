//! Tensor von Neumann inequality `⟨X, Y⟩ ≤ ⟨σ⁽ᵈ⁾(X), σ⁽ᵈ⁾(Y)⟩` and
//! blockwise-decomposable pairs that attain it in every mode at once.
//!
//! A constructed pair places blocks `C_b` of `D(X)` and `p_b C_b` of `D(Y)`
//! on aligned index blocks and rotates both by the same orthogonal `W⁽ᵈ⁾`.
//! Equality also needs the singular values of different blocks not to
//! interleave against the proportions: in every mode the pairs
//! `(σ, p_b σ)` must be co-monotone, otherwise sorting pairs values from
//! different blocks and the inequality is strict.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;
use crate::spectral::{self, RANK_CLAMP};
use crate::tensor::{DenseTensor, Shape};

/// `⟨σ⁽ᵈ⁾(X), σ⁽ᵈ⁾(Y)⟩ − ⟨X, Y⟩`, nonnegative up to round-off.
pub fn vn_gap(x: &DenseTensor, y: &DenseTensor, d: usize) -> Result<f64> {
    let inner = x.inner_product(y)?;
    let sx = spectral::mode_singular_values(x, d)?;
    let sy = spectral::mode_singular_values(y, d)?;
    let paired: f64 = sx.iter().zip(&sy).map(|(a, b)| a * b).sum();
    Ok(paired - inner)
}

/// Per-mode partitions `I_1⁽ᵈ⁾ ∪ … ∪ I_B⁽ᵈ⁾` of `{1..n_d}` (1-based).
/// A block may be empty on some mode, in which case it holds no entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStructure {
    partitions: Vec<Vec<Vec<usize>>>,
}

impl BlockStructure {
    pub fn new(partitions: Vec<Vec<Vec<usize>>>, shape: &Shape) -> Result<Self> {
        if partitions.len() != shape.order() {
            return Err(Error::InvalidArgument(format!(
                "{} partitions for an order-{} tensor",
                partitions.len(),
                shape.order()
            )));
        }
        let blocks = partitions[0].len();
        if blocks == 0 {
            return Err(Error::InvalidArgument("block count must be at least 1".into()));
        }
        for (d, sets) in partitions.iter().enumerate() {
            if sets.len() != blocks {
                return Err(Error::InvalidArgument(format!(
                    "mode {} has {} blocks, mode 1 has {blocks}",
                    d + 1,
                    sets.len()
                )));
            }
            let n = shape.dims()[d];
            let mut seen = vec![false; n];
            for &i in sets.iter().flatten() {
                if i == 0 || i > n {
                    return Err(Error::InvalidArgument(format!(
                        "index {i} outside 1..={n} on mode {}",
                        d + 1
                    )));
                }
                if std::mem::replace(&mut seen[i - 1], true) {
                    return Err(Error::InvalidArgument(format!("index {i} repeated on mode {}", d + 1)));
                }
            }
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(Error::InvalidArgument(format!(
                    "index {} not covered on mode {}",
                    missing + 1,
                    d + 1
                )));
            }
        }
        Ok(BlockStructure { partitions })
    }

    /// Consecutive blocks with the given sizes on every mode.
    pub fn contiguous(sizes: &[Vec<usize>]) -> Result<Self> {
        let order = sizes.first().map_or(0, Vec::len);
        let mut partitions = vec![Vec::new(); order];
        let mut next = vec![1usize; order];
        for block in sizes {
            if block.len() != order {
                return Err(Error::InvalidArgument("blocks disagree on tensor order".into()));
            }
            for (d, &len) in block.iter().enumerate() {
                partitions[d].push((next[d]..next[d] + len).collect());
                next[d] += len;
            }
        }
        let shape = Shape::new(next.iter().map(|n| n - 1).collect::<Vec<_>>())?;
        BlockStructure::new(partitions, &shape)
    }

    pub fn block_count(&self) -> usize {
        self.partitions[0].len()
    }

    pub fn partitions(&self) -> &[Vec<Vec<usize>>] {
        &self.partitions
    }

    pub fn shape(&self) -> Result<Shape> {
        Shape::new(
            self.partitions
                .iter()
                .map(|sets| sets.iter().map(Vec::len).sum())
                .collect::<Vec<usize>>(),
        )
    }

    /// Sizes of block `b` on every mode.
    pub fn block_dims(&self, b: usize) -> Vec<usize> {
        self.partitions.iter().map(|sets| sets[b].len()).collect()
    }

    /// `owner[d][i]` = block holding 0-based index `i` on mode `d`.
    fn owners(&self) -> Vec<Vec<usize>> {
        self.partitions
            .iter()
            .map(|sets| {
                let n: usize = sets.iter().map(Vec::len).sum();
                let mut owner = vec![0; n];
                for (b, set) in sets.iter().enumerate() {
                    for &i in set {
                        owner[i - 1] = b;
                    }
                }
                owner
            })
            .collect()
    }
}

/// True iff every entry outside `∪_b I_b⁽¹⁾ × … × I_b⁽ᴰ⁾` is at most `tol` in magnitude.
pub fn is_blockwise(x: &DenseTensor, structure: &BlockStructure, tol: f64) -> Result<bool> {
    if structure.shape()? != *x.shape() {
        return Err(Error::InvalidArgument(format!(
            "block structure covers {}, tensor is {}",
            structure.shape()?,
            x.shape()
        )));
    }
    let owners = structure.owners();
    let dims = x.dims();
    let mut index = vec![0usize; dims.len()];
    for &v in x.data() {
        let b = owners[0][index[0]];
        let inside = (1..dims.len()).all(|d| owners[d][index[d]] == b);
        if !inside && v.abs() > tol {
            return Ok(false);
        }
        for d in (0..dims.len()).rev() {
            index[d] += 1;
            if index[d] < dims[d] {
                break;
            }
            index[d] = 0;
        }
    }
    Ok(true)
}

/// Places `cores[b] · weights[b]` on block `b`; zero elsewhere.
fn assemble(structure: &BlockStructure, cores: &[DenseTensor], weights: &[f64]) -> Result<DenseTensor> {
    let shape = structure.shape()?;
    let strides = shape.strides();
    let mut data = vec![0.0; shape.len()];
    for (b, (core, &w)) in cores.iter().zip(weights).enumerate() {
        let sets: Vec<&Vec<usize>> = structure.partitions.iter().map(|s| &s[b]).collect();
        let dims = core.dims();
        let mut index = vec![0usize; dims.len()];
        for &v in core.data() {
            let offset: usize = index
                .iter()
                .zip(&sets)
                .zip(&strides)
                .map(|((&i, set), s)| (set[i] - 1) * s)
                .sum();
            data[offset] = w * v;
            for d in (0..dims.len()).rev() {
                index[d] += 1;
                if index[d] < dims[d] {
                    break;
                }
                index[d] = 0;
            }
        }
    }
    DenseTensor::new(shape, data)
}

fn check_cores(structure: &BlockStructure, cores: &[DenseTensor], proportions: &[f64]) -> Result<()> {
    let b = structure.block_count();
    if cores.len() != b || proportions.len() != b {
        return Err(Error::Dimension(format!(
            "{b} blocks but {} cores and {} proportions",
            cores.len(),
            proportions.len()
        )));
    }
    for (k, core) in cores.iter().enumerate() {
        if core.dims() != structure.block_dims(k).as_slice() {
            return Err(Error::Dimension(format!(
                "core {} has shape {}, block is {:?}",
                k + 1,
                core.shape(),
                structure.block_dims(k)
            )));
        }
    }
    if let Some(p) = proportions.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "proportions must be nonnegative, got {p}"
        )));
    }
    Ok(())
}

/// Nonzero mode-`d` singular values of every block, tagged with its proportion.
fn block_spectra(cores: &[DenseTensor], proportions: &[f64], d: usize) -> Result<Vec<(f64, f64)>> {
    let mut pairs = Vec::new();
    for (core, &p) in cores.iter().zip(proportions) {
        let s = linalg::singular_values(&core.matricize(d)?, d)?;
        let cutoff = s.first().copied().unwrap_or(0.0) * RANK_CLAMP;
        pairs.extend(s.into_iter().filter(|&v| v > cutoff).map(|v| (v, p * v)));
    }
    Ok(pairs)
}

/// Whether the per-mode pairs `(σ, p_b σ)` are co-monotone.
pub fn spectra_comonotone(cores: &[DenseTensor], proportions: &[f64], tol: f64) -> Result<bool> {
    let order = cores.first().map_or(0, DenseTensor::order);
    for d in 1..=order {
        let mut pairs = block_spectra(cores, proportions, d)?;
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
        if pairs.windows(2).any(|w| w[1].1 > w[0].1 + tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Rescales cores by positive factors so blocks with larger proportions
/// carry uniformly larger singular values, making the spectra co-monotone.
pub fn separate_block_scales(cores: &[DenseTensor], proportions: &[f64]) -> Result<Vec<DenseTensor>> {
    let extremes = |core: &DenseTensor| -> Result<(f64, f64)> {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for d in 1..=core.order() {
            let s = linalg::singular_values(&core.matricize(d)?, d)?;
            let top = s.first().copied().unwrap_or(0.0);
            hi = hi.max(top);
            if let Some(&min) = s.iter().rev().find(|&&v| v > top * RANK_CLAMP) {
                lo = lo.min(min);
            }
        }
        Ok((lo, hi))
    };
    let mut order: Vec<usize> = (0..cores.len()).collect();
    order.sort_by(|&a, &b| proportions[b].total_cmp(&proportions[a]));
    let mut scaled: Vec<Option<DenseTensor>> = vec![None; cores.len()];
    // Walk from the smallest proportion upward; the ceiling is the largest
    // singular value already placed below the current group.
    let mut ceiling = 0.0f64;
    let mut k = order.len();
    while k > 0 {
        let p = proportions[order[k - 1]];
        let mut start = k - 1;
        while start > 0 && proportions[order[start - 1]] == p {
            start -= 1;
        }
        let mut group_lo = f64::INFINITY;
        for &b in &order[start..k] {
            group_lo = group_lo.min(extremes(&cores[b])?.0);
        }
        let factor = if group_lo.is_finite() && ceiling > 0.0 {
            (1.5 * ceiling / group_lo).max(1.0)
        } else {
            1.0
        };
        for &b in &order[start..k] {
            let core = cores[b].scale(factor);
            ceiling = ceiling.max(extremes(&core)?.1);
            scaled[b] = Some(core);
        }
        k = start;
    }
    Ok(scaled.into_iter().map(|c| c.expect("every block visited")).collect())
}

/// Builds `X = D(X) ×_d W⁽ᵈ⁾` and `Y = D(Y) ×_d W⁽ᵈ⁾` where `D(Y)` carries
/// `p_b · C_b` on block `b`. `rotations` default to seeded random orthogonal
/// matrices. Rejects cores whose spectra interleave against the proportions.
pub fn build_equality_pair(
    structure: &BlockStructure,
    cores: &[DenseTensor],
    proportions: &[f64],
    rotations: Option<Vec<DMatrix<f64>>>,
    seed: u64,
) -> Result<(DenseTensor, DenseTensor)> {
    check_cores(structure, cores, proportions)?;
    if !spectra_comonotone(cores, proportions, 1e-12)? {
        return Err(Error::InvalidArgument(
            "block spectra interleave against the proportions; equality cannot hold".into(),
        ));
    }
    let shape = structure.shape()?;
    let rotations = match rotations {
        Some(r) => {
            if r.len() != shape.order() {
                return Err(Error::Dimension(format!(
                    "{} rotations for order {}",
                    r.len(),
                    shape.order()
                )));
            }
            for (d, w) in r.iter().enumerate() {
                let n = shape.dims()[d];
                if w.shape() != (n, n) || linalg::orthonormality_defect(w) > 1e-10 {
                    return Err(Error::InvalidArgument(format!(
                        "rotation {} is not an orthogonal {n}x{n} matrix",
                        d + 1
                    )));
                }
            }
            r
        }
        None => shape
            .dims()
            .iter()
            .enumerate()
            .map(|(d, &n)| linalg::random_orthogonal(n, &mut seed::rng(seed::derive(seed, &[d as u64]))))
            .collect(),
    };
    let mut x = assemble(structure, cores, &vec![1.0; cores.len()])?;
    let mut y = assemble(structure, cores, proportions)?;
    for (d, w) in rotations.iter().enumerate() {
        x = x.mode_product(w, d + 1)?;
        y = y.mode_product(w, d + 1)?;
    }
    Ok((x, y))
}

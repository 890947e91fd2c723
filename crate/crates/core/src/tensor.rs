//! Dense D-mode tensors and the index algebra shared by every other module.
//!
//! Storage is a flat `Vec<f64>` in lexicographic order with the FIRST index
//! varying slowest: the 1-based multi-index `(i_1, …, i_D)` lives at offset
//! `Σ_d (i_d − 1) · Π_{e>d} n_e`.
//!
//! The mode-`d` matricization `X_(d)` is an `n_d × (N / n_d)` matrix whose
//! row `i` collects every entry with `i_d = i`. Its columns enumerate the
//! remaining indices lexicographically with the smallest remaining mode
//! varying fastest. Singular values do not depend on this choice, but `fold`
//! and the bit-exact tests do.
//!
//! Modes and multi-indices are 1-based at the API surface.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Ordered list of mode sizes `(n_1, …, n_D)` with `D ≥ 2` and every `n_d ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.len() < 2 {
            return Err(Error::Dimension(format!(
                "tensor order must be at least 2, got {}",
                dims.len()
            )));
        }
        if let Some(pos) = dims.iter().position(|&n| n == 0) {
            return Err(Error::Dimension(format!("mode {} has size 0", pos + 1)));
        }
        dims.iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .filter(|&total| total <= isize::MAX as usize / std::mem::size_of::<f64>())
            .ok_or_else(|| Error::Dimension(format!("total size of {dims:?} overflows")))?;
        Ok(Shape(dims))
    }

    /// Cubic shape `n × … × n` of the given order.
    pub fn cubic(n: usize, order: usize) -> Result<Self> {
        Shape::new(vec![n; order])
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// Size of mode `d` (1-based).
    pub fn dim(&self, d: usize) -> usize {
        self.0[d - 1]
    }

    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check_mode(&self, d: usize) -> Result<()> {
        if d == 0 || d > self.order() {
            Err(Error::Mode {
                mode: d,
                order: self.order(),
            })
        } else {
            Ok(())
        }
    }

    /// Row-major strides: `strides[d] = Π_{e>d} n_e`.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.order()];
        for d in (0..self.order().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * self.0[d + 1];
        }
        strides
    }

    /// Offset of a 1-based multi-index.
    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.order() {
            return Err(Error::Index(format!(
                "multi-index has {} entries, tensor has order {}",
                index.len(),
                self.order()
            )));
        }
        let mut offset = 0;
        for (d, (&i, &n)) in index.iter().zip(&self.0).enumerate() {
            if i == 0 || i > n {
                return Err(Error::Index(format!("index {i} out of 1..={n} on mode {}", d + 1)));
            }
            offset = offset * n + (i - 1);
        }
        Ok(offset)
    }

    /// Same shape with mode `d` resized to `n`.
    pub fn with_dim(&self, d: usize, n: usize) -> Result<Shape> {
        self.check_mode(d)?;
        let mut dims = self.0.clone();
        dims[d - 1] = n;
        Shape::new(dims)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// Walks 0-based multi-indices in storage order.
struct IndexCounter {
    dims: Vec<usize>,
    current: Vec<usize>,
}

impl IndexCounter {
    fn new(dims: &[usize]) -> Self {
        IndexCounter {
            dims: dims.to_vec(),
            current: vec![0; dims.len()],
        }
    }

    fn advance(&mut self) {
        for d in (0..self.dims.len()).rev() {
            self.current[d] += 1;
            if self.current[d] < self.dims[d] {
                return;
            }
            self.current[d] = 0;
        }
    }
}

/// Column strides of the mode-`d` matricization (0-based `d`): the remaining
/// modes in increasing order, smallest varying fastest. Entry `d` is zero.
fn unfolding_strides(dims: &[usize], d: usize) -> Vec<usize> {
    let mut strides = vec![0; dims.len()];
    let mut acc = 1;
    for (e, &n) in dims.iter().enumerate() {
        if e != d {
            strides[e] = acc;
            acc *= n;
        }
    }
    strides
}

/// Dense real tensor with finite entries. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Dimension(format!(
                "shape {shape} needs {} entries, got {}",
                shape.len(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.len()];
        DenseTensor { shape, data }
    }

    pub fn filled(shape: Shape, value: f64) -> Result<Self> {
        let data = vec![value; shape.len()];
        DenseTensor::new(shape, data)
    }

    /// Builds a tensor from a function of the 1-based multi-index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.len());
        let mut counter = IndexCounter::new(shape.dims());
        let mut one_based = vec![0; shape.order()];
        for _ in 0..shape.len() {
            for (o, &c) in one_based.iter_mut().zip(&counter.current) {
                *o = c + 1;
            }
            data.push(f(&one_based));
            counter.advance();
        }
        DenseTensor::new(shape, data)
    }

    /// I.i.d. standard normal entries.
    pub fn gaussian<R: Rng + ?Sized>(shape: Shape, rng: &mut R) -> Self {
        let data = (0..shape.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        DenseTensor { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Entry at a 1-based multi-index.
    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.shape.offset(index)?])
    }

    fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "shapes {} and {} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// `⟨X, Y⟩ = Σ X_i Y_i` over all multi-indices.
    pub fn inner_product(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, factor: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.axpy(-1.0, other)
    }

    /// `self + a · other`.
    pub fn axpy(&self, a: f64, other: &DenseTensor) -> Result<DenseTensor> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x + a * y).collect();
        DenseTensor::new(self.shape.clone(), data)
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Mode-`d` matricization, an `n_d × (N / n_d)` matrix.
    pub fn matricize(&self, d: usize) -> Result<DMatrix<f64>> {
        self.shape.check_mode(d)?;
        let dims = self.shape.dims();
        let k = d - 1;
        let rows = dims[k];
        let cols = self.len() / rows;
        let col_strides = unfolding_strides(dims, k);
        let mut out = DMatrix::zeros(rows, cols);
        let mut counter = IndexCounter::new(dims);
        for &value in &self.data {
            let col: usize = counter.current.iter().zip(&col_strides).map(|(i, s)| i * s).sum();
            out[(counter.current[k], col)] = value;
            counter.advance();
        }
        Ok(out)
    }

    /// Inverse of [`DenseTensor::matricize`].
    pub fn fold(matrix: &DMatrix<f64>, d: usize, shape: &Shape) -> Result<DenseTensor> {
        shape.check_mode(d)?;
        let dims = shape.dims();
        let k = d - 1;
        let rows = dims[k];
        let cols = shape.len() / rows;
        if matrix.nrows() != rows || matrix.ncols() != cols {
            return Err(Error::Dimension(format!(
                "cannot fold a {}x{} matrix along mode {d} of {shape} (need {rows}x{cols})",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let col_strides = unfolding_strides(dims, k);
        let mut data = Vec::with_capacity(shape.len());
        let mut counter = IndexCounter::new(dims);
        for _ in 0..shape.len() {
            let col: usize = counter.current.iter().zip(&col_strides).map(|(i, s)| i * s).sum();
            data.push(matrix[(counter.current[k], col)]);
            counter.advance();
        }
        DenseTensor::new(shape.clone(), data)
    }

    /// `X ×_d M` for a `p × n_d` matrix `M`: mode `d` is replaced by `p`.
    pub fn mode_product(&self, matrix: &DMatrix<f64>, d: usize) -> Result<DenseTensor> {
        self.shape.check_mode(d)?;
        if matrix.ncols() != self.shape.dim(d) {
            return Err(Error::Dimension(format!(
                "mode-{d} product needs {} columns, matrix has {}",
                self.shape.dim(d),
                matrix.ncols()
            )));
        }
        let product = matrix * self.matricize(d)?;
        let new_shape = self.shape.with_dim(d, matrix.nrows())?;
        DenseTensor::fold(&product, d, &new_shape)
    }

    /// Rectangular sub-block selected by per-mode index lists.
    pub fn subarray(&self, set: &MultiIndexSet) -> Result<DenseTensor> {
        set.check_within(&self.shape)?;
        let shape = Shape::new(set.lists.iter().map(Vec::len).collect::<Vec<_>>())?;
        let strides = self.shape.strides();
        let mut data = Vec::with_capacity(shape.len());
        let mut counter = IndexCounter::new(shape.dims());
        for _ in 0..shape.len() {
            let offset: usize = counter
                .current
                .iter()
                .zip(&set.lists)
                .zip(&strides)
                .map(|((&c, list), s)| (list[c] - 1) * s)
                .sum();
            data.push(self.data[offset]);
            counter.advance();
        }
        Ok(DenseTensor { shape, data })
    }
}

/// `u_1 ⊗ u_2 ⊗ … ⊗ u_D`, with entry `(i_1, …, i_D) = Π_d u_d[i_d]`.
pub fn outer_rank1(vectors: &[&[f64]]) -> Result<DenseTensor> {
    if let Some(pos) = vectors.iter().position(|v| v.is_empty()) {
        return Err(Error::Dimension(format!("factor {} is empty", pos + 1)));
    }
    let shape = Shape::new(vectors.iter().map(|v| v.len()).collect::<Vec<_>>())?;
    let mut data = vec![1.0];
    for v in vectors {
        let mut next = Vec::with_capacity(data.len() * v.len());
        for &a in &data {
            next.extend(v.iter().map(|&b| a * b));
        }
        data = next;
    }
    DenseTensor::new(shape, data)
}

/// Rectangular subset `C = L_1 × … × L_D` of the index grid (1-based lists).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    lists: Vec<Vec<usize>>,
}

impl MultiIndexSet {
    pub fn rectangular(lists: Vec<Vec<usize>>) -> Result<Self> {
        if let Some(pos) = lists.iter().position(Vec::is_empty) {
            return Err(Error::Index(format!("index list for mode {} is empty", pos + 1)));
        }
        Ok(MultiIndexSet { lists })
    }

    /// Contiguous block `lo_d ..= hi_d` on every mode.
    pub fn ranges(bounds: &[(usize, usize)]) -> Result<Self> {
        MultiIndexSet::rectangular(bounds.iter().map(|&(lo, hi)| (lo..=hi).collect()).collect())
    }

    pub fn full(shape: &Shape) -> Self {
        MultiIndexSet {
            lists: shape.dims().iter().map(|&n| (1..=n).collect()).collect(),
        }
    }

    pub fn single(index: &[usize]) -> Self {
        MultiIndexSet {
            lists: index.iter().map(|&i| vec![i]).collect(),
        }
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }

    fn check_within(&self, shape: &Shape) -> Result<()> {
        if self.lists.len() != shape.order() {
            return Err(Error::Index(format!(
                "index set has {} modes, tensor has {}",
                self.lists.len(),
                shape.order()
            )));
        }
        for (d, (list, &n)) in self.lists.iter().zip(shape.dims()).enumerate() {
            if let Some(&bad) = list.iter().find(|&&i| i == 0 || i > n) {
                return Err(Error::Index(format!("index {bad} out of 1..={n} on mode {}", d + 1)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cube(n: usize) -> Shape {
        Shape::cubic(n, 3).unwrap()
    }

    fn one_to_eight() -> DenseTensor {
        DenseTensor::new(cube(2), (1..=8).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn shape_rejects_bad_dims() {
        assert!(Shape::new(vec![3]).is_err());
        assert!(Shape::new(vec![3, 0, 2]).is_err());
        assert!(Shape::new(vec![usize::MAX, 4]).is_err());
    }

    #[test]
    fn constructor_rejects_non_finite() {
        let err = DenseTensor::new(cube(2), vec![0.0, 1.0, f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(err, Err(Error::NonFinite(2))));
        assert!(DenseTensor::new(cube(2), vec![1.0; 7]).is_err());
        assert!(DenseTensor::filled(cube(2), f64::INFINITY).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let ones = DenseTensor::filled(cube(2), 1.0).unwrap();
        assert_eq!(ones.inner_product(&ones).unwrap(), 8.0);
        assert_eq!(ones.inner_product(&DenseTensor::zeros(cube(2))).unwrap(), 0.0);
        let x = one_to_eight();
        assert_eq!(x.inner_product(&x).unwrap(), 204.0);
        assert!(x.inner_product(&DenseTensor::zeros(cube(3))).is_err());
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(DenseTensor::filled(cube(2), 1.0).unwrap().frobenius_norm(), 8f64.sqrt());
        assert_eq!(DenseTensor::zeros(cube(2)).frobenius_norm(), 0.0);
        assert_eq!(one_to_eight().frobenius_norm(), 204f64.sqrt());
    }

    #[test]
    fn layout_law() {
        let shape = Shape::new(vec![2, 3, 4]).unwrap();
        let x = DenseTensor::from_fn(shape, |i| (100 * i[0] + 10 * i[1] + i[2]) as f64).unwrap();
        for i in 1..=2 {
            for j in 1..=3 {
                for k in 1..=4 {
                    let offset = (i - 1) * 12 + (j - 1) * 4 + (k - 1);
                    assert_eq!(x.data()[offset], (100 * i + 10 * j + k) as f64);
                    assert_eq!(x.get(&[i, j, k]).unwrap(), x.data()[offset]);
                }
            }
        }
        assert!(x.get(&[3, 1, 1]).is_err());
        assert!(x.get(&[0, 1, 1]).is_err());
    }

    #[test]
    fn matricize_column_order() {
        // X_ijk = 4(i-1) + 2(j-1) + k is exactly the layout order 1..8.
        let x = one_to_eight();
        let m = x.matricize(1).unwrap();
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![5.0, 7.0, 6.0, 8.0]);
        // Mode 2: columns (i, k) with i fastest.
        let m2 = x.matricize(2).unwrap();
        assert_eq!(m2.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 5.0, 2.0, 6.0]);
        // Mode 3: columns (i, j) with i fastest.
        let m3 = x.matricize(3).unwrap();
        assert_eq!(m3.row(1).iter().copied().collect::<Vec<_>>(), vec![2.0, 6.0, 4.0, 8.0]);
        assert!(matches!(x.matricize(4), Err(Error::Mode { mode: 4, order: 3 })));
        assert!(x.matricize(0).is_err());
    }

    #[test]
    fn fold_examples() {
        let shape = cube(2);
        let zero = DenseTensor::fold(&DMatrix::zeros(2, 4), 1, &shape).unwrap();
        assert_eq!(zero, DenseTensor::zeros(shape.clone()));
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 3.0, 2.0, 4.0, 5.0, 7.0, 6.0, 8.0]);
        assert_eq!(DenseTensor::fold(&m, 1, &shape).unwrap(), one_to_eight());
        assert!(DenseTensor::fold(&DMatrix::zeros(4, 2), 1, &shape).is_err());
    }

    #[test]
    fn matricize_fold_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let dims: Vec<usize> = (0..2 + trial % 3).map(|_| rng.random_range(1..5)).collect();
            let shape = Shape::new(dims).unwrap();
            let x = DenseTensor::gaussian(shape.clone(), &mut rng);
            for d in 1..=shape.order() {
                let back = DenseTensor::fold(&x.matricize(d).unwrap(), d, &shape).unwrap();
                assert_eq!(back.max_abs_diff(&x).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn mode_product_identity_and_rank1() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DenseTensor::gaussian(Shape::new(vec![3, 4, 2]).unwrap(), &mut rng);
        for d in 1..=3 {
            let id = DMatrix::identity(x.shape().dim(d), x.shape().dim(d));
            assert_eq!(x.mode_product(&id, d).unwrap(), x);
        }
        let (u, v, w) = ([1.0, 2.0], [3.0, -1.0], [0.5, 2.0]);
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 2.0, -1.0, 4.0]);
        let mu: Vec<f64> = (&m * nalgebra::DVector::from_column_slice(&u))
            .iter()
            .copied()
            .collect();
        let lhs = outer_rank1(&[&u, &v, &w]).unwrap().mode_product(&m, 1).unwrap();
        let rhs = outer_rank1(&[&mu, &v, &w]).unwrap();
        assert_eq!(lhs.dims(), &[3, 2, 2]);
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-14);
        assert!(x.mode_product(&m, 3).is_ok());
        assert!(x.mode_product(&m, 2).is_err());
    }

    #[test]
    fn outer_rank1_examples() {
        let e1 = [1.0, 0.0];
        let t = outer_rank1(&[&e1, &e1, &e1]).unwrap();
        assert_eq!(t.get(&[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(t.frobenius_norm(), 1.0);
        let ones = [1.0, 1.0];
        assert_eq!(
            outer_rank1(&[&ones, &ones, &ones]).unwrap(),
            DenseTensor::filled(cube(2), 1.0).unwrap()
        );
        assert!(outer_rank1(&[&ones, &[]]).is_err());
    }

    #[test]
    fn subarray_examples() {
        let x = one_to_eight();
        assert_eq!(x.subarray(&MultiIndexSet::full(x.shape())).unwrap(), x);
        let single = x.subarray(&MultiIndexSet::single(&[1, 1, 1])).unwrap();
        assert_eq!(single.dims(), &[1, 1, 1]);
        assert_eq!(single.data(), &[1.0]);
        assert!(x.subarray(&MultiIndexSet::single(&[3, 1, 1])).is_err());

        let big = DenseTensor::from_fn(cube(4), |i| ((i[0] - 1) * 16 + (i[1] - 1) * 4 + (i[2] - 1)) as f64).unwrap();
        let block = big.subarray(&MultiIndexSet::ranges(&[(2, 3); 3]).unwrap()).unwrap();
        let mut expected = Vec::new();
        for i in 2..=3 {
            for j in 2..=3 {
                for k in 2..=3 {
                    expected.push(((i - 1) * 16 + (j - 1) * 4 + (k - 1)) as f64);
                }
            }
        }
        assert_eq!(block.data(), expected.as_slice());
    }
}

//! Reference implementations written from the definitions, sharing no code
//! with the library: explicit index loops and a one-sided Jacobi SVD.

#![allow(dead_code)]

pub type Mat = Vec<Vec<f64>>;

/// Offset of a 0-based multi-index with the first index slowest.
pub fn offset(dims: &[usize], index: &[usize]) -> usize {
    index.iter().zip(dims).fold(0, |acc, (&i, &n)| acc * n + i)
}

/// Visits every 0-based multi-index in storage order.
pub fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    let total: usize = dims.iter().product();
    let mut index = vec![0usize; dims.len()];
    for _ in 0..total {
        f(&index);
        for k in (0..dims.len()).rev() {
            index[k] += 1;
            if index[k] < dims[k] {
                break;
            }
            index[k] = 0;
        }
    }
}

/// Mode-`d` (0-based) unfolding: rows follow mode `d`, columns the other
/// modes with the lowest-numbered one varying fastest.
pub fn unfold(data: &[f64], dims: &[usize], d: usize) -> Mat {
    let cols: usize = dims
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != d)
        .map(|(_, &n)| n)
        .product();
    let mut out = vec![vec![0.0; cols]; dims[d]];
    for_each_index(dims, |index| {
        let mut col = 0;
        let mut stride = 1;
        for (k, &n) in dims.iter().enumerate() {
            if k != d {
                col += index[k] * stride;
                stride *= n;
            }
        }
        out[index[d]][col] = data[offset(dims, index)];
    });
    out
}

pub fn transpose(a: &Mat) -> Mat {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

/// Singular values, descending, by one-sided Jacobi rotations on columns.
pub fn jacobi_singular_values(a: &Mat) -> Vec<f64> {
    let tall = if a.len() >= a[0].len() { a.clone() } else { transpose(a) };
    let m = tall.len();
    let n = tall[0].len();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| tall[i][j]).collect()).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|v| v * v).sum();
                let beta: f64 = cols[q].iter().map(|v| v * v).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = c * a - s * b;
                    *y = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn nuclear(a: &Mat) -> f64 {
    jacobi_singular_values(a).iter().sum()
}

pub fn spectral(a: &Mat) -> f64 {
    jacobi_singular_values(a)[0]
}

pub fn snn(data: &[f64], dims: &[usize]) -> f64 {
    (0..dims.len()).map(|d| nuclear(&unfold(data, dims, d))).sum::<f64>() / dims.len() as f64
}

pub fn frobenius(data: &[f64]) -> f64 {
    data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖M‖_* = √(‖M‖_F² + 2|det M|)` for a 2×2 matrix.
pub fn nuclear_2x2(m: [f64; 4]) -> f64 {
    let [a, b, c, d] = m;
    (a * a + b * b + c * c + d * d + 2.0 * (a * d - b * c).abs()).sqrt()
}

/// Largest singular value of a 2×2 matrix in closed form.
pub fn spectral_2x2(m: [f64; 4]) -> f64 {
    let [a, b, c, d] = m;
    let f = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    ((f + (f * f - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
}

/// Operator norm of a 2×2×2 tensor: scan the first unit vector over
/// `points` angles of the half circle and take the closed-form top singular
/// value of the contracted 2×2 matrix.
pub fn opnorm_2x2x2(data: &[f64], points: usize) -> f64 {
    let mut best: f64 = 0.0;
    for k in 0..points {
        let theta = std::f64::consts::PI * k as f64 / points as f64;
        let (c, s) = (theta.cos(), theta.sin());
        let m = [
            c * data[0] + s * data[4],
            c * data[1] + s * data[5],
            c * data[2] + s * data[6],
            c * data[3] + s * data[7],
        ];
        best = best.max(spectral_2x2(m));
    }
    best
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[cfg(test)]
mod self_check {
    use super::*;

    #[test]
    fn jacobi_on_known_matrix() {
        let s = jacobi_singular_values(&vec![vec![3.0, 0.0], vec![4.0, 5.0]]);
        assert!((s[0] - 45f64.sqrt()).abs() < 1e-12 && (s[1] - 5f64.sqrt()).abs() < 1e-12);
        assert!((nuclear_2x2([3.0, 0.0, 4.0, 5.0]) - s.iter().sum::<f64>()).abs() < 1e-12);
        assert!((spectral_2x2([3.0, 0.0, 4.0, 5.0]) - s[0]).abs() < 1e-12);
    }
}

//! Closed-form width bound for ODEC ground truth, the Gaussian-measurement
//! error certificate, and a Monte Carlo sandwich of the distance the width
//! bound controls.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::odec::{OdecTensor, SubdiffGeometry, TauStrategy};
use crate::seed;
use crate::tensor::DenseTensor;

/// `r³ + r + 3r(n₁+n₂+n₃ − 3r) + r(n₁n₂ + n₂n₃ + n₁n₃) − r²(n₁+n₂+n₃)`.
///
/// Upper-bounds `E inf_τ dist²(G, τ ∂‖X#‖_*)` for a rank-`r` ODEC truth,
/// hence the squared Gaussian width of its descent cone.
pub fn width_sq_bound(n: [usize; 3], r: usize) -> Result<f64> {
    let min = *n.iter().min().expect("three modes");
    if r == 0 || r > min {
        return Err(Error::Rank {
            rank: r,
            reason: format!("must lie in 1..={min} for dims {n:?}"),
        });
    }
    let [a, b, c] = n.map(|v| v as f64);
    let r = r as f64;
    let sum = a + b + c;
    let pairs = a * b + b * c + a * c;
    Ok(r.powi(3) + r + 3.0 * r * (sum - 3.0 * r) + r * pairs - r * r * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    /// Subtract the width, i.e. the square root of the width bound.
    #[default]
    Sqrt,
    /// Subtract the unrooted width bound.
    Literal,
}

impl std::str::FromStr for BoundVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(BoundVariant::Sqrt),
            "literal" => Ok(BoundVariant::Literal),
            other => Err(Error::InvalidArgument(format!("unknown bound variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub width_sq_bound: f64,
    pub width_bound: f64,
    pub m: usize,
    pub t: f64,
    pub eta: f64,
    /// `√(m−1) − subtrahend − t`, where the subtrahend depends on `variant`.
    pub denominator: f64,
    /// `2η / denominator`; `None` when the denominator is not positive.
    pub error_bound: Option<f64>,
    pub vacuous: bool,
    /// `exp(−t²/2)`.
    pub failure_prob: f64,
    pub variant: BoundVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl BoundReport {
    pub fn subtrahend(&self) -> f64 {
        match self.variant {
            BoundVariant::Sqrt => self.width_bound,
            BoundVariant::Literal => self.width_sq_bound,
        }
    }

    pub fn recompute_denominator(&self) -> f64 {
        ((self.m - 1) as f64).sqrt() - self.subtrahend() - self.t
    }
}

/// `‖X̂ − X#‖_F ≤ 2η / [√(m−1) − w − t]₊` with probability `1 − e^{−t²/2}`.
pub fn tropp_error_bound(m: usize, t: f64, eta: f64, width_sq: f64, variant: BoundVariant) -> Result<BoundReport> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need m >= 2, got {m}")));
    }
    if !(t >= 0.0 && t.is_finite()) || !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t and eta must be finite and nonnegative, got t={t}, eta={eta}"
        )));
    }
    if !(width_sq >= 0.0 && width_sq.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "width bound must be nonnegative, got {width_sq}"
        )));
    }
    let mut report = BoundReport {
        width_sq_bound: width_sq,
        width_bound: width_sq.sqrt(),
        m,
        t,
        eta,
        denominator: 0.0,
        error_bound: None,
        vacuous: true,
        failure_prob: (-t * t / 2.0).exp(),
        variant,
        warning: match variant {
            BoundVariant::Sqrt => None,
            BoundVariant::Literal => Some(
                "the literal variant subtracts the squared width bound; the certificate is conservative or vacuous"
                    .into(),
            ),
        },
    };
    report.denominator = report.recompute_denominator();
    if report.denominator > 0.0 {
        report.error_bound = Some(2.0 * eta / report.denominator);
        report.vacuous = false;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub samples: usize,
    pub upper_mean: f64,
    pub upper_sem: f64,
    pub lower_mean: f64,
    pub lower_sem: f64,
}

fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Averages the upper and lower distance estimators over `samples`
/// i.i.d. Gaussian tensors; sample `i` uses seed `derive(base_seed, [i])`.
pub fn mc_width_estimate(x: &OdecTensor, samples: usize, base_seed: u64) -> Result<WidthEstimate> {
    if samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    let geometry = SubdiffGeometry::new(x, seed::derive(base_seed, &[u64::MAX]))?;
    let pairs: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(seed::derive(base_seed, &[i as u64]));
            let g = DenseTensor::gaussian(x.shape().clone(), &mut rng);
            let upper = geometry.upper(&g, TauStrategy::Optimized)?.value;
            let lower = geometry.lower(&g)?;
            Ok((upper, lower))
        })
        .collect::<Result<_>>()?;
    let upper: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let lower: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (upper_mean, upper_sem) = mean_sem(&upper);
    let (lower_mean, lower_sem) = mean_sem(&lower);
    Ok(WidthEstimate {
        samples,
        upper_mean,
        upper_sem,
        lower_mean,
        lower_sem,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_examples() {
        assert_eq!(width_sq_bound([8, 8, 8], 1).unwrap(), 233.0);
        assert_eq!(width_sq_bound([8, 8, 8], 2).unwrap(), 406.0);
        assert_eq!(width_sq_bound([10, 10, 10], 2).unwrap(), 634.0);
        for r in 1..6 {
            let rf = r as f64;
            assert_eq!(width_sq_bound([r, r, r], r).unwrap(), rf.powi(3) + rf);
        }
        assert!(width_sq_bound([4, 5, 6], 0).is_err());
        assert!(width_sq_bound([4, 5, 6], 5).is_err());
    }

    #[test]
    fn width_monotone_in_each_mode() {
        for r in 1..=3 {
            for a in 2 * r..=12 {
                for b in 2 * r..=12 {
                    for c in 2 * r..=12 {
                        let base = width_sq_bound([a, b, c], r).unwrap();
                        assert!(width_sq_bound([a + 1, b, c], r).unwrap() >= base);
                        assert!(width_sq_bound([a, b + 1, c], r).unwrap() >= base);
                        assert!(width_sq_bound([a, b, c + 1], r).unwrap() >= base);
                    }
                }
            }
        }
    }

    #[test]
    fn certificate_example() {
        let report = tropp_error_bound(400, 2.0, 0.1, 233.0, BoundVariant::Sqrt).unwrap();
        let expected_den = 399f64.sqrt() - 233f64.sqrt() - 2.0;
        assert!((report.denominator - expected_den).abs() < 1e-12);
        assert!((report.denominator - 2.711).abs() < 1e-3);
        assert!((report.error_bound.unwrap() - 0.2 / expected_den).abs() < 1e-12);
        assert!((report.error_bound.unwrap() - 0.0738).abs() < 1e-4);
        assert!((report.failure_prob - (-2f64).exp()).abs() < 1e-15);
        assert!((report.recompute_denominator() - report.denominator).abs() < 1e-12);
    }

    #[test]
    fn noiseless_and_vacuous() {
        let exact = tropp_error_bound(400, 2.0, 0.0, 233.0, BoundVariant::Sqrt).unwrap();
        assert_eq!(exact.error_bound, Some(0.0));
        let small = tropp_error_bound(20, 2.0, 0.1, 233.0, BoundVariant::Sqrt).unwrap();
        assert!(small.vacuous && small.error_bound.is_none());
        let literal = tropp_error_bound(400, 2.0, 0.1, 233.0, BoundVariant::Literal).unwrap();
        assert!(literal.vacuous && literal.warning.is_some());
        assert!((literal.denominator - (399f64.sqrt() - 233.0 - 2.0)).abs() < 1e-12);
        assert!(tropp_error_bound(1, 2.0, 0.1, 1.0, BoundVariant::Sqrt).is_err());
        assert!(tropp_error_bound(10, -1.0, 0.1, 1.0, BoundVariant::Sqrt).is_err());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("sqrt".parse::<BoundVariant>().unwrap(), BoundVariant::Sqrt);
        assert_eq!("literal".parse::<BoundVariant>().unwrap(), BoundVariant::Literal);
        assert!("cube".parse::<BoundVariant>().is_err());
    }
}

mod common;

use proptest::prelude::*;
use snn_core::linalg;
use snn_core::spectral::{self, opnorm_bracket, OpNormConfig};
use snn_core::{seed, DenseTensor, Shape};

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=5, 2..=4)
}

fn tensor_strategy() -> impl Strategy<Value = DenseTensor> {
    dims_strategy().prop_flat_map(|dims| {
        let len: usize = dims.iter().product();
        prop::collection::vec(-3.0f64..3.0, len)
            .prop_map(move |data| DenseTensor::new(Shape::new(dims.clone()).unwrap(), data).unwrap())
    })
}

fn cubic3_strategy() -> impl Strategy<Value = (DenseTensor, DenseTensor)> {
    prop::collection::vec(1usize..=4, 3).prop_flat_map(|dims| {
        let len: usize = dims.iter().product();
        let shape = Shape::new(dims).unwrap();
        (
            prop::collection::vec(-2.0f64..2.0, len),
            prop::collection::vec(-2.0f64..2.0, len),
        )
            .prop_map(move |(a, b)| {
                (
                    DenseTensor::new(shape.clone(), a).unwrap(),
                    DenseTensor::new(shape.clone(), b).unwrap(),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layout_matches_offset_formula(x in tensor_strategy()) {
        let dims = x.dims().to_vec();
        common::for_each_index(&dims, |index| {
            let one_based: Vec<usize> = index.iter().map(|i| i + 1).collect();
            assert_eq!(x.get(&one_based).unwrap(), x.data()[common::offset(&dims, index)]);
        });
    }

    #[test]
    fn matricization_matches_oracle_and_folds_back(x in tensor_strategy()) {
        for d in 1..=x.order() {
            let m = x.matricize(d).unwrap();
            let oracle = common::unfold(x.data(), x.dims(), d - 1);
            prop_assert_eq!(m.nrows(), oracle.len());
            for (i, row) in oracle.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    prop_assert_eq!(m[(i, j)], v);
                }
            }
            prop_assert_eq!(DenseTensor::fold(&m, d, x.shape()).unwrap(), x.clone());
            // Parseval across the unfolding.
            prop_assert!((m.norm() - x.frobenius_norm()).abs() <= 1e-12 * (1.0 + x.frobenius_norm()));
        }
    }

    #[test]
    fn snn_matches_jacobi_oracle(x in tensor_strategy()) {
        let ours = spectral::snn_norm(&x).unwrap();
        let oracle = common::snn(x.data(), x.dims());
        prop_assert!(common::rel_close(ours, oracle, 1e-9), "{ours} vs {oracle}");
        for d in 1..=x.order() {
            let sv = spectral::mode_singular_values(&x, d).unwrap();
            prop_assert_eq!(sv.len(), x.dims()[d - 1]);
            let jac = common::jacobi_singular_values(&common::unfold(x.data(), x.dims(), d - 1));
            for (a, b) in sv.iter().zip(&jac) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + jac[0]));
            }
        }
    }

    #[test]
    fn snn_is_a_norm((x, y) in cubic3_strategy(), c in -4.0f64..4.0) {
        let nx = spectral::snn_norm(&x).unwrap();
        let ny = spectral::snn_norm(&y).unwrap();
        let nxy = spectral::snn_norm(&x.add(&y).unwrap()).unwrap();
        prop_assert!(nxy <= nx + ny + 1e-10 * (1.0 + nx + ny));
        let ncx = spectral::snn_norm(&x.scale(c)).unwrap();
        prop_assert!((ncx - c.abs() * nx).abs() <= 1e-10 * (1.0 + nx * c.abs()));
        prop_assert!(nx >= 0.0);
        // ‖X‖_F ≤ ‖X‖_* for every unfolding, so also for their mean.
        prop_assert!(x.frobenius_norm() <= nx + 1e-10);
    }

    #[test]
    fn snn_and_spectrum_are_orthogonally_invariant((x, _y) in cubic3_strategy(), s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let mut rotated = x.clone();
        for d in 1..=3 {
            let q = linalg::random_orthogonal(x.dims()[d - 1], &mut rng);
            rotated = rotated.mode_product(&q, d).unwrap();
        }
        let a = spectral::spectrum(&x).unwrap();
        let b = spectral::spectrum(&rotated).unwrap();
        for (sa, sb) in a.per_mode.iter().zip(&b.per_mode) {
            for (u, v) in sa.iter().zip(sb) {
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + sa[0]));
            }
        }
        prop_assert!((rotated.frobenius_norm() - x.frobenius_norm()).abs() <= 1e-10 * (1.0 + x.frobenius_norm()));
        // ‖σ(X)‖₂ = ‖X‖_F.
        prop_assert!((a.normalized_norm() - x.frobenius_norm()).abs() <= 1e-9 * (1.0 + x.frobenius_norm()));
    }

    #[test]
    fn opnorm_bracket_is_ordered((x, _y) in cubic3_strategy()) {
        let config = OpNormConfig { restarts: 4, max_iters: 200, ..OpNormConfig::default() };
        let b = opnorm_bracket(&x, &config).unwrap();
        prop_assert!(b.lower <= b.upper + 1e-10);
        prop_assert!(b.upper <= x.frobenius_norm() + 1e-10);
        let oracle_upper = (0..3)
            .map(|d| common::spectral(&common::unfold(x.data(), x.dims(), d)))
            .fold(f64::INFINITY, f64::min);
        prop_assert!((b.upper - oracle_upper).abs() <= 1e-9 * (1.0 + oracle_upper));
        // The maximizer realizes the lower value.
        let vs: Vec<&[f64]> = b.maximizer.iter().map(|v| v.as_slice()).collect();
        let rank1 = snn_core::outer_rank1(&vs).unwrap();
        prop_assert!((x.inner_product(&rank1).unwrap().abs() - b.lower).abs() <= 1e-9 * (1.0 + b.lower));
    }
}

#[test]
fn opnorm_matches_sphere_grid_on_2x2x2() {
    let shape = Shape::cubic(2, 3).unwrap();
    let mut rng = seed::rng(77);
    for _ in 0..50 {
        let x = DenseTensor::gaussian(shape.clone(), &mut rng);
        let oracle = common::opnorm_2x2x2(x.data(), 10_000);
        let b = opnorm_bracket(&x, &OpNormConfig::default()).unwrap();
        assert!(
            b.lower <= oracle * (1.0 + 1e-7) + 1e-12,
            "lower {} above oracle {oracle}",
            b.lower
        );
        assert!(
            b.lower >= oracle * (1.0 - 1e-6),
            "lower {} well below oracle {oracle}",
            b.lower
        );
        assert!(b.upper >= oracle * (1.0 - 1e-7));
    }
}

#[test]
fn rank_clamp_drops_roundoff_singular_values() {
    let u = [0.6, 0.8];
    let v = [1.0, 0.0, 0.0];
    let w = [0.0, 0.0, 1.0, 0.0];
    let x = snn_core::outer_rank1(&[&u, &v, &w]).unwrap();
    let sv = spectral::mode_singular_values(&x, 3).unwrap();
    assert_eq!(sv.iter().filter(|&&s| s > 0.0).count(), 1);
    assert!((spectral::snn_norm(&x).unwrap() - 1.0).abs() < 1e-14);
}

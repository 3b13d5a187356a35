use num_complex::Complex64;
use proptest::prelude::*;

use freefrac::matrixcore::{conjugate_tuple, CMatrix, MatrixTuple, SelfAdjointMatrix, UnitaryMatrix};
use freefrac::metricgeom::{
    cover_candidates, hausdorff_profile, log_cover_sum_with, packing_number, CoverOptions, PointCloud,
};
use freefrac::microstates::orbit_sample;

fn arb_cloud() -> impl Strategy<Value = PointCloud> {
    (1usize..4, 2usize..60).prop_flat_map(|(d, n)| {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), n)
            .prop_map(|pts| PointCloud::from_points(&pts).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn packing_cover_duality(cloud in arb_cloud(), eps in 0.01f64..0.8, seed in 0u64..1000) {
        let opts = CoverOptions { restarts: 4, seed };
        let p = packing_number(&cloud, eps).unwrap();
        let wide = cover_candidates(&cloud, 2.0 * eps, &opts).unwrap();
        prop_assert!(wide.iter().map(|c| c.count()).min().unwrap() <= p);
        for c in cover_candidates(&cloud, 0.5 * eps, &opts).unwrap() {
            prop_assert!(p <= c.count());
        }
    }

    #[test]
    fn cover_sum_below_packing_bound(cloud in arb_cloud(), eps in 0.01f64..0.8, s in 0.0f64..4.0) {
        let opts = CoverOptions { restarts: 2, seed: 1 };
        let lhs = log_cover_sum_with(&cloud, 2.0 * eps, s, &opts).unwrap();
        let rhs = (packing_number(&cloud, 0.5 * eps).unwrap() as f64).ln() + s * (4.0 * eps).ln();
        prop_assert!(lhs <= rhs + 1e-12, "{} > {}", lhs, rhs);
    }

    #[test]
    fn exponent_comparison_on_one_cover(cloud in arb_cloud(), eps in 0.01f64..0.8, r in 0.0f64..2.0, gap in 0.0f64..2.0) {
        let s = r + gap;
        for c in cover_candidates(&cloud, eps, &CoverOptions { restarts: 2, seed: 3 }).unwrap() {
            // Cells of a radius-eps cover have diameter at most 2 eps.
            let d = 2.0 * eps;
            prop_assert!(c.log_sum(r) + 1e-12 >= c.log_sum(s) + (r - s) * d.ln());
            prop_assert!(c.max_diameter() <= d * (1.0 + 1e-12));
        }
    }

    #[test]
    fn profile_is_nonincreasing_in_scale(cloud in arb_cloud(), s in 0.0f64..2.0) {
        let grid = [0.02, 0.05, 0.1, 0.2, 0.4];
        let prof = hausdorff_profile(&cloud, &grid, s, &CoverOptions { restarts: 2, seed: 0 }).unwrap();
        for w in prof.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }
}

fn permutation(k: usize, shift: usize) -> UnitaryMatrix {
    let mut m = CMatrix::zeros(k, k);
    for i in 0..k {
        m[((i + shift) % k, i)] = Complex64::new(1.0, 0.0);
    }
    UnitaryMatrix::new(m).unwrap()
}

fn sign_flips(k: usize) -> UnitaryMatrix {
    let mut m = CMatrix::zeros(k, k);
    for i in 0..k {
        m[(i, i)] = Complex64::new(if i % 3 == 1 { -1.0 } else { 1.0 }, 0.0);
    }
    UnitaryMatrix::new(m).unwrap()
}

fn quarter_phases(k: usize) -> UnitaryMatrix {
    let phases = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)];
    let mut m = CMatrix::zeros(k, k);
    for i in 0..k {
        m[(i, i)] = phases[(i * 7 + 1) % 4];
    }
    UnitaryMatrix::new(m).unwrap()
}

fn moved_cloud(pts: &[MatrixTuple], u: &UnitaryMatrix) -> PointCloud {
    let moved: Vec<MatrixTuple> = pts.iter().map(|p| conjugate_tuple(p, u).unwrap()).collect();
    PointCloud::from_tuples(&moved).unwrap()
}

fn isometry_base() -> Vec<MatrixTuple> {
    let x = MatrixTuple::single(SelfAdjointMatrix::from_real_diagonal(&[0.0, 0.3, 0.7, 1.0]));
    orbit_sample(&x, 60, 11).unwrap().points
}

#[test]
fn sign_conjugation_is_bitwise_invisible() {
    // Coordinates only change sign, so every output is identical.
    let pts = isometry_base();
    let base = PointCloud::from_tuples(&pts).unwrap();
    let cloud = moved_cloud(&pts, &sign_flips(4));
    for i in 0..base.len() {
        for j in 0..base.len() {
            assert_eq!(base.dist_sq(i, j), cloud.dist_sq(i, j));
        }
    }
    let o = CoverOptions::default();
    for eps in [0.05, 0.1, 0.2] {
        assert_eq!(packing_number(&base, eps).unwrap(), packing_number(&cloud, eps).unwrap());
        assert_eq!(log_cover_sum_with(&base, eps, 1.5, &o).unwrap(), log_cover_sum_with(&cloud, eps, 1.5, &o).unwrap());
    }
}

#[test]
fn permutation_and_phase_conjugation_preserve_outputs() {
    // Permutations and phases reorder the coordinates, so distances agree up to summation order.
    let pts = isometry_base();
    let base = PointCloud::from_tuples(&pts).unwrap();
    for u in [permutation(4, 1), permutation(4, 3), quarter_phases(4)] {
        let cloud = moved_cloud(&pts, &u);
        for i in 0..base.len() {
            for j in 0..base.len() {
                assert!((base.dist_sq(i, j) - cloud.dist_sq(i, j)).abs() <= 1e-14);
            }
        }
        let o = CoverOptions::default();
        for eps in [0.05, 0.1, 0.2] {
            assert_eq!(packing_number(&base, eps).unwrap(), packing_number(&cloud, eps).unwrap());
            let (a, b) = (log_cover_sum_with(&base, eps, 1.5, &o).unwrap(), log_cover_sum_with(&cloud, eps, 1.5, &o).unwrap());
            assert!(a == b || (a - b).abs() <= 1e-12, "{a} {b}");
        }
    }
}

mod common;

use common::*;
use confmorph::linalg::span_rank;
use confmorph::{
    frobenius_norm, kernel_basis, metric_adjoint, metric_svd, numerical_rank,
    orthogonal_complement, MapBetween, SubspaceBasis, TolerancePolicy,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn tol() -> TolerancePolicy {
    TolerancePolicy::default()
}

fn random_map(seed: u64) -> MapBetween {
    let mut r = rng(seed);
    let n = r.gen_range(1..=5);
    let m = r.gen_range(1..=5);
    let a = uniform_matrix(m, n, -2.0, 2.0, &mut r);
    MapBetween::new(a, random_space(n, &mut r), random_space(m, &mut r)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adjoint_is_an_involution(seed in any::<u64>()) {
        let t = random_map(seed);
        let back = metric_adjoint(&metric_adjoint(&t));
        let scale = t.matrix().norm().max(1.0);
        prop_assert!((back.matrix() - t.matrix()).norm() < tol().residual_tol * scale);
    }

    #[test]
    fn adjoint_satisfies_the_pairing(seed in any::<u64>()) {
        let t = random_map(seed);
        let adj = metric_adjoint(&t);
        let mut r = rng(seed ^ 0x5a5a);
        let u = uniform_matrix(t.domain().dim(), 1, -1.0, 1.0, &mut r).column(0).into_owned();
        let w = uniform_matrix(t.codomain().dim(), 1, -1.0, 1.0, &mut r).column(0).into_owned();
        let lhs = t.codomain().inner(&t.apply(&u), &w);
        let rhs = t.domain().inner(&u, &adj.apply(&w));
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn frobenius_matches_spectrum(seed in any::<u64>()) {
        let t = random_map(seed);
        let f2 = frobenius_norm(&t).powi(2);
        let s2: f64 = metric_svd(&t).singular_values.iter().map(|s| s * s).sum();
        prop_assert!((f2 - s2).abs() <= 1e-8 * f2.max(1e-300));
    }

    #[test]
    fn svd_scales_with_the_map(seed in any::<u64>(), c in prop_oneof![-3.0..-0.1f64, 0.1..3.0f64]) {
        let t = random_map(seed);
        let s = metric_svd(&t).singular_values;
        let sc = metric_svd(&t.scaled(c)).singular_values;
        for (a, b) in s.iter().zip(&sc) {
            prop_assert!((a * c.abs() - b).abs() <= 1e-10 * (1.0 + b));
        }
    }

    #[test]
    fn singular_vectors_are_metric_orthonormal(seed in any::<u64>()) {
        let t = random_map(seed);
        let svd = metric_svd(&t);
        let gv = t.domain().gram_of(&svd.right);
        let gw = t.codomain().gram_of(&svd.left);
        prop_assert!((gv - DMatrix::identity(t.domain().dim(), t.domain().dim())).norm() < 1e-9);
        prop_assert!((gw - DMatrix::identity(t.codomain().dim(), t.codomain().dim())).norm() < 1e-9);
        for (i, &s) in svd.singular_values.iter().enumerate() {
            let image = t.matrix() * svd.right.column(i);
            let want = svd.left.column(i) * s;
            prop_assert!((image - want).norm() < 1e-9 * (1.0 + s));
        }
    }

    #[test]
    fn kernel_and_complement_split_the_domain(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (t, shape) = random_geometric(5, 0.0, &mut r);
        let ker = kernel_basis(&t, &tol());
        prop_assert_eq!(ker.len(), shape.n - shape.rank);
        prop_assert_eq!(numerical_rank(&t, &tol()), shape.rank);
        prop_assert!((t.matrix() * ker.vectors()).norm() < 1e-9 * (1.0 + t.matrix().norm()));
        let h = orthogonal_complement(&ker, t.domain(), &tol()).unwrap();
        prop_assert_eq!(h.len(), shape.rank);
        let cross = h.vectors().transpose() * t.domain().gram() * ker.vectors();
        prop_assert!(cross.norm() < 1e-9);
        let mut both = DMatrix::zeros(shape.n, shape.n);
        both.columns_mut(0, h.len()).copy_from(h.vectors());
        both.columns_mut(h.len(), ker.len()).copy_from(ker.vectors());
        prop_assert_eq!(span_rank(&both, t.domain(), &tol()), shape.n);
    }

    /// Perturbations smaller than half the smallest counted singular value
    /// never lower the numerical rank.
    #[test]
    fn rank_is_lower_semicontinuous(seed in any::<u64>(), frac in 0.0..0.999f64) {
        let mut r = rng(seed);
        let (t, _) = random_geometric(5, 0.2, &mut r);
        let k = numerical_rank(&t, &tol());
        prop_assume!(k > 0);
        let sigma_r = metric_svd(&t).singular_values[k - 1];
        let (n, m) = (t.domain().dim(), t.codomain().dim());
        let e = uniform_matrix(m, n, -1.0, 1.0, &mut r);
        let e_norm = e.clone().svd(false, false).singular_values.max();
        prop_assume!(e_norm > 0.0);
        let e = e * (frac * sigma_r / 2.0 / e_norm);
        let pert = from_whitened(&(t.whitened() + e), t.domain().clone(), t.codomain().clone());
        prop_assert!(numerical_rank(&pert, &tol()) >= k);
    }
}

#[test]
fn complement_of_empty_is_whole_space() {
    let mut r = rng(3);
    let g = random_spd(4, &mut r);
    let h = orthogonal_complement(&SubspaceBasis::empty(4), &g, &tol()).unwrap();
    assert_eq!(h.len(), 4);
    let gram = g.gram_of(h.vectors());
    assert!((gram - DMatrix::identity(4, 4)).norm() < 1e-10);
}

mod common;

use common::*;
use confmorph::geometric::conformality_residual;
use confmorph::linalg::span_rank;
use confmorph::{
    analyze, construct_conf_subspace, kernel_basis, oracle_is_geometric, FactorKind, FactorSet,
    InnerSpace, OracleBudget, TolerancePolicy,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn tol() -> TolerancePolicy {
    TolerancePolicy::default()
}

/// A factor drawn from the admissible set.
fn sample_factor<R: Rng>(f: &FactorSet, rng: &mut R) -> Option<f64> {
    match f.kind {
        FactorKind::Empty => None,
        FactorKind::Point => f.upper,
        FactorKind::HalfOpenInterval => {
            let u: f64 = rng.gen_range(0.05..=1.0);
            Some(u * f.upper.unwrap_or(1.0))
        }
    }
}

fn same_set(a: &FactorSet, b: &FactorSet, rel: f64) -> bool {
    let close = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => (x - y).abs() <= rel * x.abs().max(y.abs()),
        (None, None) => true,
        _ => false,
    };
    a.kind == b.kind && close(a.upper, b.upper)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn criterion_matches_construction(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (t, shape) = random_geometric(5, 0.2, &mut r);
        let a = analyze(&t, &tol());
        prop_assert!(a.is_geometric);
        prop_assert_eq!(a.rank, shape.rank);
        prop_assert_eq!(a.rank + a.nullity, shape.n);
        let (t, _) = random_non_geometric(5, &mut r);
        let a = analyze(&t, &tol());
        prop_assert!(!a.is_geometric);
        prop_assert_eq!(a.factors.kind, FactorKind::Empty);
        prop_assert!(a.conf_basis.is_none());
    }

    #[test]
    fn factors_scale_quadratically(seed in any::<u64>(), c in prop_oneof![-4.0..-0.25f64, 0.25..4.0f64]) {
        let mut r = rng(seed);
        let (t, _) = if seed % 2 == 0 { random_geometric(5, 0.3, &mut r) } else { random_non_geometric(5, &mut r) };
        let a = analyze(&t, &tol());
        let b = analyze(&t.scaled(c), &tol());
        prop_assert_eq!(a.is_geometric, b.is_geometric);
        if a.rank > 0 {
            prop_assert!(same_set(&a.factors.scaled(c * c), &b.factors, 1e-9));
        }
    }

    #[test]
    fn constructed_witnesses_are_valid(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (t, shape) = random_geometric(5, 0.3, &mut r);
        let a = analyze(&t, &tol());
        let factor = sample_factor(&a.factors, &mut r).unwrap();
        let c = construct_conf_subspace(&t, factor, &tol()).unwrap();
        prop_assert_eq!(c.len(), shape.rank);
        if shape.rank > 0 {
            let (fit, res) = conformality_residual(&t, &c);
            prop_assert!(res < tol().residual_tol, "residual {res}");
            prop_assert!((fit - factor).abs() <= 1e-8 * factor, "fit {fit} factor {factor} res {res} shape {:?}", (shape.n, shape.m, shape.rank, shape.above));
            let ker = kernel_basis(&t, &tol());
            let mut both = DMatrix::zeros(shape.n, shape.n);
            both.columns_mut(0, c.len()).copy_from(c.vectors());
            both.columns_mut(c.len(), ker.len()).copy_from(ker.vectors());
            prop_assert_eq!(span_rank(&both, t.domain(), &tol()), shape.n);
        }
    }

    #[test]
    fn inadmissible_factors_are_refused(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (t, shape) = random_geometric(5, 0.0, &mut r);
        prop_assume!(shape.rank > 0);
        let upper = analyze(&t, &tol()).factors.upper.unwrap();
        prop_assert!(construct_conf_subspace(&t, upper * 1.01, &tol()).is_err());
    }

    /// Full-rank square maps are geometric exactly when their spectrum is one cluster.
    #[test]
    fn linear_isomorphisms(seed in any::<u64>(), n in 1usize..=5) {
        let mut r = rng(seed);
        let single = r.gen_bool(0.5) || n == 1;
        let sigma = if single { clustered_spectrum(0, n, &mut r) } else { clustered_spectrum(r.gen_range(1..n), 0, &mut r).into_iter().chain(std::iter::once(0.3)).collect::<Vec<_>>() };
        let sigma: Vec<f64> = sigma.into_iter().take(n).collect();
        prop_assume!(sigma.len() == n);
        let t = map_with_spectrum(&sigma, random_space(n, &mut r), random_space(n, &mut r), &mut r);
        let a = analyze(&t, &tol());
        prop_assert_eq!(a.rank, n);
        prop_assert_eq!(a.is_geometric, a.single_cluster());
        prop_assert_eq!(a.is_geometric, single);
    }
}

#[test]
fn zero_map_convention() {
    let t = confmorph::MapBetween::zero(InnerSpace::euclidean(3), InnerSpace::euclidean(2));
    let a = analyze(&t, &tol());
    assert!(a.is_geometric);
    assert_eq!(a.factors.canonical, Some(1.0));
    assert!(a.factors.contains(1e6, 0.0));
}

/// The spectral criterion against the optimization oracle on constructed maps
/// (the random-matrix comparison lives in the acceptance suite).
#[test]
fn criterion_agrees_with_oracle_on_constructed_maps() {
    let mut r = rng(99);
    for i in 0..40 {
        let (t, _) = if i % 2 == 0 {
            random_geometric(4, 0.2, &mut r)
        } else {
            random_non_geometric(4, &mut r)
        };
        let a = analyze(&t, &tol());
        let o = oracle_is_geometric(&t, &tol(), OracleBudget::default(), &mut r);
        assert_eq!(
            a.is_geometric, o.verdict,
            "case {i}: residual {}",
            o.residual
        );
    }
}

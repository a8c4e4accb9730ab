mod common;

use common::*;
use confmorph::geometric::cluster_sizes;
use confmorph::{
    analyze, check_characterization, construct_conf_subspace, diamond, kernel_basis,
    metric_adjoint, orthogonal_complement, p_operator, q_operator, MapBetween, SubspaceBasis,
    TolerancePolicy,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn tol() -> TolerancePolicy {
    TolerancePolicy::default()
}

fn kernel_complement(t: &MapBetween) -> SubspaceBasis {
    orthogonal_complement(&kernel_basis(t, &tol()), t.domain(), &tol()).unwrap()
}

/// Squares of the distinct cluster values of the nonzero spectrum.
fn cluster_values(t: &MapBetween) -> Vec<f64> {
    let a = analyze(t, &tol());
    let sizes = cluster_sizes(&a.singular_values, a.rank, &tol());
    let mut out = Vec::new();
    let mut i = 0;
    for s in sizes {
        out.push(a.singular_values[i].powi(2));
        i += s;
    }
    out
}

/// A random complement of the kernel: ker⊥ sheared by a random map into ker.
fn random_complement<R: Rng>(t: &MapBetween, rng: &mut R) -> SubspaceBasis {
    let ker = kernel_basis(t, &tol());
    let perp = kernel_complement(t);
    let shear = uniform_matrix(ker.len(), perp.len(), -1.0, 1.0, rng);
    let vectors = perp.vectors() + ker.vectors() * shear;
    SubspaceBasis::new(vectors, &tol()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Geometric maps pass both identities on a constructed Conf subspace.
    #[test]
    fn forward_characterization(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (t, _) = random_geometric(5, 0.3, &mut r);
        let a = analyze(&t, &tol());
        let lambda = match a.factors.upper {
            Some(u) if a.rank > 0 => u * r.gen_range(0.05..=1.0),
            _ => 1.0,
        };
        let lambda = if a.factors.kind == confmorph::FactorKind::Point { a.factors.upper.unwrap() } else { lambda };
        let h = construct_conf_subspace(&t, lambda, &tol()).unwrap();
        let (p, q) = check_characterization(&t, &h, lambda, &tol()).unwrap();
        prop_assert!(p.passes, "P residual {}", p.residual);
        prop_assert!(q.passes, "Q residual {}", q.residual);
    }

    /// Non-geometric maps fail on ker⊥ for every cluster value.
    #[test]
    fn converse_characterization(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (t, _) = random_non_geometric(5, &mut r);
        let h = kernel_complement(&t);
        for lambda in cluster_values(&t) {
            let (p, q) = check_characterization(&t, &h, lambda, &tol()).unwrap();
            prop_assert!(!(p.passes && q.passes));
        }
    }

    /// The two identities agree on arbitrary complements and factors.
    #[test]
    fn p_and_q_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (t, _) = if r.gen_bool(0.5) { random_geometric(5, 0.3, &mut r) } else { random_non_geometric(5, &mut r) };
        let h = random_complement(&t, &mut r);
        let mut lambdas = cluster_values(&t);
        lambdas.push(r.gen_range(0.1..5.0));
        for lambda in lambdas {
            let (p, q) = check_characterization(&t, &h, lambda, &tol()).unwrap();
            prop_assert_eq!(p.passes, q.passes, "λ = {}, residuals {} {}", lambda, p.residual, q.residual);
        }
    }

    #[test]
    fn diamond_on_kernel_complement_is_adjoint(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=5);
        let m = r.gen_range(1..=5);
        let t = MapBetween::new(
            uniform_matrix(m, n, -2.0, 2.0, &mut r),
            random_space(n, &mut r),
            random_space(m, &mut r),
        ).unwrap();
        let d = diamond(&t, &kernel_complement(&t), &tol()).unwrap();
        let err = (d.matrix() - metric_adjoint(&t).matrix()).norm();
        prop_assert!(err < 1e-10, "error {err}");
    }

    /// When λ = 1 passes, P and Q are projections.
    #[test]
    fn unit_factor_gives_projections(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=5);
        let m = r.gen_range(1..=5);
        let k = r.gen_range(1..=n.min(m));
        let t = map_with_spectrum(&vec![1.0; k], random_space(n, &mut r), random_space(m, &mut r), &mut r);
        let h = construct_conf_subspace(&t, 1.0, &tol()).unwrap();
        let (pc, qc) = check_characterization(&t, &h, 1.0, &tol()).unwrap();
        prop_assert!(pc.passes && qc.passes);
        let p = p_operator(&t, &h, &tol()).unwrap();
        let q = q_operator(&t, &h, &tol()).unwrap();
        prop_assert!((p.matrix() * p.matrix() - p.matrix()).norm() < 1e-9);
        prop_assert!((q.matrix() * q.matrix() - q.matrix()).norm() < 1e-9);
        let trace_p = p.matrix().trace();
        prop_assert!((trace_p - k as f64).abs() < 1e-9);
    }
}

#[test]
fn example7_complements_from_the_text() {
    let t = MapBetween::from_rows(&[&[2.0, 2.0, 0.0], &[0.0, 0.0, 2.0]]);
    for h in [
        [vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
        [vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
    ] {
        let h = SubspaceBasis::from_vecs(3, &h, &tol()).unwrap();
        let (p, q) = check_characterization(&t, &h, 4.0, &tol()).unwrap();
        assert!(p.passes && q.passes);
        let q = q_operator(&t, &h, &tol()).unwrap();
        assert!((q.matrix() - DMatrix::identity(2, 2) * 4.0).norm() < 1e-12);
    }
}

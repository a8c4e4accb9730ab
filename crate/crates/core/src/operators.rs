//! The generalized adjoint of a map restricted to a kernel complement, and
//! the operators `P = ⋄ ∘ T` and `Q = T ∘ ⋄`.
//!
//! For a complement `H` of `ker T`, `⋄` is the adjoint of `T|_H: H → range(T)`
//! on the range and zero on its orthogonal complement. With a
//! metric-orthonormal basis `U` of `H` this is `U (TU)ᵀ G_W`; the formula is
//! already zero on `range(T)⊥` because `⟨T u, y⟩_W = 0` there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    frobenius_norm, kernel_basis, orthonormalize, span_rank, MapBetween, SubspaceBasis,
    TolerancePolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorName {
    P,
    Q,
}

/// Outcome of testing `X ∘ X = λ X` for `X ∈ {P, Q}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorCheck {
    pub operator_name: OperatorName,
    pub lambda: f64,
    /// `‖X∘X − λX‖_F` in the metric Frobenius norm.
    pub residual: f64,
    pub operator_norm: f64,
    pub passes: bool,
}

fn check_complement(t: &MapBetween, h: &SubspaceBasis, tol: &TolerancePolicy) -> Result<()> {
    let n = t.domain().dim();
    if h.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "subspace vectors have dimension {} but the domain has dimension {n}",
            h.dim()
        )));
    }
    let kernel = kernel_basis(t, tol);
    if h.len() + kernel.len() != n {
        return Err(Error::NotAComplement(format!(
            "dim H = {} and dim ker = {} do not add up to {n}",
            h.len(),
            kernel.len()
        )));
    }
    let mut stacked = h.vectors().clone().resize_horizontally(n, 0.0);
    stacked
        .columns_mut(h.len(), kernel.len())
        .copy_from(kernel.vectors());
    let rank = span_rank(&stacked, t.domain(), tol);
    if rank < n {
        return Err(Error::NotAComplement(format!(
            "H + ker T spans only {rank} of {n} dimensions"
        )));
    }
    Ok(())
}

/// `(T_H)^⋄`: codomain → domain.
pub fn diamond(t: &MapBetween, h: &SubspaceBasis, tol: &TolerancePolicy) -> Result<MapBetween> {
    check_complement(t, h, tol)?;
    let u = orthonormalize(h.vectors(), t.domain());
    let tu = t.matrix() * &u;
    let matrix = &u * tu.transpose() * t.codomain().gram();
    MapBetween::new(matrix, t.codomain().clone(), t.domain().clone())
}

/// `P_H = ⋄ ∘ T`: domain → domain.
pub fn p_operator(t: &MapBetween, h: &SubspaceBasis, tol: &TolerancePolicy) -> Result<MapBetween> {
    diamond(t, h, tol)?.compose(t)
}

/// `Q_H = T ∘ ⋄`: codomain → codomain.
pub fn q_operator(t: &MapBetween, h: &SubspaceBasis, tol: &TolerancePolicy) -> Result<MapBetween> {
    t.compose(&diamond(t, h, tol)?)
}

fn check(name: OperatorName, op: &MapBetween, lambda: f64, tol: &TolerancePolicy) -> OperatorCheck {
    let sq = op.compose(op).expect("endomorphism composes with itself");
    let diff = op
        .with_matrix(sq.matrix() - op.matrix() * lambda)
        .expect("same shape");
    let residual = frobenius_norm(&diff);
    let operator_norm = frobenius_norm(op);
    OperatorCheck {
        operator_name: name,
        lambda,
        residual,
        operator_norm,
        passes: residual < tol.residual_tol * operator_norm.max(1.0),
    }
}

/// Tests `P∘P = λP` and `Q∘Q = λQ` for the given complement.
pub fn check_characterization(
    t: &MapBetween,
    h: &SubspaceBasis,
    lambda: f64,
    tol: &TolerancePolicy,
) -> Result<(OperatorCheck, OperatorCheck)> {
    let d = diamond(t, h, tol)?;
    let p = d.compose(t)?;
    let q = t.compose(&d)?;
    Ok((
        check(OperatorName::P, &p, lambda, tol),
        check(OperatorName::Q, &q, lambda, tol),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{metric_adjoint, orthogonal_complement, InnerSpace};
    use nalgebra::DMatrix;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn example7() -> MapBetween {
        MapBetween::from_rows(&[&[2.0, 2.0, 0.0], &[0.0, 0.0, 2.0]])
    }

    fn h1() -> SubspaceBasis {
        SubspaceBasis::from_vecs(3, &[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]], &tol()).unwrap()
    }

    #[test]
    fn diamond_on_h1() {
        let d = diamond(&example7(), &h1(), &tol()).unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        assert!((d.matrix() - expected).norm() < 1e-14);
    }

    #[test]
    fn p_and_q_on_h1() {
        let p = p_operator(&example7(), &h1(), &tol()).unwrap();
        let expected_p =
            DMatrix::from_row_slice(3, 3, &[4.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.0]);
        assert!((p.matrix() - expected_p).norm() < 1e-13);
        let q = q_operator(&example7(), &h1(), &tol()).unwrap();
        assert!((q.matrix() - DMatrix::identity(2, 2) * 4.0).norm() < 1e-13);
    }

    #[test]
    fn characterization_on_h1() {
        let (p, q) = check_characterization(&example7(), &h1(), 4.0, &tol()).unwrap();
        assert!(p.passes && q.passes);
        let (p, q) = check_characterization(&example7(), &h1(), 1.0, &tol()).unwrap();
        assert!(!p.passes && !q.passes);
        // P² − P = 4P − P = 3P
        assert!((p.residual - 3.0 * p.operator_norm).abs() < 1e-12);
    }

    #[test]
    fn diamond_on_kernel_complement_is_adjoint() {
        let t = example7();
        let ker = kernel_basis(&t, &tol());
        let h = orthogonal_complement(&ker, t.domain(), &tol()).unwrap();
        let d = diamond(&t, &h, &tol()).unwrap();
        assert!((d.matrix() - metric_adjoint(&t).matrix()).norm() < 1e-13);
        let p = p_operator(&t, &h, &tol()).unwrap();
        let tt = metric_adjoint(&t).compose(&t).unwrap();
        assert!((p.matrix() - tt.matrix()).norm() < 1e-13);
    }

    #[test]
    fn invertible_map_with_whole_domain() {
        let g = InnerSpace::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        let t = MapBetween::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]),
            g.clone(),
            InnerSpace::euclidean(2),
        )
        .unwrap();
        let whole = SubspaceBasis::from_vecs(2, &[vec![1.0, 0.0], vec![0.0, 1.0]], &tol()).unwrap();
        let d = diamond(&t, &whole, &tol()).unwrap();
        assert!((d.matrix() - metric_adjoint(&t).matrix()).norm() < 1e-12);
    }

    #[test]
    fn zero_map_operators_vanish() {
        let t = MapBetween::zero(InnerSpace::euclidean(2), InnerSpace::euclidean(3));
        let h = SubspaceBasis::empty(2);
        assert_eq!(p_operator(&t, &h, &tol()).unwrap().matrix().norm(), 0.0);
        assert_eq!(q_operator(&t, &h, &tol()).unwrap().matrix().norm(), 0.0);
        let (p, q) = check_characterization(&t, &h, 1.0, &tol()).unwrap();
        assert!(p.passes && q.passes);
    }

    #[test]
    fn diag_fails_for_every_cluster_value() {
        let t = MapBetween::from_rows(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let whole = SubspaceBasis::from_vecs(2, &[vec![1.0, 0.0], vec![0.0, 1.0]], &tol()).unwrap();
        for lambda in [4.0, 9.0] {
            let (p, q) = check_characterization(&t, &whole, lambda, &tol()).unwrap();
            assert!(!p.passes && !q.passes);
        }
    }

    #[test]
    fn rejects_non_complement() {
        let t = example7();
        // contains the kernel direction (1, −1, 0)
        let bad = SubspaceBasis::from_vecs(3, &[vec![1.0, -1.0, 0.0], vec![0.0, 0.0, 1.0]], &tol())
            .unwrap();
        assert!(matches!(
            diamond(&t, &bad, &tol()),
            Err(Error::NotAComplement(_))
        ));
        let short = SubspaceBasis::from_vecs(3, &[vec![1.0, 0.0, 0.0]], &tol()).unwrap();
        assert!(matches!(
            diamond(&t, &short, &tol()),
            Err(Error::NotAComplement(_))
        ));
    }
}

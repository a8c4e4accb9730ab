//! Detection of geometric functions and construction of Conf subspaces.
//!
//! A linear map `f: V → W` of rank `k` and nullity `m` is geometric when some
//! complement `C` of its kernel is mapped conformally onto the range. Every
//! such `C` is the image of a section `s = s₀ + L` of `f`, where `s₀` is the
//! pseudoinverse section onto `ker⊥` and `L: range → ker` is arbitrary.
//! Conformality with factor `r` holds exactly when
//!
//! ```text
//! L*L = (1/r)·I − s₀*s₀,     s₀*s₀ = diag(1/σ_i²),
//! ```
//!
//! which is solvable iff the right side is positive semidefinite with rank at
//! most `m`. Hence `r ≤ σ_min²`, and either `k ≤ m` (every such `r` works) or
//! `r = σ_min²` and the number of singular values outside the smallest
//! cluster is at most `m`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    kernel_from_svd, metric_svd, rank_of_spectrum, MapBetween, MetricSvd, SubspaceBasis,
    TolerancePolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Empty,
    Point,
    HalfOpenInterval,
}

/// The set of admissible conformality factors of a linear map.
///
/// `upper = None` on an interval means the interval is `(0, ∞)`, which only
/// happens for the zero map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSet {
    pub kind: FactorKind,
    pub upper: Option<f64>,
    pub lower_is_open_at_zero: bool,
    pub canonical: Option<f64>,
}

impl FactorSet {
    pub fn empty() -> Self {
        Self {
            kind: FactorKind::Empty,
            upper: None,
            lower_is_open_at_zero: false,
            canonical: None,
        }
    }

    pub fn point(value: f64) -> Self {
        Self {
            kind: FactorKind::Point,
            upper: Some(value),
            lower_is_open_at_zero: false,
            canonical: Some(value),
        }
    }

    /// `(0, upper]`, or `(0, ∞)` with canonical factor 1 when `upper` is `None`.
    pub fn interval(upper: Option<f64>) -> Self {
        Self {
            kind: FactorKind::HalfOpenInterval,
            upper,
            lower_is_open_at_zero: true,
            canonical: Some(upper.unwrap_or(1.0)),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.kind == FactorKind::Empty
    }

    /// Membership with relative slack `rel_tol` at the upper end / point.
    pub fn contains(&self, r: f64, rel_tol: f64) -> bool {
        match self.kind {
            FactorKind::Empty => false,
            FactorKind::Point => {
                let v = self.upper.expect("point sets carry a value");
                (r - v).abs() <= rel_tol * v
            }
            FactorKind::HalfOpenInterval => {
                r > 0.0 && self.upper.is_none_or(|u| r <= u * (1.0 + rel_tol))
            }
        }
    }

    pub fn scaled(&self, c2: f64) -> Self {
        match self.kind {
            FactorKind::Empty => self.clone(),
            FactorKind::Point => Self::point(self.upper.unwrap() * c2),
            FactorKind::HalfOpenInterval => Self::interval(self.upper.map(|u| u * c2)),
        }
    }

    /// Whether two factor sets could come from a continuous factor function
    /// evaluated at neighbouring points: they intersect after widening each
    /// by `rel_slack`.
    pub fn compatible(&self, other: &FactorSet, rel_slack: f64) -> bool {
        let range = |f: &FactorSet| -> Option<(f64, f64)> {
            match f.kind {
                FactorKind::Empty => None,
                FactorKind::Point => {
                    let v = f.upper.unwrap();
                    Some((v, v))
                }
                FactorKind::HalfOpenInterval => Some((0.0, f.upper.unwrap_or(f64::INFINITY))),
            }
        };
        match (range(self), range(other)) {
            (Some((lo1, hi1)), Some((lo2, hi2))) => {
                lo1 <= hi2 * (1.0 + rel_slack) && lo2 <= hi1 * (1.0 + rel_slack)
            }
            _ => false,
        }
    }
}

/// Verdict and certificate for a single linear map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricAnalysis {
    pub is_geometric: bool,
    pub rank: usize,
    pub nullity: usize,
    pub singular_values: Vec<f64>,
    /// Cluster sizes of the nonzero spectrum, largest values first.
    pub cluster_sizes: Vec<usize>,
    pub sigma_min_multiplicity: usize,
    pub factors: FactorSet,
    pub conf_basis: Option<SubspaceBasis>,
    pub kernel: SubspaceBasis,
}

impl GeometricAnalysis {
    /// All nonzero singular values form one cluster (vacuously true for the
    /// zero map).
    pub fn single_cluster(&self) -> bool {
        self.cluster_sizes.len() <= 1
    }

    /// Smallest nonzero singular value.
    pub fn sigma_min(&self) -> Option<f64> {
        (self.rank > 0).then(|| self.singular_values[self.rank - 1])
    }

    pub fn canonical_factor(&self) -> Option<f64> {
        self.factors.canonical
    }
}

/// Sizes of the clusters of the leading `rank` singular values.
pub fn cluster_sizes(sigma: &[f64], rank: usize, tol: &TolerancePolicy) -> Vec<usize> {
    let mut sizes = Vec::new();
    if rank == 0 {
        return sizes;
    }
    let mut current = 1;
    for w in sigma[..rank].windows(2) {
        if w[0] - w[1] <= tol.cluster_rel_tol * w[0] {
            current += 1;
        } else {
            sizes.push(current);
            current = 1;
        }
    }
    sizes.push(current);
    sizes
}

pub fn analyze(t: &MapBetween, tol: &TolerancePolicy) -> GeometricAnalysis {
    analyze_with_scale(t, tol, 0.0)
}

/// [`analyze`] with the rank threshold floored at
/// `rank_rel_tol · reference_scale`.
pub fn analyze_with_scale(
    t: &MapBetween,
    tol: &TolerancePolicy,
    reference_scale: f64,
) -> GeometricAnalysis {
    let svd = metric_svd(t);
    let rank = rank_of_spectrum(&svd.singular_values, tol, reference_scale);
    analysis_from_svd(t, &svd, rank, tol)
}

fn analysis_from_svd(
    t: &MapBetween,
    svd: &MetricSvd,
    rank: usize,
    tol: &TolerancePolicy,
) -> GeometricAnalysis {
    let n = t.domain().dim();
    let nullity = n - rank;
    let sizes = cluster_sizes(&svd.singular_values, rank, tol);
    let mult = sizes.last().copied().unwrap_or(0);
    let kernel = kernel_from_svd(svd, rank);

    let factors = if rank == 0 {
        FactorSet::interval(None)
    } else {
        let smin = svd.singular_values[rank - 1];
        let smin2 = smin * smin;
        if rank <= nullity {
            FactorSet::interval(Some(smin2))
        } else if rank - mult <= nullity {
            FactorSet::point(smin2)
        } else {
            FactorSet::empty()
        }
    };
    let is_geometric = !factors.is_empty();

    let conf_basis = if !is_geometric {
        None
    } else if rank == 0 {
        Some(SubspaceBasis::empty(n))
    } else {
        let r = factors
            .canonical
            .expect("non-empty sets have a canonical factor");
        Some(
            conf_from_svd(svd, rank, nullity, r, tol)
                .expect("canonical factor is admissible by construction"),
        )
    };

    GeometricAnalysis {
        is_geometric,
        rank,
        nullity,
        singular_values: svd.singular_values.clone(),
        cluster_sizes: sizes,
        sigma_min_multiplicity: mult,
        factors,
        conf_basis,
        kernel,
    }
}

/// Builds a Conf subspace of `t` with conformality factor `r`.
///
/// The returned basis `c_1..c_k` satisfies `T c_i = w_i` for the metric left
/// singular vectors `w_i`, and `⟨c_i, c_j⟩ = δ_ij / r`. For the zero map the
/// empty basis is returned.
pub fn construct_conf_subspace(
    t: &MapBetween,
    r: f64,
    tol: &TolerancePolicy,
) -> Result<SubspaceBasis> {
    let svd = metric_svd(t);
    let rank = rank_of_spectrum(&svd.singular_values, tol, 0.0);
    let analysis = analysis_from_svd(t, &svd, rank, tol);
    if !analysis.is_geometric {
        return Err(Error::FactorNotAdmissible {
            factor: r,
            reason: "map is not geometric".into(),
        });
    }
    if !analysis.factors.contains(r, 2.0 * tol.cluster_rel_tol) {
        return Err(Error::FactorNotAdmissible {
            factor: r,
            reason: format!("admissible set is {:?}", analysis.factors),
        });
    }
    if rank == 0 {
        return Ok(SubspaceBasis::empty(t.domain().dim()));
    }
    conf_from_svd(&svd, rank, analysis.nullity, r, tol)
}

fn conf_from_svd(
    svd: &MetricSvd,
    rank: usize,
    nullity: usize,
    r: f64,
    tol: &TolerancePolicy,
) -> Result<SubspaceBasis> {
    let sigma = &svd.singular_values[..rank];
    // Diagonal of (1/r)·I − s₀*s₀ in the left singular frame.
    let mut defect: Vec<f64> = sigma
        .iter()
        .map(|s| (1.0 / r - 1.0 / (s * s)).max(0.0))
        .collect();

    let mut positive: Vec<usize> = (0..rank).filter(|&i| defect[i] > 0.0).collect();
    if positive.len() > nullity {
        // Values inside the smallest cluster only carry rounding defects.
        positive.sort_by(|&a, &b| defect[a].total_cmp(&defect[b]));
        let excess = positive.len() - nullity;
        for &i in &positive[..excess] {
            if defect[i] * r > 4.0 * tol.cluster_rel_tol {
                return Err(Error::FactorNotAdmissible {
                    factor: r,
                    reason: format!(
                        "{} singular values exceed the factor but the kernel has dimension {nullity}",
                        positive.len()
                    ),
                });
            }
            defect[i] = 0.0;
        }
        positive.drain(..excess);
        positive.sort_unstable();
    }

    let n = svd.right.nrows();
    let mut basis = DMatrix::zeros(n, rank);
    for (i, s) in sigma[..rank].iter().enumerate() {
        basis.set_column(i, &(svd.right.column(i) / *s));
    }
    for (slot, &i) in positive.iter().enumerate() {
        let kernel_vec = svd.right.column(rank + slot);
        let updated = basis.column(i) + kernel_vec * defect[i].sqrt();
        basis.set_column(i, &updated);
    }
    Ok(SubspaceBasis::from_columns_unchecked(basis))
}

/// Least-squares factor `r` and relative residual
/// `‖S − rB‖_F / ‖S‖_F` where `S` is the Gram of `T·C` and `B` the Gram of `C`.
pub fn conformality_residual(t: &MapBetween, c: &SubspaceBasis) -> (f64, f64) {
    if c.is_empty() {
        return (1.0, 0.0);
    }
    let image = t.matrix() * c.vectors();
    let s = t.codomain().gram_of(&image);
    let b = t.domain().gram_of(c.vectors());
    let r = s.dot(&b) / b.dot(&b);
    let scale = s.norm();
    let res = (&s - &b * r).norm();
    (r, if scale > 0.0 { res / scale } else { res })
}

/// Whether the spectrum of a map lies close to a decision threshold: some
/// adjacent pair of nonzero singular values has a relative gap that is
/// neither clearly tied nor clearly separated at `cluster_rel_tol`, or some
/// singular value is within a decade of the rank threshold.
pub fn near_decision_boundary(analysis: &GeometricAnalysis, tol: &TolerancePolicy) -> bool {
    let sv = &analysis.singular_values;
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return false;
    }
    let rank_gap = sv.iter().any(|&s| {
        let ratio = s / smax;
        ratio >= 1e-3 * tol.rank_rel_tol && ratio < 10.0 * tol.rank_rel_tol
    });
    let cluster_gap = sv[..analysis.rank].windows(2).any(|w| {
        let g = (w[0] - w[1]) / w[0];
        g >= 1e-3 * tol.cluster_rel_tol && g < 10.0 * tol.cluster_rel_tol
    });
    rank_gap || cluster_gap
}

//! Linear algebra on finite-dimensional real inner-product spaces.
//!
//! Every space carries a symmetric positive-definite Gram matrix `G = LLᵀ`.
//! Metric quantities are computed by whitening: a map with matrix `M` from
//! `(V, G_V)` to `(W, G_W)` is represented in orthonormal coordinates by
//! `A = L_Wᵀ · M · L_V⁻ᵀ`, after which ordinary Euclidean routines apply.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical thresholds shared by every decision procedure in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    /// A singular value counts towards the rank when it exceeds
    /// `rank_rel_tol · σ_max`.
    pub rank_rel_tol: f64,
    /// Adjacent singular values `σ_i ≥ σ_{i+1}` share a cluster when
    /// `σ_i − σ_{i+1} ≤ cluster_rel_tol · σ_i`.
    pub cluster_rel_tol: f64,
    /// Tolerance for identities checked on residuals.
    pub residual_tol: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            rank_rel_tol: 1e-10,
            cluster_rel_tol: 1e-8,
            residual_tol: 1e-8,
        }
    }
}

impl TolerancePolicy {
    pub fn validate(&self) -> Result<()> {
        let all = [self.rank_rel_tol, self.cluster_rel_tol, self.residual_tol];
        if all.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidTolerance(format!(
                "tolerances must be finite and strictly positive, got {self:?}"
            )));
        }
        if self.cluster_rel_tol < self.rank_rel_tol {
            return Err(Error::InvalidTolerance(format!(
                "cluster_rel_tol ({}) must be >= rank_rel_tol ({})",
                self.cluster_rel_tol, self.rank_rel_tol
            )));
        }
        Ok(())
    }
}

/// A finite-dimensional real inner-product space given by its Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSpace {
    gram: DMatrix<f64>,
    // Lower Cholesky factor: gram = lower · lowerᵀ.
    lower: DMatrix<f64>,
}

impl InnerSpace {
    pub fn euclidean(dim: usize) -> Self {
        Self {
            gram: DMatrix::identity(dim, dim),
            lower: DMatrix::identity(dim, dim),
        }
    }

    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(gram, &TolerancePolicy::default())
    }

    /// Validates `gram`: square, finite, symmetric up to `residual_tol`
    /// (relative), and positive definite. Small asymmetries are removed by
    /// replacing `G` with `(G + Gᵀ)/2`.
    pub fn with_tolerance(gram: DMatrix<f64>, tol: &TolerancePolicy) -> Result<Self> {
        let n = gram.nrows();
        if n == 0 || gram.ncols() != n {
            return Err(Error::InvalidInnerSpace(format!(
                "gram must be a non-empty square matrix, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        if gram.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInnerSpace(
                "gram has non-finite entries".into(),
            ));
        }
        let asym = (&gram - gram.transpose()).norm();
        if asym > tol.residual_tol * gram.norm().max(1.0) {
            return Err(Error::InvalidInnerSpace(format!(
                "gram is not symmetric (asymmetry {asym:e})"
            )));
        }
        let gram = (&gram + gram.transpose()) * 0.5;
        let lower = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidInnerSpace("gram is not positive definite".into()))?
            .unpack();
        Ok(Self { gram, lower })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn is_euclidean(&self) -> bool {
        self.gram == DMatrix::identity(self.dim(), self.dim())
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.gram * v))
    }

    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// Gram matrix `Bᵀ G B` of the columns of `vectors`.
    pub fn gram_of(&self, vectors: &DMatrix<f64>) -> DMatrix<f64> {
        vectors.transpose() * &self.gram * vectors
    }

    /// Coordinates of `x` in an orthonormal frame: `Lᵀ x`.
    pub fn whiten(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.lower.tr_mul(x)
    }

    /// Inverse of [`whiten`](Self::whiten): solves `Lᵀ x = y`.
    pub fn unwhiten(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.lower
            .tr_solve_lower_triangular(y)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// Solves `L y = b`; maps covectors into the orthonormal frame.
    pub fn whiten_dual(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.lower
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// Solves `G x = b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.unwhiten(&self.whiten_dual(b))
    }

    /// A basis of the whole space that is orthonormal in this metric.
    pub fn orthonormal_basis(&self) -> DMatrix<f64> {
        self.unwhiten(&DMatrix::identity(self.dim(), self.dim()))
    }
}

/// A linear map between two inner-product spaces, stored as a
/// `codomain.dim × domain.dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MapBetween {
    matrix: DMatrix<f64>,
    domain: InnerSpace,
    codomain: InnerSpace,
}

impl MapBetween {
    pub fn new(matrix: DMatrix<f64>, domain: InnerSpace, codomain: InnerSpace) -> Result<Self> {
        if matrix.nrows() != codomain.dim() || matrix.ncols() != domain.dim() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but spaces have dims {} -> {}",
                matrix.nrows(),
                matrix.ncols(),
                domain.dim(),
                codomain.dim()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::DimensionMismatch(
                "matrix has non-finite entries".into(),
            ));
        }
        Ok(Self {
            matrix,
            domain,
            codomain,
        })
    }

    /// The map between standard Euclidean spaces with the given matrix.
    pub fn euclidean(matrix: DMatrix<f64>) -> Self {
        let domain = InnerSpace::euclidean(matrix.ncols());
        let codomain = InnerSpace::euclidean(matrix.nrows());
        Self {
            matrix,
            domain,
            codomain,
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let ncols = rows.first().map_or(0, |r| r.len());
        Self::euclidean(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }

    pub fn identity(space: InnerSpace) -> Self {
        let n = space.dim();
        Self {
            matrix: DMatrix::identity(n, n),
            domain: space.clone(),
            codomain: space,
        }
    }

    pub fn zero(domain: InnerSpace, codomain: InnerSpace) -> Self {
        Self {
            matrix: DMatrix::zeros(codomain.dim(), domain.dim()),
            domain,
            codomain,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn domain(&self) -> &InnerSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &InnerSpace {
        &self.codomain
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            matrix: &self.matrix * c,
            ..self.clone()
        }
    }

    /// Same spaces, different matrix.
    pub fn with_matrix(&self, matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix, self.domain.clone(), self.codomain.clone())
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &MapBetween) -> Result<Self> {
        if inner.codomain != self.domain {
            return Err(Error::DimensionMismatch(
                "composition requires inner codomain == outer domain".into(),
            ));
        }
        Ok(Self {
            matrix: &self.matrix * &inner.matrix,
            domain: inner.domain.clone(),
            codomain: self.codomain.clone(),
        })
    }

    /// Matrix of the map in orthonormal frames of both spaces.
    pub fn whitened(&self) -> DMatrix<f64> {
        // M · L_V⁻ᵀ = (L_V⁻¹ Mᵀ)ᵀ
        let right = self
            .domain
            .whiten_dual(&self.matrix.transpose())
            .transpose();
        self.codomain.whiten(&right)
    }
}

/// A list of vectors of a common dimension, stored as matrix columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "BasisRepr", try_from = "BasisRepr")]
pub struct SubspaceBasis {
    vectors: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct BasisRepr {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl From<SubspaceBasis> for BasisRepr {
    fn from(b: SubspaceBasis) -> Self {
        Self {
            dim: b.dim(),
            vectors: b.to_vecs(),
        }
    }
}

impl TryFrom<BasisRepr> for SubspaceBasis {
    type Error = Error;

    fn try_from(r: BasisRepr) -> Result<Self> {
        if r.vectors.iter().any(|v| v.len() != r.dim) {
            return Err(Error::DimensionMismatch(format!(
                "basis vectors must all have dimension {}",
                r.dim
            )));
        }
        Ok(Self::from_vecs_unchecked(r.dim, &r.vectors))
    }
}

impl SubspaceBasis {
    /// Builds a basis from matrix columns, rejecting dependent columns.
    pub fn new(vectors: DMatrix<f64>, tol: &TolerancePolicy) -> Result<Self> {
        let rank = euclidean_rank(&vectors, tol.rank_rel_tol);
        if rank < vectors.ncols() {
            return Err(Error::DependentBasis {
                rank,
                count: vectors.ncols(),
            });
        }
        Ok(Self { vectors })
    }

    pub fn from_vecs(dim: usize, vecs: &[Vec<f64>], tol: &TolerancePolicy) -> Result<Self> {
        if vecs.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "basis vectors must all have dimension {dim}"
            )));
        }
        Self::new(Self::from_vecs_unchecked(dim, vecs).vectors, tol)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            vectors: DMatrix::zeros(dim, 0),
        }
    }

    pub(crate) fn from_columns_unchecked(vectors: DMatrix<f64>) -> Self {
        Self { vectors }
    }

    fn from_vecs_unchecked(dim: usize, vecs: &[Vec<f64>]) -> Self {
        Self {
            vectors: DMatrix::from_fn(dim, vecs.len(), |i, j| vecs[j][i]),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.vectors
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect()
    }

    /// True when `v` lies in the span, up to `rel_tol` relative to `‖v‖`.
    pub fn contains(&self, v: &DVector<f64>, rel_tol: f64) -> bool {
        let scale = v.norm();
        if scale == 0.0 {
            return true;
        }
        if self.is_empty() {
            return false;
        }
        // independent columns, so QR least squares is exact enough
        let qr = self.vectors.clone().qr();
        let rhs = qr.q().transpose() * v;
        let coeffs = qr
            .r()
            .solve_upper_triangular(&rhs)
            .expect("independent basis has invertible R");
        (&self.vectors * coeffs - v).norm() <= rel_tol * scale
    }
}

/// Metric singular value decomposition.
///
/// `right` columns are orthonormal in the domain metric and `left` columns in
/// the codomain metric; both are complete bases. The first
/// `singular_values.len()` columns are paired: `T right_i = σ_i left_i`.
#[derive(Debug, Clone)]
pub struct MetricSvd {
    pub singular_values: Vec<f64>,
    pub right: DMatrix<f64>,
    pub left: DMatrix<f64>,
}

impl MetricSvd {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }
}

pub fn metric_adjoint(t: &MapBetween) -> MapBetween {
    let rhs = t.matrix.transpose() * t.codomain.gram();
    MapBetween {
        matrix: t.domain.solve(&rhs),
        domain: t.codomain.clone(),
        codomain: t.domain.clone(),
    }
}

pub fn metric_svd(t: &MapBetween) -> MetricSvd {
    let (u, sigma, v) = sorted_svd(&t.whitened());
    MetricSvd {
        singular_values: sigma,
        right: t.domain.unwhiten(&v),
        left: t.codomain.unwhiten(&u),
    }
}

/// Number of singular values above `rank_rel_tol · σ_max`.
pub fn numerical_rank(t: &MapBetween, tol: &TolerancePolicy) -> usize {
    rank_of_spectrum(&metric_svd(t).singular_values, tol, 0.0)
}

/// Rank with threshold `rank_rel_tol · max(σ_max, reference_scale)`.
///
/// A reference scale lets a family of maps (e.g. a Jacobian sampled over a
/// grid) share one threshold, so that a rank-one map whose only singular
/// value is rounding noise is reported as rank zero.
pub fn rank_of_spectrum(sigma: &[f64], tol: &TolerancePolicy, reference_scale: f64) -> usize {
    let scale = sigma.first().copied().unwrap_or(0.0).max(reference_scale);
    if scale <= 0.0 {
        return 0;
    }
    let threshold = tol.rank_rel_tol * scale;
    sigma.iter().filter(|&&s| s > threshold).count()
}

pub fn kernel_basis(t: &MapBetween, tol: &TolerancePolicy) -> SubspaceBasis {
    let svd = metric_svd(t);
    let rank = rank_of_spectrum(&svd.singular_values, tol, 0.0);
    kernel_from_svd(&svd, rank)
}

pub(crate) fn kernel_from_svd(svd: &MetricSvd, rank: usize) -> SubspaceBasis {
    let n = svd.right.ncols();
    SubspaceBasis::from_columns_unchecked(svd.right.columns(rank, n - rank).into_owned())
}

/// `√trace(T* ∘ T)` with the metric adjoint.
pub fn frobenius_norm(t: &MapBetween) -> f64 {
    let adj = metric_adjoint(t);
    (&adj.matrix * &t.matrix).trace().max(0.0).sqrt()
}

/// Basis of the metric-orthogonal complement of `span(basis)`.
///
/// The returned vectors are orthonormal in the space's metric.
pub fn orthogonal_complement(
    basis: &SubspaceBasis,
    space: &InnerSpace,
    tol: &TolerancePolicy,
) -> Result<SubspaceBasis> {
    if basis.dim() != space.dim() {
        return Err(Error::DimensionMismatch(format!(
            "basis has dimension {} but space has dimension {}",
            basis.dim(),
            space.dim()
        )));
    }
    if basis.is_empty() {
        return Ok(SubspaceBasis::from_columns_unchecked(
            space.orthonormal_basis(),
        ));
    }
    let white = space.whiten(&basis.vectors);
    let rank = euclidean_rank(&white, tol.rank_rel_tol);
    if rank < basis.len() {
        return Err(Error::DependentBasis {
            rank,
            count: basis.len(),
        });
    }
    let q = white.qr().q();
    let comp = euclidean_complement(&q);
    Ok(SubspaceBasis::from_columns_unchecked(space.unwhiten(&comp)))
}

/// Rank of the span of the columns of `vectors` measured in `space`.
pub fn span_rank(vectors: &DMatrix<f64>, space: &InnerSpace, tol: &TolerancePolicy) -> usize {
    euclidean_rank(&space.whiten(vectors), tol.rank_rel_tol)
}

/// Metric-orthonormal basis of the span of independent columns.
pub fn orthonormalize(vectors: &DMatrix<f64>, space: &InnerSpace) -> DMatrix<f64> {
    if vectors.ncols() == 0 {
        return vectors.clone();
    }
    let q = space.whiten(vectors).qr().q();
    space.unwhiten(&q)
}

pub(crate) fn euclidean_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let (_, sv, _) = sorted_svd(m);
    let max = sv.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// One-sided Jacobi SVD of a tall matrix (`m ≥ n`): returns `W` whose columns
/// are `σ_i u_i`, the singular values `σ_i = ‖W_i‖`, and an orthogonal `V`
/// with `B V = W`. Small singular values come out with high relative
/// accuracy, which matters for rank decisions.
///
/// Used instead of nalgebra's bidiagonal SVD, which returns inconsistent
/// factors for some rank-deficient inputs.
fn jacobi_svd_tall(b: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    const MAX_SWEEPS: usize = 80;
    let n = b.ncols();
    let mut w = b.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, p)], mat[(r, q)]);
                        mat[(r, p)] = c * x - s * y;
                        mat[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = (0..n).map(|i| w.column(i).norm()).collect();
    (w, sigma, v)
}

/// Full SVD `A = U Σ Vᵀ` with square orthogonal `U`, `V` and singular values
/// sorted descending (stable, so ties keep column order).
pub(crate) fn sorted_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let q = m.min(n);
    let tall = m >= n;
    // `scaled` holds σ_i times the singular vectors on the short side; `full`
    // is the orthogonal factor on the other side.
    let (scaled, sv, full) = if tall {
        jacobi_svd_tall(a)
    } else {
        jacobi_svd_tall(&a.transpose())
    };

    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(Ordering::Equal));
    let sigma: Vec<f64> = order.iter().map(|&i| sv[i]).collect();

    let full_sorted = DMatrix::from_fn(full.nrows(), q, |r, c| full[(r, order[c])]);
    // Directions attached to numerically zero values are rebuilt as an
    // orthonormal complement instead of normalizing rounding noise.
    let cutoff = sigma.first().copied().unwrap_or(0.0) * f64::EPSILON * (m.max(n) as f64);
    let kept = sigma.iter().take_while(|&&s| s > cutoff && s > 0.0).count();
    let short = DMatrix::from_fn(scaled.nrows(), kept, |r, c| {
        scaled[(r, order[c])] / sigma[c]
    });
    let short_full = extend_orthonormal(orthonormal_columns(short));

    let (u, v) = if tall {
        (short_full, full_sorted)
    } else {
        (full_sorted, short_full)
    };
    (u, sigma, v)
}

/// Re-orthonormalizes nearly orthonormal columns (modified Gram–Schmidt,
/// twice) so rounding in the Jacobi iteration cannot accumulate.
fn orthonormal_columns(mut q: DMatrix<f64>) -> DMatrix<f64> {
    for _ in 0..2 {
        for j in 0..q.ncols() {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let ci = q.column(i).into_owned();
                let mut cj = q.column_mut(j);
                cj.axpy(-proj, &ci, 1.0);
            }
            let norm = q.column(j).norm();
            q.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    q
}

fn extend_orthonormal(q: DMatrix<f64>) -> DMatrix<f64> {
    let (p, k) = q.shape();
    if k >= p {
        return q;
    }
    let comp = euclidean_complement(&q);
    let mut full = DMatrix::zeros(p, p);
    full.columns_mut(0, k).copy_from(&q);
    full.columns_mut(k, p - k).copy_from(&comp);
    full
}

/// Orthonormal basis of the Euclidean complement of the span of the
/// orthonormal columns of `q`.
fn euclidean_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, k) = q.shape();
    if k == 0 {
        return DMatrix::identity(p, p);
    }
    if k >= p {
        return DMatrix::zeros(p, 0);
    }
    // Householder QR of [q | I]: the leading k columns of the orthogonal
    // factor span span(q), the remaining p − k span its complement.
    let mut aug = DMatrix::zeros(p, k + p);
    aug.columns_mut(0, k).copy_from(q);
    aug.columns_mut(k, p).fill_with_identity();
    let full = aug.qr().q();
    full.columns(k, p - k).into_owned()
}

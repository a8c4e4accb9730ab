//! Smooth maps between single-chart Riemannian manifolds and their pointwise
//! classification.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometric::{analyze_with_scale, GeometricAnalysis};
use crate::linalg::{frobenius_norm, InnerSpace, MapBetween, TolerancePolicy};

pub type MetricField = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type PointMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A manifold covered by one chart, with a metric field on the chart domain.
/// A missing metric field means the Euclidean metric.
#[derive(Clone)]
pub struct ChartManifold {
    dim: usize,
    metric_field: Option<MetricField>,
    domain_box: Option<Vec<(f64, f64)>>,
}

impl fmt::Debug for ChartManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartManifold")
            .field("dim", &self.dim)
            .field("euclidean", &self.metric_field.is_none())
            .field("domain_box", &self.domain_box)
            .finish()
    }
}

impl ChartManifold {
    pub fn euclidean(dim: usize) -> Self {
        Self {
            dim,
            metric_field: None,
            domain_box: None,
        }
    }

    pub fn with_metric(
        dim: usize,
        metric: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            metric_field: Some(Arc::new(metric)),
            domain_box: None,
        }
    }

    pub fn with_box(mut self, bounds: Vec<(f64, f64)>) -> Self {
        assert_eq!(bounds.len(), self.dim, "one interval per coordinate");
        self.domain_box = Some(bounds);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain_box(&self) -> Option<&[(f64, f64)]> {
        self.domain_box.as_deref()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.domain_box {
            None => true,
            Some(b) => b.iter().zip(x).all(|(&(lo, hi), &v)| {
                let slack = 1e-12 * (hi - lo).abs().max(1.0);
                v >= lo - slack && v <= hi + slack
            }),
        }
    }

    pub fn metric_at(&self, x: &[f64]) -> Result<InnerSpace> {
        match &self.metric_field {
            None => Ok(InnerSpace::euclidean(self.dim)),
            Some(g) => {
                let gram = g(x);
                if gram.shape() != (self.dim, self.dim) {
                    return Err(Error::DimensionMismatch(format!(
                        "metric field returned a {}x{} matrix on a {}-dimensional chart",
                        gram.nrows(),
                        gram.ncols(),
                        self.dim
                    )));
                }
                InnerSpace::new(gram)
            }
        }
    }
}

/// A smooth map between chart domains with an optional analytic Jacobian.
#[derive(Clone)]
pub struct SmoothMapSpec {
    domain_dim: usize,
    codomain_dim: usize,
    map: PointMap,
    jacobian: Option<JacobianFn>,
    fd_step: f64,
}

impl fmt::Debug for SmoothMapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMapSpec")
            .field("domain_dim", &self.domain_dim)
            .field("codomain_dim", &self.codomain_dim)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl SmoothMapSpec {
    pub fn new(
        domain_dim: usize,
        codomain_dim: usize,
        map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            domain_dim,
            codomain_dim,
            map: Arc::new(map),
            jacobian: None,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn without_jacobian(mut self) -> Self {
        self.jacobian = None;
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    /// The map `x ↦ A x`.
    pub fn linear(a: DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        let a2 = a.clone();
        Self::new(n, m, move |x| {
            (&a * DVector::from_column_slice(x))
                .iter()
                .copied()
                .collect()
        })
        .with_jacobian(move |_| a2.clone())
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.domain_dim {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, map expects {}",
                x.len(),
                self.domain_dim
            )));
        }
        let y = (self.map)(x);
        if y.len() != self.codomain_dim {
            return Err(Error::MapEvaluation {
                point: x.to_vec(),
                reason: format!("expected {} outputs, got {}", self.codomain_dim, y.len()),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::MapEvaluation {
                point: x.to_vec(),
                reason: "non-finite output".into(),
            });
        }
        Ok(y)
    }

    /// Central-difference Jacobian with step `fd_step`.
    pub fn fd_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let h = self.fd_step;
        let mut jac = DMatrix::zeros(self.codomain_dim, self.domain_dim);
        let mut probe = x.to_vec();
        for j in 0..self.domain_dim {
            probe[j] = x[j] + h;
            let plus = self.eval(&probe)?;
            probe[j] = x[j] - h;
            let minus = self.eval(&probe)?;
            probe[j] = x[j];
            for i in 0..self.codomain_dim {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    pub fn jacobian_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        match &self.jacobian {
            Some(j) => {
                let m = j(x);
                if m.shape() != (self.codomain_dim, self.domain_dim) {
                    return Err(Error::DimensionMismatch(format!(
                        "jacobian is {}x{}, expected {}x{}",
                        m.nrows(),
                        m.ncols(),
                        self.codomain_dim,
                        self.domain_dim
                    )));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::MapEvaluation {
                        point: x.to_vec(),
                        reason: "non-finite jacobian".into(),
                    });
                }
                Ok(m)
            }
            None => self.fd_jacobian(x),
        }
    }
}

/// `df_x` as a map `(T_xM, g_M(x)) → (T_{f(x)}N, g_N(f(x)))`.
pub fn jacobian_at(
    spec: &SmoothMapSpec,
    x: &[f64],
    chart_m: &ChartManifold,
    chart_n: &ChartManifold,
) -> Result<MapBetween> {
    if spec.domain_dim != chart_m.dim() || spec.codomain_dim != chart_n.dim() {
        return Err(Error::DimensionMismatch(format!(
            "map {} -> {} between charts of dims {} and {}",
            spec.domain_dim,
            spec.codomain_dim,
            chart_m.dim(),
            chart_n.dim()
        )));
    }
    if !chart_m.contains(x) {
        return Err(Error::Precondition(format!(
            "{x:?} lies outside the domain box"
        )));
    }
    let fx = spec.eval(x)?;
    let jac = spec.jacobian_matrix(x)?;
    MapBetween::new(jac, chart_m.metric_at(x)?, chart_n.metric_at(&fx)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub immersion: bool,
    pub submersion: bool,
    pub geometric: bool,
    pub conformal_riemannian_map: bool,
    pub riemannian_map: bool,
    pub isometric_immersion: bool,
    pub conformal_immersion: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EikonalRecord {
    /// Canonical factor times rank.
    pub lhs: f64,
    /// Squared metric Frobenius norm of the differential.
    pub rhs: f64,
    pub holds: bool,
    pub equality: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointClassification {
    pub point: Vec<f64>,
    pub rank: usize,
    pub nullity: usize,
    pub analysis: GeometricAnalysis,
    pub flags: Flags,
    /// Present exactly at geometric points.
    pub eikonal: Option<EikonalRecord>,
}

pub fn flags_from_analysis(
    a: &GeometricAnalysis,
    codomain_dim: usize,
    tol: &TolerancePolicy,
) -> Flags {
    let immersion = a.nullity == 0;
    let geometric = a.is_geometric;
    let conformal_riemannian_map = geometric && a.single_cluster();
    let unit = a.singular_values[..a.rank]
        .iter()
        .all(|s| (s - 1.0).abs() <= 2.0 * tol.cluster_rel_tol);
    let riemannian_map = conformal_riemannian_map && unit;
    Flags {
        immersion,
        submersion: a.rank == codomain_dim,
        geometric,
        conformal_riemannian_map,
        riemannian_map,
        isometric_immersion: immersion && riemannian_map,
        conformal_immersion: immersion && geometric,
    }
}

/// Compares `canonical · rank` with `‖T‖²_F`.
///
/// Equality is decided with a tolerance matched to the clustering rule: a
/// single cluster spans at most `rank · cluster_rel_tol · σ_max`, which
/// bounds `rhs − lhs` by `2 rank² cluster_rel_tol σ_max²`.
pub fn eikonal_from_analysis(
    a: &GeometricAnalysis,
    frobenius_sq: f64,
    tol: &TolerancePolicy,
) -> Option<EikonalRecord> {
    let canonical = a.factors.canonical?;
    let lhs = canonical * a.rank as f64;
    let rhs = frobenius_sq;
    let smax = a.singular_values.first().copied().unwrap_or(0.0);
    let k = a.rank as f64;
    let slack = tol.residual_tol * rhs.max(1.0);
    let eq_tol = 2.0 * k * k * tol.cluster_rel_tol * smax * smax + slack;
    Some(EikonalRecord {
        lhs,
        rhs,
        holds: lhs <= rhs + slack,
        equality: (rhs - lhs).abs() <= eq_tol,
    })
}

/// Classifies a map given its differential at a point.
pub fn classify_map(
    point: &[f64],
    df: &MapBetween,
    tol: &TolerancePolicy,
    reference_scale: f64,
) -> PointClassification {
    let analysis = analyze_with_scale(df, tol, reference_scale);
    let flags = flags_from_analysis(&analysis, df.codomain().dim(), tol);
    let frob = frobenius_norm(df);
    let eikonal = eikonal_from_analysis(&analysis, frob * frob, tol);
    PointClassification {
        point: point.to_vec(),
        rank: analysis.rank,
        nullity: analysis.nullity,
        analysis,
        flags,
        eikonal,
    }
}

pub fn classify_point(
    spec: &SmoothMapSpec,
    x: &[f64],
    chart_m: &ChartManifold,
    chart_n: &ChartManifold,
    tol: &TolerancePolicy,
) -> Result<PointClassification> {
    classify_point_scaled(spec, x, chart_m, chart_n, tol, 0.0)
}

/// [`classify_point`] with a shared rank reference scale (see
/// [`crate::linalg::rank_of_spectrum`]).
pub fn classify_point_scaled(
    spec: &SmoothMapSpec,
    x: &[f64],
    chart_m: &ChartManifold,
    chart_n: &ChartManifold,
    tol: &TolerancePolicy,
    reference_scale: f64,
) -> Result<PointClassification> {
    let df = jacobian_at(spec, x, chart_m, chart_n)?;
    Ok(classify_map(x, &df, tol, reference_scale))
}

pub fn eikonal_check(
    spec: &SmoothMapSpec,
    x: &[f64],
    chart_m: &ChartManifold,
    chart_n: &ChartManifold,
    tol: &TolerancePolicy,
) -> Result<EikonalRecord> {
    let c = classify_point(spec, x, chart_m, chart_n, tol)?;
    c.eikonal.ok_or_else(|| {
        Error::Precondition(format!("differential at {x:?} is not a geometric function"))
    })
}

/// `grad f(x) = G(x)⁻¹ df_xᵀ` for a scalar map.
pub fn gradient(spec: &SmoothMapSpec, x: &[f64], chart_m: &ChartManifold) -> Result<DVector<f64>> {
    if spec.codomain_dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "gradient needs a scalar map, codomain has dimension {}",
            spec.codomain_dim()
        )));
    }
    let df = jacobian_at(spec, x, chart_m, &ChartManifold::euclidean(1))?;
    let grad = df.domain().solve(&df.matrix().transpose());
    Ok(grad.column(0).into_owned())
}

/// `Jᵀ G_N(f(x)) J`.
pub fn pullback_metric(
    spec: &SmoothMapSpec,
    x: &[f64],
    chart_m: &ChartManifold,
    chart_n: &ChartManifold,
) -> Result<DMatrix<f64>> {
    let df = jacobian_at(spec, x, chart_m, chart_n)?;
    Ok(df.matrix().transpose() * df.codomain().gram() * df.matrix())
}

/// Whether a pulled-back tensor is positive definite, judged on the same
/// scale as the rank test: in a `reference`-orthonormal frame its
/// eigenvalues are the squared singular values of the differential.
pub fn is_riemannian_metric(
    pullback: &DMatrix<f64>,
    reference: &InnerSpace,
    tol: &TolerancePolicy,
) -> bool {
    let half = reference.whiten_dual(pullback);
    let whitened = reference.whiten_dual(&half.transpose());
    let sym = (&whitened + whitened.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let max = eig.max();
    if max <= 0.0 {
        return false;
    }
    eig.min() > (tol.rank_rel_tol * max.sqrt()).powi(2)
}

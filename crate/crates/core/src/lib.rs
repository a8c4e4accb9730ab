//! Numerics for conformal Riemannian morphisms.
//!
//! The crate decides whether a linear map between inner-product spaces is a
//! geometric function (conformal on some complement of its kernel), builds
//! Conf subspaces and the generalized adjoint with its `P`/`Q` compositions,
//! and classifies smooth maps between single-chart Riemannian manifolds
//! pointwise and over sample sets.

pub mod error;
pub mod expr;
pub mod gallery;
pub mod geometric;
pub mod linalg;
pub mod manifold;
pub mod operators;
pub mod oracle;
pub mod sampling;

pub use error::{Error, Result};
pub use expr::ExprMap;
pub use gallery::{
    fixture, gallery, ExpectedClassification, Fixture, FixtureSummary, GeometricExpectation,
};
pub use geometric::{
    analyze, analyze_with_scale, construct_conf_subspace, FactorKind, FactorSet, GeometricAnalysis,
};
pub use linalg::{
    frobenius_norm, kernel_basis, metric_adjoint, metric_svd, numerical_rank,
    orthogonal_complement, InnerSpace, MapBetween, MetricSvd, SubspaceBasis, TolerancePolicy,
};
pub use manifold::{
    classify_point, eikonal_check, gradient, jacobian_at, pullback_metric, ChartManifold,
    EikonalRecord, Flags, PointClassification, SmoothMapSpec,
};
pub use operators::{
    check_characterization, diamond, p_operator, q_operator, OperatorCheck, OperatorName,
};
pub use oracle::{oracle_is_geometric, OracleBudget, OracleResult};
pub use sampling::{
    classify_samples, rank_scan, scalar_morphism_check, GridAxis, RankScanReport, SampleSet,
    ScalarMorphismReport, ScalarVerdict,
};

//! Named example maps with their expected classification, used by the CLI and
//! as regression fixtures.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{ChartManifold, SmoothMapSpec};
use crate::sampling::{GridAxis, SampleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometricExpectation {
    Everywhere,
    Nowhere,
}

/// What a scan of the fixture over its default grid should report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedClassification {
    pub geometric: GeometricExpectation,
    pub ranks: BTreeSet<usize>,
    /// Expected `consistent_with_morphism` of the rank scan.
    pub morphism: bool,
    /// Sample points where the rank drops.
    pub rank_drops: Vec<Vec<f64>>,
    /// Closed form of a valid conformality factor, for display.
    pub factor_formula: Option<&'static str>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub description: &'static str,
    pub spec: SmoothMapSpec,
    pub chart_m: ChartManifold,
    pub chart_n: ChartManifold,
    pub default_grid: Vec<GridAxis>,
    pub expected: ExpectedClassification,
    /// A conformality factor that must be admissible at every geometric
    /// sample of positive rank.
    pub factor: Option<fn(&[f64]) -> f64>,
}

impl Fixture {
    pub fn samples(&self) -> SampleSet {
        SampleSet::grid(self.default_grid.clone())
    }

    pub fn summary(&self) -> FixtureSummary {
        FixtureSummary {
            name: self.name,
            description: self.description,
            domain_dim: self.spec.domain_dim(),
            codomain_dim: self.spec.codomain_dim(),
            default_grid: self.default_grid.clone(),
            expected: self.expected.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureSummary {
    pub name: &'static str,
    pub description: &'static str,
    pub domain_dim: usize,
    pub codomain_dim: usize,
    pub default_grid: Vec<GridAxis>,
    pub expected: ExpectedClassification,
}

const EXAMPLE7_LAMBDA: f64 = 2.0;
const ROTATION_ANGLE: f64 = 0.6;

fn axes(bounds: &[(f64, f64)], count: usize) -> Vec<GridAxis> {
    bounds
        .iter()
        .map(|&(lo, hi)| GridAxis::new(lo, hi, count))
        .collect()
}

fn expected(
    geometric: GeometricExpectation,
    ranks: &[usize],
    morphism: bool,
    factor_formula: Option<&'static str>,
) -> ExpectedClassification {
    ExpectedClassification {
        geometric,
        ranks: ranks.iter().copied().collect(),
        morphism,
        rank_drops: Vec::new(),
        factor_formula,
    }
}

fn euclid(n: usize, m: usize) -> (ChartManifold, ChartManifold) {
    (ChartManifold::euclidean(n), ChartManifold::euclidean(m))
}

fn example7() -> Fixture {
    let l = EXAMPLE7_LAMBDA;
    let a = DMatrix::from_row_slice(2, 3, &[l, l, 0.0, 0.0, 0.0, l]);
    let (chart_m, chart_n) = euclid(3, 2);
    Fixture {
        name: "example7",
        description: "f(x,y,z) = 2(x+y, z): kernel (x,-x,0), two valid Conf subspaces",
        spec: SmoothMapSpec::linear(a),
        chart_m,
        chart_n,
        default_grid: axes(&[(-1.0, 1.0); 3], 3),
        expected: expected(GeometricExpectation::Everywhere, &[2], true, Some("4")),
        factor: Some(|_| EXAMPLE7_LAMBDA * EXAMPLE7_LAMBDA),
    }
}

fn example8() -> Fixture {
    let spec = SmoothMapSpec::new(4, 4, |x| {
        let e = x[2].exp();
        vec![e * (x[0] - x[1]), 0.0, 0.0, e * (x[3] - x[1])]
    })
    .with_jacobian(|x| {
        let e = x[2].exp();
        #[rustfmt::skip]
        let rows = [
            e, -e, e * (x[0] - x[1]), 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, -e, e * (x[3] - x[1]), e,
        ];
        DMatrix::from_row_slice(4, 4, &rows)
    });
    let (chart_m, chart_n) = euclid(4, 4);
    Fixture {
        name: "example8",
        description:
            "f(x) = (e^x3 (x1-x2), 0, 0, e^x3 (x4-x2)): rank 2, Conf not orthogonal to the kernel",
        spec,
        chart_m,
        chart_n,
        default_grid: axes(&[(-1.0, 1.0); 4], 3),
        expected: expected(
            GeometricExpectation::Everywhere,
            &[2],
            true,
            Some("exp(2 x3)"),
        ),
        factor: Some(|x| (2.0 * x[2]).exp()),
    }
}

fn helix() -> Fixture {
    let spec = SmoothMapSpec::new(1, 3, |x| vec![x[0].cos(), x[0].sin(), x[0]])
        .with_jacobian(|x| DMatrix::from_column_slice(3, 1, &[-x[0].sin(), x[0].cos(), 1.0]));
    let (chart_m, chart_n) = euclid(1, 3);
    Fixture {
        name: "example10-helix",
        description: "helix t -> (cos t, sin t, t): a regular curve, factor |c'|^2 = 2",
        spec,
        chart_m,
        chart_n,
        default_grid: axes(&[(-PI, PI)], 61),
        expected: expected(GeometricExpectation::Everywhere, &[1], true, Some("2")),
        factor: Some(|_| 2.0),
    }
}

fn linear_conformal() -> Fixture {
    let (s, c) = ROTATION_ANGLE.sin_cos();
    let a = DMatrix::from_row_slice(2, 2, &[2.0 * c, -2.0 * s, 2.0 * s, 2.0 * c]);
    let (chart_m, chart_n) = euclid(2, 2);
    Fixture {
        name: "example11-linear",
        description: "twice a rotation: a linear isomorphism that is a scaled orthogonal map",
        spec: SmoothMapSpec::linear(a),
        chart_m,
        chart_n,
        default_grid: axes(&[(-1.0, 1.0); 2], 5),
        expected: expected(GeometricExpectation::Everywhere, &[2], true, Some("4")),
        factor: Some(|_| 4.0),
    }
}

fn curve_t3_t6() -> Fixture {
    let spec = SmoothMapSpec::new(1, 2, |x| vec![x[0].powi(3), x[0].powi(6)]).with_jacobian(|x| {
        DMatrix::from_column_slice(2, 1, &[3.0 * x[0].powi(2), 6.0 * x[0].powi(5)])
    });
    let (chart_m, chart_n) = euclid(1, 2);
    Fixture {
        name: "example12-curve",
        description: "c(t) = (t^3, t^6) for t > 0: a morphism that is not harmonic",
        spec,
        chart_m: chart_m.with_box(vec![(0.0, f64::INFINITY)]),
        chart_n,
        default_grid: axes(&[(0.5, 2.0)], 301),
        expected: expected(
            GeometricExpectation::Everywhere,
            &[1],
            true,
            Some("9 t^4 + 36 t^10"),
        ),
        factor: Some(|x| 9.0 * x[0].powi(4) + 36.0 * x[0].powi(10)),
    }
}

fn diag23() -> Fixture {
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
    let (chart_m, chart_n) = euclid(2, 2);
    Fixture {
        name: "example12-diag",
        description: "f(x,y) = (2x, 3y): harmonic but not geometric anywhere",
        spec: SmoothMapSpec::linear(a),
        chart_m,
        chart_n,
        default_grid: axes(&[(-1.0, 1.0); 2], 5),
        expected: expected(GeometricExpectation::Nowhere, &[2], false, None),
        factor: None,
    }
}

fn example14_f() -> Fixture {
    let spec = SmoothMapSpec::new(1, 2, |x| vec![x[0] * x[0] + x[0], x[0] * x[0]])
        .with_jacobian(|x| DMatrix::from_column_slice(2, 1, &[2.0 * x[0] + 1.0, 2.0 * x[0]]));
    let (chart_m, chart_n) = euclid(1, 2);
    Fixture {
        name: "example14-f",
        description: "f(x) = (x^2 + x, x^2): an immersion",
        spec,
        chart_m,
        chart_n,
        default_grid: axes(&[(-1.0, 1.0)], 101),
        expected: expected(
            GeometricExpectation::Everywhere,
            &[1],
            true,
            Some("(2x+1)^2 + 4x^2"),
        ),
        factor: Some(|x| (2.0 * x[0] + 1.0).powi(2) + 4.0 * x[0] * x[0]),
    }
}

fn example14_g() -> Fixture {
    let (chart_m, chart_n) = euclid(2, 1);
    Fixture {
        name: "example14-g",
        description: "g(x,y) = x: a Riemannian submersion",
        spec: SmoothMapSpec::linear(DMatrix::from_row_slice(1, 2, &[1.0, 0.0])),
        chart_m,
        chart_n,
        default_grid: axes(&[(-1.0, 1.0); 2], 5),
        expected: expected(GeometricExpectation::Everywhere, &[1], true, Some("1")),
        factor: Some(|_| 1.0),
    }
}

fn example14_composite() -> Fixture {
    let spec = SmoothMapSpec::new(1, 1, |x| vec![x[0] * x[0] + x[0]])
        .with_jacobian(|x| DMatrix::from_element(1, 1, 2.0 * x[0] + 1.0));
    let (chart_m, chart_n) = euclid(1, 1);
    let mut exp = expected(
        GeometricExpectation::Everywhere,
        &[0, 1],
        false,
        Some("(2x+1)^2"),
    );
    exp.rank_drops = vec![vec![-0.5]];
    Fixture {
        name: "example14-composite",
        description: "g(f(x)) = x^2 + x: derivative vanishes at -1/2, so not a morphism",
        spec,
        chart_m,
        chart_n,
        default_grid: axes(&[(-1.0, 1.0)], 101),
        expected: exp,
        factor: Some(|x| (2.0 * x[0] + 1.0).powi(2)),
    }
}

fn scalar_distance() -> Fixture {
    let spec = SmoothMapSpec::new(2, 1, |x| vec![x[0].hypot(x[1])]).with_jacobian(|x| {
        let r = x[0].hypot(x[1]);
        DMatrix::from_row_slice(1, 2, &[x[0] / r, x[1] / r])
    });
    let (chart_m, chart_n) = euclid(2, 1);
    Fixture {
        name: "scalar-distance",
        description: "distance from the origin on [0.5,2]^2: unit gradient, factor 1",
        spec,
        chart_m: chart_m.with_box(vec![(0.5, 2.0); 2]),
        chart_n,
        default_grid: axes(&[(0.5, 2.0); 2], 7),
        expected: expected(GeometricExpectation::Everywhere, &[1], true, Some("1")),
        factor: Some(|_| 1.0),
    }
}

fn scalar_half_norm() -> Fixture {
    let spec = SmoothMapSpec::new(2, 1, |x| vec![0.5 * (x[0] * x[0] + x[1] * x[1])])
        .with_jacobian(|x| DMatrix::from_row_slice(1, 2, &[x[0], x[1]]));
    let (chart_m, chart_n) = euclid(2, 1);
    let mut exp = expected(
        GeometricExpectation::Everywhere,
        &[0, 1],
        false,
        Some("x^2 + y^2"),
    );
    exp.rank_drops = vec![vec![0.0, 0.0]];
    Fixture {
        name: "scalar-half-norm",
        description: "|x|^2 / 2: gradient x vanishes at the origin, so not a morphism",
        spec,
        chart_m,
        chart_n,
        default_grid: axes(&[(-1.0, 1.0); 2], 5),
        expected: exp,
        factor: Some(|x| x[0] * x[0] + x[1] * x[1]),
    }
}

fn scalar_constant() -> Fixture {
    let spec = SmoothMapSpec::new(2, 1, |_| vec![3.0]).with_jacobian(|_| DMatrix::zeros(1, 2));
    let (chart_m, chart_n) = euclid(2, 1);
    Fixture {
        name: "scalar-constant",
        description: "constant field: rank 0 everywhere, a morphism by convention",
        spec,
        chart_m,
        chart_n,
        default_grid: axes(&[(-1.0, 1.0); 2], 5),
        expected: expected(GeometricExpectation::Everywhere, &[0], true, None),
        factor: None,
    }
}

fn scalar_weighted() -> Fixture {
    let spec = SmoothMapSpec::linear(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
    let chart_m =
        ChartManifold::with_metric(2, |_| DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
    Fixture {
        name: "scalar-weighted",
        description: "f(x,y) = x under the metric diag(2,1): gradient (1/2, 0), factor 1/2",
        spec,
        chart_m,
        chart_n: ChartManifold::euclidean(1),
        default_grid: axes(&[(-1.0, 1.0); 2], 5),
        expected: expected(GeometricExpectation::Everywhere, &[1], true, Some("1/2")),
        factor: Some(|_| 0.5),
    }
}

/// Every fixture, in a fixed order.
pub fn gallery() -> Vec<Fixture> {
    vec![
        example7(),
        example8(),
        helix(),
        linear_conformal(),
        curve_t3_t6(),
        diag23(),
        example14_f(),
        example14_g(),
        example14_composite(),
        scalar_distance(),
        scalar_half_norm(),
        scalar_constant(),
        scalar_weighted(),
    ]
}

pub fn fixture(name: &str) -> Result<Fixture> {
    gallery()
        .into_iter()
        .find(|f| f.name == name)
        .ok_or_else(|| Error::UnknownFixture(name.to_string()))
}

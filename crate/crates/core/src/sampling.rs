//! Sample sets over chart domains and map-level verdicts built from them.
//!
//! Map-level statements are sampled claims. A scan can show that samples are
//! consistent with a conformal Riemannian morphism (geometric everywhere,
//! rank constant on each connected component, neighbouring factor sets
//! compatible); it cannot prove smoothness of the factor.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{metric_svd, MapBetween, TolerancePolicy};
use crate::manifold::{
    classify_map, gradient, jacobian_at, ChartManifold, PointClassification, SmoothMapSpec,
};

/// Relative slack allowed between factor sets of adjacent samples.
pub const FACTOR_CONTINUITY_SLACK: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.count <= 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64
        }
    }

    pub fn spacing(&self) -> f64 {
        if self.count <= 1 {
            0.0
        } else {
            (self.max - self.min) / (self.count - 1) as f64
        }
    }
}

/// Points with a neighbourhood structure: axis neighbours on a grid,
/// consecutive points on a path, nothing for scattered points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleSet {
    Grid { axes: Vec<GridAxis> },
    Path { points: Vec<Vec<f64>> },
    Scattered { points: Vec<Vec<f64>> },
}

impl SampleSet {
    pub fn grid(axes: Vec<GridAxis>) -> Self {
        Self::Grid { axes }
    }

    /// `count` points per axis over a box.
    pub fn uniform_grid(bounds: &[(f64, f64)], count: usize) -> Self {
        Self::Grid {
            axes: bounds
                .iter()
                .map(|&(lo, hi)| GridAxis::new(lo, hi, count))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Grid { axes } => axes.iter().map(|a| a.count).product(),
            Self::Path { points } | Self::Scattered { points } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points in index order; grids vary the last axis fastest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            Self::Grid { axes } => (0..self.len())
                .map(|idx| {
                    grid_multi_index(axes, idx)
                        .iter()
                        .zip(axes)
                        .map(|(&i, a)| a.value(i))
                        .collect()
                })
                .collect(),
            Self::Path { points } | Self::Scattered { points } => points.clone(),
        }
    }

    /// Adjacent index pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        match self {
            Self::Grid { axes } => {
                let mut out = Vec::new();
                let mut stride = 1;
                let mut strides = vec![0; axes.len()];
                for (d, a) in axes.iter().enumerate().rev() {
                    strides[d] = stride;
                    stride *= a.count;
                }
                for idx in 0..self.len() {
                    let multi = grid_multi_index(axes, idx);
                    for (d, a) in axes.iter().enumerate() {
                        if multi[d] + 1 < a.count {
                            out.push((idx, idx + strides[d]));
                        }
                    }
                }
                out
            }
            Self::Path { points } => (1..points.len()).map(|i| (i - 1, i)).collect(),
            Self::Scattered { .. } => Vec::new(),
        }
    }
}

fn grid_multi_index(axes: &[GridAxis], mut idx: usize) -> Vec<usize> {
    let mut multi = vec![0; axes.len()];
    for (d, a) in axes.iter().enumerate().rev() {
        multi[d] = idx % a.count;
        idx /= a.count;
    }
    multi
}

/// Connected components of the present samples under the given edges.
fn components(n: usize, present: &[bool], edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        if present[i] && present[j] {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if !present[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn differentials(
    spec: &SmoothMapSpec,
    points: &[Vec<f64>],
    chart_m: &ChartManifold,
    chart_n: &ChartManifold,
) -> Vec<Result<MapBetween>> {
    points
        .par_iter()
        .map(|x| jacobian_at(spec, x, chart_m, chart_n))
        .collect()
}

fn reference_scale<'a>(dfs: impl Iterator<Item = &'a MapBetween>) -> f64 {
    dfs.map(|df| metric_svd(df).sigma_max()).fold(0.0, f64::max)
}

/// Classifies every sample with one shared rank reference scale (the largest
/// singular value over all samples). Output order follows the sample order.
pub fn classify_samples(
    spec: &SmoothMapSpec,
    samples: &SampleSet,
    chart_m: &ChartManifold,
    chart_n: &ChartManifold,
    tol: &TolerancePolicy,
) -> Result<Vec<PointClassification>> {
    let points = samples.points();
    let dfs: Vec<MapBetween> = differentials(spec, &points, chart_m, chart_n)
        .into_iter()
        .collect::<Result<_>>()?;
    let scale = reference_scale(dfs.iter());
    Ok(points
        .par_iter()
        .zip(dfs.par_iter())
        .map(|(x, df)| classify_map(x, df, tol, scale))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSample {
    pub point: Vec<f64>,
    pub rank: usize,
    pub geometric: bool,
    pub canonical_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub size: usize,
    pub ranks: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankChange {
    pub from: usize,
    pub to: usize,
    pub from_rank: usize,
    pub to_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankScanReport {
    pub samples: Vec<RankSample>,
    pub components: Vec<ComponentSummary>,
    pub locally_constant: bool,
    pub distinct_ranks: BTreeSet<usize>,
    /// Infimum of canonical factors over geometric samples of positive rank.
    pub min_factor: Option<f64>,
    /// Adjacent sample pairs whose ranks differ.
    pub rank_changes: Vec<RankChange>,
    /// Every sample evaluated and geometric, rank constant per component, and
    /// adjacent factor sets compatible within [`FACTOR_CONTINUITY_SLACK`].
    pub consistent_with_morphism: bool,
    /// Samples where the map or its differential could not be evaluated.
    pub failed_samples: Vec<Vec<f64>>,
}

pub fn rank_scan(
    spec: &SmoothMapSpec,
    samples: &SampleSet,
    chart_m: &ChartManifold,
    chart_n: &ChartManifold,
    tol: &TolerancePolicy,
) -> RankScanReport {
    let points = samples.points();
    let dfs = differentials(spec, &points, chart_m, chart_n);
    let scale = reference_scale(dfs.iter().filter_map(|d| d.as_ref().ok()));
    let classes: Vec<Option<PointClassification>> = points
        .par_iter()
        .zip(dfs.par_iter())
        .map(|(x, df)| df.as_ref().ok().map(|df| classify_map(x, df, tol, scale)))
        .collect();
    scan_report(&points, &classes, samples.edges())
}

fn scan_report(
    points: &[Vec<f64>],
    classes: &[Option<PointClassification>],
    edges: Vec<(usize, usize)>,
) -> RankScanReport {
    let present: Vec<bool> = classes.iter().map(Option::is_some).collect();
    let comps = components(points.len(), &present, &edges);

    let samples: Vec<RankSample> = classes
        .iter()
        .flatten()
        .map(|c| RankSample {
            point: c.point.clone(),
            rank: c.rank,
            geometric: c.flags.geometric,
            canonical_factor: c.analysis.factors.canonical,
        })
        .collect();
    let failed_samples: Vec<Vec<f64>> = points
        .iter()
        .zip(&present)
        .filter(|(_, &p)| !p)
        .map(|(x, _)| x.clone())
        .collect();

    let rank_at = |i: usize| classes[i].as_ref().map(|c| c.rank);
    let components: Vec<ComponentSummary> = comps
        .iter()
        .map(|c| ComponentSummary {
            size: c.len(),
            ranks: c.iter().filter_map(|&i| rank_at(i)).collect(),
        })
        .collect();
    let locally_constant = components.iter().all(|c| c.ranks.len() <= 1);
    let distinct_ranks = classes.iter().flatten().map(|c| c.rank).collect();

    let min_factor = classes
        .iter()
        .flatten()
        .filter(|c| c.flags.geometric && c.rank > 0)
        .filter_map(|c| c.analysis.factors.canonical)
        .reduce(f64::min);

    let mut rank_changes = Vec::new();
    let mut factors_continuous = true;
    for &(i, j) in &edges {
        let (Some(a), Some(b)) = (&classes[i], &classes[j]) else {
            continue;
        };
        if a.rank != b.rank {
            rank_changes.push(RankChange {
                from: i,
                to: j,
                from_rank: a.rank,
                to_rank: b.rank,
            });
        }
        if !a
            .analysis
            .factors
            .compatible(&b.analysis.factors, FACTOR_CONTINUITY_SLACK)
        {
            factors_continuous = false;
        }
    }
    let all_geometric = classes.iter().flatten().all(|c| c.flags.geometric);

    RankScanReport {
        samples,
        components,
        locally_constant,
        distinct_ranks,
        min_factor,
        rank_changes,
        consistent_with_morphism: all_geometric
            && locally_constant
            && factors_continuous
            && failed_samples.is_empty(),
        failed_samples,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarVerdict {
    /// Gradient vanishes at every sample.
    Constant,
    /// Gradient is nonzero at every sample and never changes sign between
    /// neighbours.
    Morphism,
    NotMorphism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarMorphismReport {
    pub verdict: ScalarVerdict,
    /// `‖grad f‖²` per sample, which is the factor where the gradient is nonzero.
    pub factors: Vec<f64>,
    pub vanishing_points: Vec<Vec<f64>>,
    /// On one-dimensional domains: linear-interpolation estimates of zeros of
    /// `f'` bracketed by a sign change between neighbouring samples.
    pub bracketed_zeros: Vec<f64>,
}

/// Decides, over samples, whether a scalar field is constant or has a
/// nonvanishing gradient. A gradient counts as vanishing when its metric norm
/// is at most `rank_rel_tol` times the largest norm over the samples.
pub fn scalar_morphism_check(
    spec: &SmoothMapSpec,
    samples: &SampleSet,
    chart_m: &ChartManifold,
    tol: &TolerancePolicy,
) -> Result<ScalarMorphismReport> {
    if spec.codomain_dim() != 1 {
        return Err(Error::DimensionMismatch(
            "scalar_morphism_check needs a real-valued map".into(),
        ));
    }
    let points = samples.points();
    let grads: Vec<(f64, Vec<f64>)> = points
        .par_iter()
        .map(|x| {
            let g = gradient(spec, x, chart_m)?;
            let gram = chart_m.metric_at(x)?;
            let norm2 = gram.inner(&g, &g);
            Ok((norm2, spec.jacobian_matrix(x)?.iter().copied().collect()))
        })
        .collect::<Result<_>>()?;

    let factors: Vec<f64> = grads.iter().map(|g| g.0).collect();
    let max_norm = factors.iter().copied().fold(0.0, f64::max).sqrt();
    let threshold = tol.rank_rel_tol * max_norm;
    let vanishing: Vec<usize> = (0..points.len())
        .filter(|&i| max_norm == 0.0 || factors[i].sqrt() <= threshold)
        .collect();

    let mut bracketed_zeros = Vec::new();
    if spec.domain_dim() == 1 {
        for (i, j) in samples.edges() {
            let (a, b) = (grads[i].1[0], grads[j].1[0]);
            if a * b < 0.0 {
                let (xa, xb) = (points[i][0], points[j][0]);
                bracketed_zeros.push(xa + (xb - xa) * a / (a - b));
            }
        }
    }

    let verdict = if vanishing.len() == points.len() {
        ScalarVerdict::Constant
    } else if vanishing.is_empty() && bracketed_zeros.is_empty() {
        ScalarVerdict::Morphism
    } else {
        ScalarVerdict::NotMorphism
    };
    Ok(ScalarMorphismReport {
        verdict,
        factors,
        vanishing_points: vanishing.iter().map(|&i| points[i].clone()).collect(),
        bracketed_zeros,
    })
}

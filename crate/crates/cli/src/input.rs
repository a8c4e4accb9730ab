//! Input schema for `analyze`.
//!
//! ```json
//! {
//!   "matrix": {"rows": [[2, 2, 0], [0, 0, 2]]},
//!   "domain": {"dim": 3, "gram": "euclidean"},
//!   "codomain": {"dim": 2, "gram": [[1, 0], [0, 1]]},
//!   "h_basis": {"rows": [[1, 0, 0], [0, 0, 1]]},
//!   "lambda": 4.0
//! }
//! ```
//!
//! A bare `{"rows": ...}` document is a map between Euclidean spaces. Omitted
//! spaces are Euclidean of the matching dimension. `h_basis` lists one vector
//! per row; when it is given without `lambda` the canonical factor is used.

use confmorph::{InnerSpace, MapBetween, SubspaceBasis, TolerancePolicy};
use nalgebra::DMatrix;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RowsInput {
    Wrapped { rows: Vec<Vec<f64>> },
    Bare(Vec<Vec<f64>>),
}

impl RowsInput {
    fn rows(&self) -> &[Vec<f64>] {
        match self {
            RowsInput::Wrapped { rows } | RowsInput::Bare(rows) => rows,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GramInput {
    Named(String),
    Rows(RowsInput),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceInput {
    dim: Option<usize>,
    gram: Option<GramInput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalyzeInput {
    matrix: Option<RowsInput>,
    rows: Option<Vec<Vec<f64>>>,
    domain: Option<SpaceInput>,
    codomain: Option<SpaceInput>,
    h_basis: Option<RowsInput>,
    lambda: Option<f64>,
}

/// A validated `analyze` request.
#[derive(Debug)]
pub struct AnalyzeRequest {
    pub map: MapBetween,
    pub h_basis: Option<SubspaceBasis>,
    pub lambda: Option<f64>,
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, String> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(format!("{what} is empty"));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(format!("{what} has rows of different lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn space(input: Option<&SpaceInput>, dim: usize, what: &str) -> Result<InnerSpace, String> {
    let Some(s) = input else {
        return Ok(InnerSpace::euclidean(dim));
    };
    if let Some(d) = s.dim {
        if d != dim {
            return Err(format!("{what} dim {d} does not match the matrix ({dim})"));
        }
    }
    match &s.gram {
        None => Ok(InnerSpace::euclidean(dim)),
        Some(GramInput::Named(n)) if n == "euclidean" => Ok(InnerSpace::euclidean(dim)),
        Some(GramInput::Named(n)) => Err(format!("unknown {what} gram `{n}`")),
        Some(GramInput::Rows(r)) => {
            let g = to_matrix(r.rows(), &format!("{what} gram"))?;
            if g.shape() != (dim, dim) {
                return Err(format!(
                    "{what} gram is {}x{} but the space has dimension {dim}",
                    g.nrows(),
                    g.ncols()
                ));
            }
            InnerSpace::new(g).map_err(|e| e.to_string())
        }
    }
}

pub fn parse_analyze(text: &str, tol: &TolerancePolicy) -> Result<AnalyzeRequest, String> {
    let input: AnalyzeInput =
        serde_json::from_str(text).map_err(|e| format!("malformed input: {e}"))?;
    let rows = match (&input.matrix, &input.rows) {
        (Some(m), None) => m.rows(),
        (None, Some(r)) => r.as_slice(),
        (Some(_), Some(_)) => return Err("give either `matrix` or `rows`, not both".into()),
        (None, None) => return Err("input has no matrix".into()),
    };
    let matrix = to_matrix(rows, "matrix")?;
    let domain = space(input.domain.as_ref(), matrix.ncols(), "domain")?;
    let codomain = space(input.codomain.as_ref(), matrix.nrows(), "codomain")?;
    let map = MapBetween::new(matrix, domain, codomain).map_err(|e| e.to_string())?;
    let h_basis = match &input.h_basis {
        None => None,
        Some(h) => {
            let v = to_matrix(h.rows(), "h_basis")?;
            Some(SubspaceBasis::new(v.transpose(), tol).map_err(|e| e.to_string())?)
        }
    };
    if let Some(l) = input.lambda {
        if !l.is_finite() {
            return Err("lambda must be finite".into());
        }
    }
    if input.lambda.is_some() && h_basis.is_none() {
        return Err("lambda needs an h_basis".into());
    }
    Ok(AnalyzeRequest {
        map,
        h_basis,
        lambda: input.lambda,
    })
}

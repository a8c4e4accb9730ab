//! Report documents and their CSV renderings.
//!
//! CSV cells hold the same decimal text that the JSON report uses, so both
//! formats carry identical numbers.

use std::collections::BTreeSet;

use confmorph::{
    EikonalRecord, FactorSet, FixtureSummary, Flags, GeometricAnalysis, GridAxis, OperatorCheck,
    PointClassification, RankScanReport, ScalarMorphismReport, TolerancePolicy,
};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub verdict: bool,
    pub residual: f64,
    pub factor: f64,
    pub agrees: bool,
}

#[derive(Debug, Serialize)]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub tolerances: TolerancePolicy,
    pub domain_dim: usize,
    pub codomain_dim: usize,
    pub analysis: GeometricAnalysis,
    pub flags: Flags,
    pub eikonal: Option<EikonalRecord>,
    pub frobenius_norm: f64,
    /// Metric adjoint, one row per line.
    pub adjoint: Vec<Vec<f64>>,
    pub operator_checks: Vec<OperatorCheck>,
    pub oracle: Option<OracleReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MapInfo {
    pub source: &'static str,
    pub name: String,
    pub variables: Vec<String>,
    pub domain_dim: usize,
    pub codomain_dim: usize,
    pub jacobian: &'static str,
    pub expected: Option<FixtureSummary>,
}

#[derive(Debug, Serialize)]
pub struct ClassifySummary {
    pub points: usize,
    pub geometric_points: usize,
    pub ranks: BTreeSet<usize>,
}

#[derive(Debug, Serialize)]
pub struct ClassifyReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub map: MapInfo,
    pub tolerances: TolerancePolicy,
    pub grid: Vec<GridAxis>,
    pub summary: ClassifySummary,
    pub records: Vec<PointClassification>,
}

#[derive(Debug, Serialize)]
pub struct ScanDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub map: MapInfo,
    pub tolerances: TolerancePolicy,
    pub grid: Vec<GridAxis>,
    pub verdict: String,
    pub report: RankScanReport,
    pub scalar_check: Option<ScalarMorphismReport>,
}

#[derive(Debug, Serialize)]
pub struct GalleryReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub fixtures: Vec<FixtureSummary>,
}

pub fn verdict_line(report: &RankScanReport) -> String {
    let yes_no = if report.locally_constant { "yes" } else { "no" };
    let factor = report.min_factor.map_or_else(|| "none".to_string(), num);
    format!("rank locally constant: {yes_no}; min canonical factor: {factor}")
}

/// The JSON spelling of a number; non-finite values become an empty cell.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite floats serialize")
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn flag(b: bool) -> String {
    b.to_string()
}

fn factor_kind(f: &FactorSet) -> String {
    serde_json::to_value(f.kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

type CsvResult = Result<Vec<u8>, String>;

fn finish(w: csv::Writer<Vec<u8>>) -> CsvResult {
    w.into_inner().map_err(|e| e.to_string())
}

fn csv_err(e: csv::Error) -> String {
    e.to_string()
}

pub fn analyze_csv(r: &AnalyzeReport) -> CsvResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "rank",
        "nullity",
        "is_geometric",
        "factor_kind",
        "factor_upper",
        "canonical_factor",
        "frobenius_norm",
        "eikonal_lhs",
        "eikonal_rhs",
        "singular_values",
    ]
    .map(String::from)
    .to_vec();
    let a = &r.analysis;
    let mut row = vec![
        a.rank.to_string(),
        a.nullity.to_string(),
        flag(a.is_geometric),
        factor_kind(&a.factors),
        opt(a.factors.upper),
        opt(a.factors.canonical),
        num(r.frobenius_norm),
        opt(r.eikonal.as_ref().map(|e| e.lhs)),
        opt(r.eikonal.as_ref().map(|e| e.rhs)),
        a.singular_values
            .iter()
            .map(|&s| num(s))
            .collect::<Vec<_>>()
            .join(" "),
    ];
    for c in &r.operator_checks {
        let p = format!("{:?}", c.operator_name).to_lowercase();
        header.extend([format!("{p}_residual"), format!("{p}_passes")]);
        row.extend([num(c.residual), flag(c.passes)]);
    }
    w.write_record(&header).map_err(csv_err)?;
    w.write_record(&row).map_err(csv_err)?;
    finish(w)
}

fn coordinate_header(map: &MapInfo) -> Vec<String> {
    map.variables.clone()
}

pub fn classify_csv(r: &ClassifyReport) -> CsvResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = coordinate_header(&r.map);
    header.extend(
        [
            "rank",
            "nullity",
            "geometric",
            "factor_kind",
            "factor_upper",
            "canonical_factor",
            "immersion",
            "submersion",
            "conformal_riemannian_map",
            "riemannian_map",
            "isometric_immersion",
            "conformal_immersion",
            "eikonal_lhs",
            "eikonal_rhs",
            "eikonal_holds",
            "eikonal_equality",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(csv_err)?;
    for c in &r.records {
        let mut row: Vec<String> = c.point.iter().map(|&x| num(x)).collect();
        let f = &c.flags;
        let factors = &c.analysis.factors;
        let e = c.eikonal.as_ref();
        row.extend([
            c.rank.to_string(),
            c.nullity.to_string(),
            flag(f.geometric),
            factor_kind(factors),
            opt(factors.upper),
            opt(factors.canonical),
            flag(f.immersion),
            flag(f.submersion),
            flag(f.conformal_riemannian_map),
            flag(f.riemannian_map),
            flag(f.isometric_immersion),
            flag(f.conformal_immersion),
            opt(e.map(|e| e.lhs)),
            opt(e.map(|e| e.rhs)),
            e.map_or_else(String::new, |e| flag(e.holds)),
            e.map_or_else(String::new, |e| flag(e.equality)),
        ]);
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

pub fn scan_csv(d: &ScanDocument) -> CsvResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = coordinate_header(&d.map);
    header.extend(["rank", "geometric", "canonical_factor"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for s in &d.report.samples {
        let mut row: Vec<String> = s.point.iter().map(|&x| num(x)).collect();
        row.extend([
            s.rank.to_string(),
            flag(s.geometric),
            opt(s.canonical_factor),
        ]);
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

pub fn gallery_csv(g: &GalleryReport) -> CsvResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "name",
        "domain_dim",
        "codomain_dim",
        "morphism",
        "description",
    ])
    .map_err(csv_err)?;
    for f in &g.fixtures {
        w.write_record([
            f.name.to_string(),
            f.domain_dim.to_string(),
            f.codomain_dim.to_string(),
            flag(f.expected.morphism),
            f.description.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_match_json_spelling() {
        assert_eq!(num(4.0), "4.0");
        assert_eq!(num(1e-20), "1e-20");
        assert_eq!(num(0.1 + 0.2), "0.30000000000000004");
        assert_eq!(num(f64::INFINITY), "");
    }
}

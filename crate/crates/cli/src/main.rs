//! `confmorph`: analyze linear maps and classify smooth maps over grids.
//!
//! Exit codes: 0 success, 2 input validation, 3 numerical failure.

mod grid;
mod input;
mod report;

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use confmorph::manifold::classify_map;
use confmorph::oracle::MAX_ORACLE_DIM;
use confmorph::{
    analyze, check_characterization, classify_samples, fixture, frobenius_norm, gallery,
    metric_adjoint, oracle_is_geometric, rank_scan, scalar_morphism_check, ChartManifold, ExprMap,
    GridAxis, OracleBudget, SampleSet, SmoothMapSpec, TolerancePolicy,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::report::*;

#[derive(Parser, Debug)]
#[command(
    name = "confmorph",
    version,
    about = "Conformal Riemannian morphism diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Relative singular-value threshold for numerical rank.
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    /// Relative gap below which singular values share a cluster.
    #[arg(long, global = true)]
    tol_cluster: Option<f64>,
    /// Tolerance for residual checks.
    #[arg(long, global = true)]
    tol_residual: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze one linear map read from a JSON file (`-` for stdin).
    Analyze {
        #[arg(long)]
        input: PathBuf,
        /// Cross-check the verdict with the optimization oracle (dims <= 5).
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classify a map at every point of a grid.
    Classify(MapArgs),
    /// Scan ranks over a grid and report local constancy.
    Scan(MapArgs),
    /// List the built-in fixtures.
    Gallery,
}

#[derive(Args, Debug)]
struct MapArgs {
    /// Built-in fixture name (see `confmorph gallery`).
    #[arg(long, conflicts_with = "expr", required_unless_present = "expr")]
    gallery: Option<String>,
    /// Map expression, e.g. "f(x,y)=(2x,3y)".
    #[arg(long)]
    expr: Option<String>,
    /// "axis:min:max:count;..." with one axis per coordinate.
    #[arg(long)]
    grid: Option<String>,
    /// Step for central-difference Jacobians.
    #[arg(long)]
    fd_step: Option<f64>,
    /// Ignore analytic Jacobians and use finite differences.
    #[arg(long)]
    numeric_jacobian: bool,
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<confmorph::Error> for Failure {
    fn from(e: confmorph::Error) -> Self {
        use confmorph::Error as E;
        match e {
            E::MapEvaluation { .. } | E::FactorNotAdmissible { .. } => {
                Failure::Numeric(e.to_string())
            }
            _ => Failure::Validation(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn validation(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

fn tolerances(c: &Common) -> CliResult<TolerancePolicy> {
    let d = TolerancePolicy::default();
    let tol = TolerancePolicy {
        rank_rel_tol: c.tol_rank.unwrap_or(d.rank_rel_tol),
        cluster_rel_tol: c.tol_cluster.unwrap_or(d.cluster_rel_tol),
        residual_tol: c.tol_residual.unwrap_or(d.residual_tol),
    };
    tol.validate()?;
    Ok(tol)
}

struct Output {
    body: Vec<u8>,
    /// Printed beside the report (stdout when the report goes to a file).
    verdict: Option<String>,
}

fn render<T: Serialize>(
    format: Format,
    doc: &T,
    csv: impl FnOnce(&T) -> Result<Vec<u8>, String>,
) -> CliResult<Vec<u8>> {
    match format {
        Format::Json => {
            let mut body = serde_json::to_vec_pretty(doc)
                .map_err(|e| Failure::Numeric(format!("cannot serialize report: {e}")))?;
            body.push(b'\n');
            Ok(body)
        }
        Format::Csv => csv(doc).map_err(Failure::Numeric),
    }
}

fn read_input(path: &PathBuf) -> CliResult<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| validation(format!("cannot read stdin: {e}")))?;
        Ok(s)
    } else {
        fs::read_to_string(path)
            .map_err(|e| validation(format!("cannot read {}: {e}", path.display())))
    }
}

fn cmd_analyze(c: &Common, input: &PathBuf, oracle: bool, seed: u64) -> CliResult<Output> {
    let tol = tolerances(c)?;
    let req = input::parse_analyze(&read_input(input)?, &tol).map_err(Failure::Validation)?;
    let t = &req.map;
    let point = classify_map(&[], t, &tol, 0.0);
    let adjoint = metric_adjoint(t);
    let adjoint_rows = adjoint
        .matrix()
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();

    let mut operator_checks = Vec::new();
    if let Some(h) = &req.h_basis {
        let lambda = match req.lambda.or(point.analysis.factors.canonical) {
            Some(l) => l,
            None => {
                return Err(validation(
                    "the map is not geometric; give `lambda` to test an H basis",
                ))
            }
        };
        let (p, q) = check_characterization(t, h, lambda, &tol)?;
        operator_checks = vec![p, q];
    }

    let oracle = if oracle {
        let n = t.domain().dim();
        if n > MAX_ORACLE_DIM || t.codomain().dim() > MAX_ORACLE_DIM {
            return Err(validation(format!(
                "the oracle handles dimensions up to {MAX_ORACLE_DIM}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = oracle_is_geometric(t, &tol, OracleBudget::default(), &mut rng);
        Some(OracleReport {
            seed,
            verdict: r.verdict,
            residual: r.residual,
            factor: r.factor,
            agrees: r.verdict == point.analysis.is_geometric,
        })
    } else {
        None
    };

    let doc = AnalyzeReport {
        schema_version: SCHEMA_VERSION,
        command: "analyze",
        tolerances: tol,
        domain_dim: t.domain().dim(),
        codomain_dim: t.codomain().dim(),
        flags: point.flags,
        eikonal: point.eikonal,
        frobenius_norm: frobenius_norm(t),
        analysis: point.analysis,
        adjoint: adjoint_rows,
        operator_checks,
        oracle,
    };
    debug_assert_eq!(analyze(t, &tol).is_geometric, doc.analysis.is_geometric);
    Ok(Output {
        body: render(c.format, &doc, analyze_csv)?,
        verdict: None,
    })
}

struct Target {
    spec: SmoothMapSpec,
    chart_m: ChartManifold,
    chart_n: ChartManifold,
    grid: Vec<GridAxis>,
    info: MapInfo,
}

fn resolve(args: &MapArgs, scanning: bool) -> CliResult<Target> {
    let (spec, chart_m, chart_n, default_grid, mut info) = match (&args.gallery, &args.expr) {
        (Some(name), None) => {
            let f = fixture(name)?;
            let n = f.spec.domain_dim();
            let info = MapInfo {
                source: "gallery",
                name: f.name.to_string(),
                variables: (1..=n).map(|i| format!("x{i}")).collect(),
                domain_dim: n,
                codomain_dim: f.spec.codomain_dim(),
                jacobian: "analytic",
                expected: Some(f.summary()),
            };
            (f.spec, f.chart_m, f.chart_n, Some(f.default_grid), info)
        }
        (None, Some(src)) => {
            let e = ExprMap::parse(src)?;
            let info = MapInfo {
                source: "expression",
                name: src.trim().to_string(),
                variables: e.variables.clone(),
                domain_dim: e.domain_dim(),
                codomain_dim: e.codomain_dim(),
                jacobian: "analytic",
                expected: None,
            };
            let (n, m) = (e.domain_dim(), e.codomain_dim());
            (
                e.into_spec(),
                ChartManifold::euclidean(n),
                ChartManifold::euclidean(m),
                None,
                info,
            )
        }
        _ => return Err(validation("give exactly one of --gallery or --expr")),
    };

    let mut spec = spec;
    if let Some(h) = args.fd_step {
        if !(h.is_finite() && h > 0.0) {
            return Err(validation("--fd-step must be a positive number"));
        }
        spec = spec.with_fd_step(h);
    }
    if args.numeric_jacobian {
        spec = spec.without_jacobian();
        info.jacobian = "finite_difference";
    }

    let grid = match (&args.grid, default_grid) {
        (Some(g), _) => {
            grid::parse_grid(g, spec.domain_dim(), &info.variables).map_err(Failure::Validation)?
        }
        (None, Some(d)) => d,
        (None, None) => return Err(validation("expression maps need --grid")),
    };
    if scanning && grid.iter().any(|a| a.count < 2) {
        return Err(validation("scans need at least 2 points per axis"));
    }
    if let Some(bounds) = chart_m.domain_box() {
        let inside = grid
            .iter()
            .zip(bounds)
            .all(|(a, &(lo, hi))| a.min >= lo && a.max <= hi);
        if !inside {
            return Err(validation(format!(
                "grid leaves the fixture's domain box {bounds:?}"
            )));
        }
    }
    Ok(Target {
        spec,
        chart_m,
        chart_n,
        grid,
        info,
    })
}

fn cmd_classify(c: &Common, args: &MapArgs) -> CliResult<Output> {
    let tol = tolerances(c)?;
    let t = resolve(args, false)?;
    let samples = SampleSet::grid(t.grid.clone());
    let records = classify_samples(&t.spec, &samples, &t.chart_m, &t.chart_n, &tol)?;
    let summary = ClassifySummary {
        points: records.len(),
        geometric_points: records.iter().filter(|r| r.flags.geometric).count(),
        ranks: records.iter().map(|r| r.rank).collect(),
    };
    let doc = ClassifyReport {
        schema_version: SCHEMA_VERSION,
        command: "classify",
        map: t.info,
        tolerances: tol,
        grid: t.grid,
        summary,
        records,
    };
    Ok(Output {
        body: render(c.format, &doc, classify_csv)?,
        verdict: None,
    })
}

fn cmd_scan(c: &Common, args: &MapArgs) -> CliResult<Output> {
    let tol = tolerances(c)?;
    let t = resolve(args, true)?;
    let samples = SampleSet::grid(t.grid.clone());
    let report = rank_scan(&t.spec, &samples, &t.chart_m, &t.chart_n, &tol);
    if report.samples.is_empty() {
        return Err(Failure::Numeric(
            "the map could not be evaluated at any sample".into(),
        ));
    }
    let scalar_check = if t.spec.codomain_dim() == 1 && report.failed_samples.is_empty() {
        Some(scalar_morphism_check(&t.spec, &samples, &t.chart_m, &tol)?)
    } else {
        None
    };
    let verdict = verdict_line(&report);
    let doc = ScanDocument {
        schema_version: SCHEMA_VERSION,
        command: "scan",
        map: t.info,
        tolerances: tol,
        grid: t.grid,
        verdict: verdict.clone(),
        report,
        scalar_check,
    };
    Ok(Output {
        body: render(c.format, &doc, scan_csv)?,
        verdict: Some(verdict),
    })
}

fn cmd_gallery(c: &Common) -> CliResult<Output> {
    let doc = GalleryReport {
        schema_version: SCHEMA_VERSION,
        command: "gallery",
        fixtures: gallery().iter().map(|f| f.summary()).collect(),
    };
    Ok(Output {
        body: render(c.format, &doc, gallery_csv)?,
        verdict: None,
    })
}

fn emit(c: &Common, out: Output) -> io::Result<()> {
    match &c.out {
        Some(path) => {
            fs::write(path, &out.body)?;
            if let Some(v) = out.verdict {
                println!("{v}");
            }
        }
        None => {
            io::stdout().write_all(&out.body)?;
            if let Some(v) = out.verdict {
                eprintln!("{v}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze {
            input,
            oracle,
            seed,
        } => cmd_analyze(&cli.common, input, *oracle, *seed),
        Command::Classify(args) => cmd_classify(&cli.common, args),
        Command::Scan(args) => cmd_scan(&cli.common, args),
        Command::Gallery => cmd_gallery(&cli.common),
    };
    match result {
        Ok(out) => match emit(&cli.common, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: cannot write report: {e}");
                ExitCode::from(2)
            }
        },
        Err(f) => {
            let (Failure::Validation(msg) | Failure::Numeric(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}

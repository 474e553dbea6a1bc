//! Command-line front end: classify, verify, catalog, plotdata.
//!
//! Exit codes: 0 success, 1 usage/IO/parse error, 2 condition failure,
//! 3 tolerance failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::catalog::{run_catalog, CatalogOptions};
use crate::foliation::{run_pipeline, VerificationReport};
use crate::group::{Ambient, EnumerationBudget};
use crate::numerics::{
    batch_residuals, check_critical_dilation, sample_points, ChartedMap, DecayProfile, MapKind, ResidualReport,
};
use crate::specfile::GroupSpecFile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONDITION: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

/// Radii approaching the axis for the decay fit of `screw:q`.
pub const DECAY_RADII: [f64; 3] = [0.1, 0.05, 0.025];
/// Allowed deviation of the fitted decay exponent from `q − 1`.
pub const DECAY_TOL: f64 = 1e-2;

#[derive(Debug, Parser)]
#[command(
    name = "spaceform",
    version,
    about = "Leaf-space orbifolds and harmonic morphisms of flat and spherical space forms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct BudgetArgs {
    /// Maximum word length of enumerated products
    #[arg(long)]
    pub budget_word_length: Option<usize>,
    /// Euclidean only: discard elements moving the origin further than this many generator displacements
    #[arg(long)]
    pub budget_radius: Option<f64>,
    /// Abort enumeration beyond this many elements
    #[arg(long)]
    pub budget_max_elements: Option<usize>,
}

impl BudgetArgs {
    pub fn apply(&self, mut b: EnumerationBudget) -> EnumerationBudget {
        if let Some(w) = self.budget_word_length {
            b.max_word_length = w;
        }
        if let Some(r) = self.budget_radius {
            b.ball_radius = r;
        }
        if let Some(m) = self.budget_max_elements {
            b.max_elements = m;
        }
        b
    }

    pub fn for_ambient(&self, a: Ambient) -> EnumerationBudget {
        self.apply(match a {
            Ambient::Euclidean3 => EnumerationBudget::default(),
            Ambient::Sphere3 => EnumerationBudget::sphere_default(),
        })
    }
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct Tolerances {
    /// Bound on the conformality defect and on the dilation error
    #[arg(long, default_value_t = 1e-5)]
    pub tol_conformality: f64,
    /// Bound on the Laplacian residual of the pulled-back test functions
    #[arg(long, default_value_t = 1e-4)]
    pub tol_harmonicity: f64,
    /// Bound on the fibre geodesic defect
    #[arg(long, default_value_t = 1e-6)]
    pub tol_geodesy: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline on a group spec file
    Classify {
        /// GroupSpecFile (JSON)
        path: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a standard map numerically at seeded random points
    Verify {
        /// pi1, hopf, pi4 or screw:q
        map: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        tol: Tolerances,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run the catalog and write report.txt and report.json
    Catalog {
        /// Glob over case ids, for example "4.1-*"
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write a CSV of dilation and residuals over a grid
    Plotdata {
        /// pi1, hopf, pi4 or screw:q
        map: String,
        /// plane:NxM[:R], sphere:N or vertical:N[:A:B]; defaults by map
        #[arg(long)]
        grid: Option<String>,
        /// Output file; standard output when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` and runs the command, writing to `out` and `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_USAGE;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32, String> {
    match cmd {
        Command::Classify { path, budget, format, seed } => cmd_classify(&path, &budget, format, seed, out),
        Command::Verify { map, samples, seed, tol, format } => cmd_verify(&map, samples, seed, &tol, format, out),
        Command::Catalog { filter, out_dir, budget, seed, format } => {
            cmd_catalog(filter.as_deref(), &out_dir, &budget, seed, format, out)
        }
        Command::Plotdata { map, grid, out: path } => cmd_plotdata(&map, grid.as_deref(), path.as_deref(), out),
    }
}

fn io<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct ClassifyOutput<'a> {
    seed: u64,
    budget: EnumerationBudget,
    accepted: bool,
    report: &'a VerificationReport,
}

pub fn cmd_classify(
    path: &Path,
    budget: &BudgetArgs,
    format: Format,
    seed: u64,
    out: &mut dyn Write,
) -> Result<i32, String> {
    let file = GroupSpecFile::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let spec = file.to_spec().map_err(|e| format!("{}: {e}", path.display()))?;
    let b = budget.for_ambient(spec.ambient());
    b.validate().map_err(io)?;
    let report = run_pipeline(&spec, &b).map_err(io)?;
    match format {
        Format::Text => {
            write!(out, "{report}").map_err(io)?;
            writeln!(out, "budget: {b}").map_err(io)?;
            writeln!(out, "seed: {seed}").map_err(io)?;
        }
        Format::Json => {
            let o = ClassifyOutput { seed, budget: b, accepted: report.accepted(), report: &report };
            writeln!(out, "{}", serde_json::to_string_pretty(&o).map_err(io)?).map_err(io)?;
        }
    }
    Ok(if report.accepted() { EXIT_OK } else { EXIT_CONDITION })
}

/// Maxima of the residuals over the sample points.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ResidualMaxima {
    pub dilation_error: f64,
    pub conformality_defect: f64,
    pub harmonicity_residual: f64,
    pub geodesic_defect: f64,
}

#[derive(Serialize)]
struct VerifyOutput {
    map: String,
    seed: u64,
    samples: usize,
    tolerances: Tolerances,
    maxima: ResidualMaxima,
    failed_points: usize,
    decay: Option<DecayProfile>,
    pass: bool,
    points: Vec<ResidualReport>,
}

pub fn cmd_verify(
    map: &str,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
    format: Format,
    out: &mut dyn Write,
) -> Result<i32, String> {
    let m: ChartedMap = map.parse().map_err(io)?;
    let pts = sample_points(&m, samples, seed);
    let results = batch_residuals(&m, &pts);
    let mut max = ResidualMaxima::default();
    let mut points = Vec::new();
    let mut failed = 0;
    for r in results {
        match r {
            Ok(r) => {
                let derr = r.expected_lambda.map_or(0.0, |e| (r.lambda - e).abs());
                max.dilation_error = max.dilation_error.max(derr);
                max.conformality_defect = max.conformality_defect.max(r.conformality_defect);
                max.harmonicity_residual = max.harmonicity_residual.max(r.harmonicity_residual);
                max.geodesic_defect = max.geodesic_defect.max(r.geodesic_defect);
                points.push(r);
            }
            Err(_) => failed += 1,
        }
    }
    let decay = match m.kind {
        MapKind::Screw(q) if q >= 2 => Some(check_critical_dilation(q, &DECAY_RADII).map_err(io)?),
        _ => None,
    };
    let decay_ok = decay.as_ref().is_none_or(|d| (d.exponent - (d.q as f64 - 1.0)).abs() < DECAY_TOL);
    let pass = failed == 0
        && max.dilation_error <= tol.tol_conformality
        && max.conformality_defect <= tol.tol_conformality
        && max.harmonicity_residual <= tol.tol_harmonicity
        && max.geodesic_defect <= tol.tol_geodesy
        && decay_ok;
    match format {
        Format::Text => {
            writeln!(out, "map: {}  samples: {samples}  seed: {seed}", m.name()).map_err(io)?;
            writeln!(
                out,
                "{:>4} {:>12} {:>12} {:>10} {:>10} {:>10}",
                "#", "lambda", "expected", "conf", "harm", "geod"
            )
            .map_err(io)?;
            for (i, r) in points.iter().enumerate() {
                let e = r.expected_lambda.map_or("-".to_string(), |e| format!("{e:.8}"));
                writeln!(
                    out,
                    "{i:>4} {:>12.8} {e:>12} {:>10.2e} {:>10.2e} {:>10.2e}",
                    r.lambda, r.conformality_defect, r.harmonicity_residual, r.geodesic_defect
                )
                .map_err(io)?;
            }
            let verdict = |v: f64, t: f64| if v <= t { "ok" } else { "FAIL" };
            writeln!(
                out,
                "max dilation error   {:.3e} (tol {:.0e}) {}",
                max.dilation_error,
                tol.tol_conformality,
                verdict(max.dilation_error, tol.tol_conformality)
            )
            .map_err(io)?;
            writeln!(
                out,
                "max conformality     {:.3e} (tol {:.0e}) {}",
                max.conformality_defect,
                tol.tol_conformality,
                verdict(max.conformality_defect, tol.tol_conformality)
            )
            .map_err(io)?;
            writeln!(
                out,
                "max harmonicity      {:.3e} (tol {:.0e}) {}",
                max.harmonicity_residual,
                tol.tol_harmonicity,
                verdict(max.harmonicity_residual, tol.tol_harmonicity)
            )
            .map_err(io)?;
            writeln!(
                out,
                "max geodesic defect  {:.3e} (tol {:.0e}) {}",
                max.geodesic_defect,
                tol.tol_geodesy,
                verdict(max.geodesic_defect, tol.tol_geodesy)
            )
            .map_err(io)?;
            if let Some(d) = &decay {
                writeln!(out, "dilation decay exponent near the axis {:.5} (expected {})", d.exponent, d.q - 1)
                    .map_err(io)?;
            }
            if failed > 0 {
                writeln!(out, "{failed} points could not be evaluated").map_err(io)?;
            }
            writeln!(out, "{}", if pass { "PASS" } else { "FAIL" }).map_err(io)?;
        }
        Format::Json => {
            let o = VerifyOutput {
                map: m.name(),
                seed,
                samples,
                tolerances: *tol,
                maxima: max,
                failed_points: failed,
                decay,
                pass,
                points,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&o).map_err(io)?).map_err(io)?;
        }
    }
    Ok(if pass { EXIT_OK } else { EXIT_TOLERANCE })
}

pub fn cmd_catalog(
    filter: Option<&str>,
    out_dir: &Path,
    budget: &BudgetArgs,
    seed: u64,
    format: Format,
    out: &mut dyn Write,
) -> Result<i32, String> {
    let opts = CatalogOptions {
        euclidean_budget: budget.for_ambient(Ambient::Euclidean3),
        sphere_budget: budget.for_ambient(Ambient::Sphere3),
        seed,
        ..CatalogOptions::default()
    };
    opts.euclidean_budget.validate().map_err(io)?;
    opts.sphere_budget.validate().map_err(io)?;
    let report = run_catalog(&opts, filter);
    if report.cases.is_empty() {
        return Err(format!("no case matches {:?}", filter.unwrap_or("*")));
    }
    let text = report.to_string();
    let json = report.to_json();
    std::fs::create_dir_all(out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    std::fs::write(out_dir.join("report.txt"), &text).map_err(io)?;
    std::fs::write(out_dir.join("report.json"), format!("{json}\n")).map_err(io)?;
    match format {
        Format::Text => write!(out, "{text}").map_err(io)?,
        Format::Json => writeln!(out, "{json}").map_err(io)?,
    }
    Ok(if report.all_matched() { EXIT_OK } else { EXIT_CONDITION })
}

/// Sample points for `plotdata`.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// `n × m` points of `[−r, r]²` at height 0.
    Plane { n: usize, m: usize, r: f64 },
    /// `n` points spread over `S³`.
    Sphere { n: usize },
    /// `n` points on `x₁ = x₂ = 0`, `x₃ ∈ [a, b]`.
    Vertical { n: usize, a: f64, b: f64 },
}

impl std::str::FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bad grid {s:?}; expected plane:NxM[:R], sphere:N or vertical:N[:A:B]");
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
        let count = |x: &str| x.parse::<usize>().ok().filter(|n| *n >= 1).ok_or_else(bad);
        match parts.as_slice() {
            ["plane", dims, rest @ ..] if rest.len() <= 1 => {
                let (n, m) = dims.split_once('x').ok_or_else(bad)?;
                let r = rest.first().map_or(Ok(1.0), |x| num(x))?;
                Ok(Grid::Plane { n: count(n)?, m: count(m)?, r })
            }
            ["sphere", n] => Ok(Grid::Sphere { n: count(n)? }),
            ["vertical", n] => Ok(Grid::Vertical { n: count(n)?, a: 0.1, b: 2.0 }),
            ["vertical", n, a, b] => Ok(Grid::Vertical { n: count(n)?, a: num(a)?, b: num(b)? }),
            _ => Err(bad()),
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(a + b) / 2.0];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

impl Grid {
    pub fn default_for(map: &ChartedMap) -> Self {
        match map.kind {
            MapKind::Hopf => Grid::Sphere { n: 50 },
            MapKind::Pi4 => Grid::Vertical { n: 50, a: 0.1, b: 2.0 },
            _ => Grid::Plane { n: 10, m: 10, r: 1.0 },
        }
    }

    /// Points in the domain of `map`, in lexicographic grid order.
    pub fn points(&self, map: &ChartedMap) -> Result<Vec<Vec<f64>>, String> {
        let sphere = matches!(map.kind, MapKind::Hopf);
        match (self, sphere) {
            (Grid::Plane { n, m, r }, false) => {
                let xs = linspace(-r, *r, *n);
                let ys = linspace(-r, *r, *m);
                Ok(xs.iter().flat_map(|x| ys.iter().map(move |y| vec![*x, *y, 0.0])).collect())
            }
            (Grid::Vertical { n, a, b }, false) => {
                Ok(linspace(*a, *b, *n).into_iter().map(|z| vec![0.0, 0.0, z]).collect())
            }
            (Grid::Sphere { n }, true) => {
                // Hopf coordinates (cos η e^{iξ₁}, sin η e^{iξ₂}) on a golden-ratio spiral
                let g = (5f64.sqrt() - 1.0) / 2.0;
                Ok((0..*n)
                    .map(|k| {
                        let u = (k as f64 + 0.5) / *n as f64;
                        let eta = u.sqrt().asin();
                        let (x1, x2) = (
                            std::f64::consts::TAU * (k as f64 * g).fract(),
                            std::f64::consts::TAU * (k as f64 * g * g).fract(),
                        );
                        vec![eta.cos() * x1.cos(), eta.cos() * x1.sin(), eta.sin() * x2.cos(), eta.sin() * x2.sin()]
                    })
                    .collect())
            }
            (g, _) => Err(format!("grid {g:?} does not lie in the domain of {}", map.name())),
        }
    }
}

/// Coordinates written to the CSV: the point itself in `R³` and the
/// stereographic image from `−1` for points of `S³`.
fn csv_coordinates(x: &[f64]) -> [f64; 3] {
    match x.len() {
        4 => {
            let d = 1.0 + x[0];
            [x[1] / d, x[2] / d, x[3] / d]
        }
        _ => [x[0], x[1], x[2]],
    }
}

pub fn plot_rows(map: &ChartedMap, grid: &Grid) -> Result<Vec<[f64; 6]>, String> {
    let pts = grid.points(map)?;
    Ok(pts
        .iter()
        .zip(batch_residuals(map, &pts))
        .map(|(x, r)| {
            let c = csv_coordinates(x);
            let (l, cd, h) = match r {
                Ok(r) => (r.lambda, r.conformality_defect, r.harmonicity_residual),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
            [c[0], c[1], c[2], l, cd, h]
        })
        .collect())
}

pub fn write_csv(rows: &[[f64; 6]], w: impl Write) -> Result<(), String> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x1", "x2", "x3", "lambda", "conf_defect", "harm_residual"]).map_err(io)?;
    for r in rows {
        wr.write_record(r.iter().map(|v| format!("{v:.12e}"))).map_err(io)?;
    }
    wr.flush().map_err(io)
}

pub fn cmd_plotdata(map: &str, grid: Option<&str>, path: Option<&Path>, out: &mut dyn Write) -> Result<i32, String> {
    let m: ChartedMap = map.parse().map_err(io)?;
    let grid = match grid {
        Some(g) => g.parse::<Grid>()?,
        None => Grid::default_for(&m),
    };
    let rows = plot_rows(&m, &grid)?;
    match path {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| format!("{}: {e}", p.display()))?;
            write_csv(&rows, f)?;
        }
        None => write_csv(&rows, out)?,
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run_with(std::iter::once("spaceform").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn grids_parse() {
        assert_eq!("plane:10x10".parse::<Grid>().unwrap(), Grid::Plane { n: 10, m: 10, r: 1.0 });
        assert_eq!("vertical:5:1:2".parse::<Grid>().unwrap(), Grid::Vertical { n: 5, a: 1.0, b: 2.0 });
        assert!("plane:0x3".parse::<Grid>().is_err());
        assert!("cube:3".parse::<Grid>().is_err());
    }

    #[test]
    fn verify_standard_maps() {
        let (code, out, _) = run(&["verify", "pi1", "--samples", "20"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("PASS"));
        let (code, out, _) = run(&["verify", "screw:3", "--samples", "10"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("decay exponent"));
    }

    #[test]
    fn verify_reports_tolerance_failure() {
        let (code, _, _) = run(&["verify", "hopf", "--samples", "5", "--tol-geodesy", "1e-30"]);
        assert_eq!(code, EXIT_TOLERANCE);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(&["verify", "cosh"]).0, EXIT_USAGE);
        assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run(&["classify", "/nonexistent/spec.json"]).0, EXIT_USAGE);
        assert_eq!(run(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn plotdata_rows() {
        let m = ChartedMap::screw(2);
        let rows = plot_rows(&m, &"plane:10x10".parse().unwrap()).unwrap();
        assert_eq!(rows.len(), 100);
        let near =
            rows.iter()
                .map(|r| (r[0].hypot(r[1]), r[3]))
                .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
        assert!(near.1 < 0.5, "{near:?}");
        let rows = plot_rows(&ChartedMap::hopf(), &Grid::Sphere { n: 50 }).unwrap();
        assert!(rows.iter().all(|r| (r[3] - 2.0).abs() < 1e-5));
        let rows = plot_rows(&ChartedMap::pi4(), &"vertical:20".parse().unwrap()).unwrap();
        assert!(rows.iter().all(|r| (r[3] - r[2]).abs() < 1e-5));
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x1,x2,x3,lambda,conf_defect,harm_residual\n"));
        assert!(plot_rows(&ChartedMap::hopf(), &"plane:3x3".parse().unwrap()).is_err());
    }
}

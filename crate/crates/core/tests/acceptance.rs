use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spaceform::catalog::{
    all_cases, build_case, run_catalog, scale_spec, Builder, CatalogOptions, CatalogReport, Expected,
};
use spaceform::cli::DECAY_RADII;
use spaceform::euclid::{rotation, screw, vq, Angle, Isometry};
use spaceform::exact::QSqrt3;
use spaceform::foliation::run_pipeline;
use spaceform::group::{enumerate, EnumerationBudget};
use spaceform::numerics::{
    check_conformal_postcomposition, check_critical_dilation, residuals_at, sample_points, stencil_orders,
    stencil_orders_over, ChartedMap, Moebius, NumericsError,
};

const SAMPLES: usize = 100;
const SEED: u64 = 20240601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed_catalog(filter: &str) -> (CatalogReport, Duration) {
    let start = Instant::now();
    let report = run_catalog(&CatalogOptions::default(), Some(filter));
    (report, start.elapsed())
}

fn mismatches(report: &CatalogReport) -> Vec<String> {
    report.cases.iter().filter(|c| !c.matched).map(|c| c.case.clone()).collect()
}

fn euclidean_tables() -> Outcome {
    let (report, t) = timed_catalog("4.1-*");
    let bad = mismatches(&report);
    let pass = report.cases.len() == 20 && bad.is_empty() && t < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{} cases, {} matched, mismatched {:?}, {:.1} s",
            report.cases.len(),
            report.matched,
            bad,
            t.as_secs_f64()
        ),
    )
}

fn spherical_table() -> Outcome {
    let (report, t) = timed_catalog("4.3-*");
    let bad = mismatches(&report);
    let mut uncertified = Vec::new();
    for case in all_cases().into_iter().filter(|c| matches!(c.builder, Builder::Spherical { .. })) {
        let spec = build_case(&case).unwrap().spec;
        let complete = enumerate(&spec, &EnumerationBudget::sphere_default()).is_ok_and(|e| e.complete());
        let free = report.cases.iter().any(|r| r.case == case.id && r.verdicts.as_ref().is_some_and(|v| v.free));
        if !(complete && free) {
            uncertified.push(case.id.to_string());
        }
    }
    let pass = report.cases.len() == 6 && bad.is_empty() && uncertified.is_empty() && t < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{} rows matched, mismatched {:?}, not certified free and finite {:?}, {:.1} s",
            report.matched,
            bad,
            uncertified,
            t.as_secs_f64()
        ),
    )
}

fn negative_controls() -> Outcome {
    let (report, _) = timed_catalog("neg-*");
    let reasons: Vec<String> = report
        .cases
        .iter()
        .map(|c| format!("{} -> {}", c.case, c.verdicts.as_ref().and_then(|v| v.failure).unwrap_or("accepted")))
        .collect();
    let mut got: Vec<&str> = report.cases.iter().filter_map(|c| c.verdicts.as_ref()?.failure).collect();
    got.sort_unstable();
    let pass = report.cases.len() == 3 && report.all_matched() && got == ["a", "b1", "b2"];
    outcome(pass, reasons.join(", "))
}

fn harmonic_morphism_suite() -> Outcome {
    let maps = [(ChartedMap::pi1(), 1e-8), (ChartedMap::hopf(), 1e-5), (ChartedMap::pi4(), 1e-5)];
    let mut failures = Vec::new();
    let mut worst_order = f64::INFINITY;
    let mut pointwise_dips = 0usize;
    for (map, dil_tol) in &maps {
        let points = sample_points(map, SAMPLES, SEED);
        for x in &points {
            let r = match residuals_at(map, x) {
                Ok(r) => r,
                Err(e) => {
                    failures.push(format!("{}: {e}", map.name()));
                    continue;
                }
            };
            let dil_err = r.expected_lambda.map_or(f64::INFINITY, |l| (r.lambda - l).abs());
            let geo_tol = if map.name() == "hopf" { 1e-8 } else { 1e-6 };
            if dil_err > *dil_tol
                || r.conformality_defect > 1e-5
                || r.harmonicity_residual > 1e-4
                || r.geodesic_defect > geo_tol
            {
                failures.push(format!("{} at {:?}", map.name(), x));
            }
        }
        for (name, c) in stencil_orders_over(map, &points) {
            if !c.converged {
                failures.push(format!("{} {name} order {:.2} ({c:?})", map.name(), c.order));
            } else if c.order.is_finite() && c.residual_h2 > 1e-9 {
                worst_order = worst_order.min(c.order);
            }
        }
        let dips = points.iter().flat_map(|x| stencil_orders(map, x)).filter(|(_, c)| !c.converged).count();
        pointwise_dips += dips;
    }
    let pass = failures.is_empty();
    outcome(pass, format!("{SAMPLES} points per map, lowest sup-norm order {worst_order:.2}, pointwise order dips {pointwise_dips}, failures {failures:?}"))
}

fn critical_profile() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for q in 2..=4u32 {
        match check_critical_dilation(q, &DECAY_RADII) {
            Ok(p) => {
                let ok = (p.exponent - (q - 1) as f64).abs() < 1e-2;
                pass &= ok;
                parts.push(format!("q={q}: {:.5}", p.exponent));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("q={q}: {e}"));
            }
        }
    }
    outcome(pass, parts.join(", "))
}

fn random_moebius(rng: &mut ChaCha8Rng) -> Moebius {
    let mut c = || Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    loop {
        if let Ok(m) = Moebius::new(c(), c(), c(), c()) {
            return m;
        }
    }
}

fn conformal_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = Vec::new();
    let mut checked = 0usize;
    let mut worst: (f64, f64) = (0.0, 0.0);
    for map in [ChartedMap::hopf(), ChartedMap::pi1()] {
        for k in 0..10 {
            let m = random_moebius(&mut rng);
            for x in sample_points(&map, SAMPLES, SEED + k) {
                match check_conformal_postcomposition(&map, m, &x) {
                    Ok(r) => {
                        checked += 1;
                        worst = (worst.0.max(r.dilation.defect), worst.1.max(r.harmonicity_residual));
                        if r.dilation.defect > 1e-5 || r.harmonicity_residual > 1e-4 {
                            failures.push(format!("{} moebius {k} at {x:?}", map.name()));
                        }
                    }
                    Err(NumericsError::MoebiusPole) => {}
                    Err(e) => failures.push(format!("{} moebius {k}: {e}", map.name())),
                }
            }
        }
    }
    let pass = failures.is_empty() && checked >= 1900;
    outcome(
        pass,
        format!(
            "{checked} points, worst conformality {:.1e}, worst harmonicity {:.1e}, failures {failures:?}",
            worst.0, worst.1
        ),
    )
}

fn structural_invariants() -> Outcome {
    let report = run_catalog(&CatalogOptions::default(), None);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for c in &report.cases {
        let Some(r) = &c.residuals else { continue };
        for d in [r.equivariance_defect, r.homomorphism_defect, r.quotient_invariance_defect].into_iter().flatten() {
            worst = worst.max(d);
        }
        // no leaf action without generators or when (a) fails
        let leafless = c.case == "4.1-1a" || c.verdicts.as_ref().is_some_and(|v| !v.a);
        let missing = r.equivariance_defect.is_none() && !leafless;
        let over = [r.equivariance_defect, r.homomorphism_defect].into_iter().flatten().any(|d| d > 1e-9);
        if missing || over || (!leafless && r.pairs < 1000) {
            failures.push(c.case.clone());
        }
    }
    let conjugators = [
        screw(vq([0, 0, 1]), Angle::turns(1, 6), [QSqrt3::frac(1, 2), QSqrt3::frac(-1, 3), QSqrt3::int(2)]),
        rotation(vq([1, 0, 0]), Angle::half_turn()).compose(&Isometry::translation([
            QSqrt3::frac(3, 5),
            QSqrt3::int(1),
            QSqrt3::frac(1, 7),
        ])),
        Isometry::exact(
            spaceform::euclid::Affine {
                linear: [
                    [QSqrt3::frac(3, 5), QSqrt3::frac(-4, 5), QSqrt3::int(0)],
                    [QSqrt3::frac(4, 5), QSqrt3::frac(3, 5), QSqrt3::int(0)],
                    [QSqrt3::int(0), QSqrt3::int(0), QSqrt3::int(1)],
                ],
                translation: [QSqrt3::frac(1, 3), QSqrt3::int(0), QSqrt3::int(0)],
            },
            None,
        ),
    ];
    let homotheties = [QSqrt3::frac(3, 2), QSqrt3::frac(1, 4), QSqrt3::int(7)];
    let budget = EnumerationBudget::default();
    let mut variants = 0usize;
    for case in all_cases().into_iter().filter(|c| matches!(c.builder, Builder::Euclidean(_))) {
        let Expected::Accept(expected) = &case.expected else { continue };
        let spec = build_case(&case).unwrap().spec;
        let conj = conjugators.iter().filter_map(|c| spec.conjugated_euclidean(c));
        let scaled = homotheties.iter().filter_map(|k| scale_spec(&spec, *k));
        for v in conj.chain(scaled) {
            variants += 1;
            let got = run_pipeline(&v, &budget).ok().and_then(|r| r.orbifold);
            if got.as_ref() != Some(expected) {
                failures.push(format!("{} variant -> {:?}", case.id, got));
            }
        }
    }
    let pass = failures.is_empty() && worst <= 1e-9;
    outcome(
        pass,
        format!("{} cases, worst structural defect {worst:.1e}, {variants} conjugated/scaled variants, failures {failures:?}", report.cases.len()),
    )
}

fn spaceform(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_spaceform"))
        .args(args)
        .output()
        .expect("spawn spaceform")
        .status
        .code()
        .unwrap_or(-1)
}

fn cli_contract() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        spaceform(&["catalog", "--seed", "11", "--out-dir", d.path().to_str().unwrap()]);
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("report.json")).unwrap_or_default();
    let (a, b) = (read(&dirs[0]), read(&dirs[1]));
    let identical = !a.is_empty() && a == b;
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let table = [
        ("accept_screw_q4.json", 0),
        ("accept_trivial.json", 0),
        ("accept_lens.json", 0),
        ("reject_glide.json", 2),
        ("reject_irrational.json", 2),
        ("reject_tilted.json", 2),
    ];
    let wrong: Vec<String> = table
        .iter()
        .filter_map(|(f, want)| {
            let got = spaceform(&["classify", fixtures.join(f).to_str().unwrap()]);
            (got != *want).then(|| format!("{f}: {got} != {want}"))
        })
        .collect();
    let pass = identical && wrong.is_empty();
    outcome(pass, format!("report.json identical: {identical}, exit-code mismatches {wrong:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("Euclidean classification table", euclidean_tables),
        ("spherical classification table", spherical_table),
        ("negative controls", negative_controls),
        ("harmonic morphism numerics", harmonic_morphism_suite),
        ("critical-point dilation profile", critical_profile),
        ("conformal postcomposition", conformal_invariance),
        ("structural invariants", structural_invariants),
        ("CLI contract", cli_contract),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("criterion {}: {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

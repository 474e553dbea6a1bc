//! The standard maps `π₁`, `π₂` (Hopf), `π₄` and the screw quotients
//! `[(z, t)] ↦ z^q`, with finite-difference checks of the harmonic-morphism
//! characterization: horizontal conformality, harmonicity, geodesic fibres.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SMatrix};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::euclid::EuclIsometry;
use crate::group::{angle_has_finite_order, Generators, GroupSpec};

/// Step for first derivatives.
pub const H_FIRST: f64 = 1e-5;
/// Step for Laplacians (before one Richardson level).
pub const H_LAPLACE: f64 = 1e-3;
/// Step for the second derivative along fibres (before one Richardson level).
pub const H_GEODESIC: f64 = 1e-2;
/// Points closer than this many Laplacian steps to a declared critical set are refused.
pub const CRITICAL_MARGIN_STEPS: f64 = 10.0;
/// Inputs to `eval_hopf` must lie on `S³` to this tolerance.
pub const SPHERE_INPUT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("point is not on the unit 3-sphere (|z1|²+|z2|² = {0})")]
    OffSphere(f64),
    #[error("point is not in the upper half-space (x3 = {0})")]
    NotUpperHalfSpace(f64),
    #[error("point is within {0:.1e} of a critical point; the stencil would straddle it")]
    NearCritical(f64),
    #[error("differential has rank < 2 at a regular point (singular values {0:.3e}, {1:.3e})")]
    RankDeficient(f64, f64),
    #[error("Möbius map has a pole at the image point")]
    MoebiusPole,
    #[error("Möbius coefficients have ad − bc = 0")]
    DegenerateMoebius,
    #[error("group is not a rational screw family along e3: {0}")]
    NotScrewFamily(String),
    #[error("unknown map {0:?} (expected pi1, hopf, pi4 or screw:q)")]
    UnknownMap(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Domain {
    Euclidean3,
    Sphere3,
    HyperbolicUpperHalf3,
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Sphere3 => 4,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TargetMetric {
    Euclidean,
    /// Round metric of the given radius on `C ∪ ∞` via stereographic charts.
    RoundSphere(f64),
}

/// `w ↦ (a w + b)/(c w + d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moebius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Moebius {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self, NumericsError> {
        if (a * d - b * c).norm() < 1e-12 {
            return Err(NumericsError::DegenerateMoebius);
        }
        Ok(Self { a, b, c, d })
    }

    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Self { a: o, b: z, c: z, d: o }
    }

    /// Image of a point given in a chart.
    fn apply_chart(&self, v: ChartValue) -> Option<Complex64> {
        let (num, den) = match v {
            ChartValue::W(w) => (self.a * w + self.b, self.c * w + self.d),
            // w = 1/u
            ChartValue::InvW(u) => (self.a + self.b * u, self.c + self.d * u),
        };
        (den.norm() > 1e-300).then(|| num / den)
    }
}

/// Value of a map in one of the two stereographic charts of `C ∪ ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ChartValue {
    W(Complex64),
    /// `u = 1/w`
    InvW(Complex64),
}

impl ChartValue {
    fn coord(&self) -> Complex64 {
        match self {
            ChartValue::W(w) | ChartValue::InvW(w) => *w,
        }
    }

    fn to_w(self) -> Option<Complex64> {
        match self {
            ChartValue::W(w) => Some(w),
            ChartValue::InvW(u) => (u.norm() > 0.0).then(|| 1.0 / u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chart {
    W,
    InvW,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    Pi1,
    Hopf,
    Pi4,
    /// `[(z, t)] ↦ z^q` on `R³/⟨screw through 2πp/q along e₃⟩`.
    Screw(u32),
    Composed(Box<ChartedMap>, Moebius),
}

/// A map from a 3-dimensional domain into a surface, evaluated in charts.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartedMap {
    pub kind: MapKind,
    pub domain: Domain,
    pub target: TargetMetric,
}

impl ChartedMap {
    pub fn pi1() -> Self {
        Self { kind: MapKind::Pi1, domain: Domain::Euclidean3, target: TargetMetric::Euclidean }
    }

    /// Hopf map to the round sphere of radius 1.
    pub fn hopf() -> Self {
        Self { kind: MapKind::Hopf, domain: Domain::Sphere3, target: TargetMetric::RoundSphere(1.0) }
    }

    pub fn pi4() -> Self {
        Self { kind: MapKind::Pi4, domain: Domain::HyperbolicUpperHalf3, target: TargetMetric::Euclidean }
    }

    pub fn screw(q: u32) -> Self {
        Self { kind: MapKind::Screw(q), domain: Domain::Euclidean3, target: TargetMetric::Euclidean }
    }

    pub fn composed(self, m: Moebius) -> Self {
        let (domain, target) = (self.domain, self.target);
        Self { kind: MapKind::Composed(Box::new(self), m), domain, target }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            MapKind::Pi1 => "pi1".into(),
            MapKind::Hopf => "hopf".into(),
            MapKind::Pi4 => "pi4".into(),
            MapKind::Screw(q) => format!("screw:{q}"),
            MapKind::Composed(b, _) => format!("moebius∘{}", b.name()),
        }
    }

    fn natural_chart(&self, x: &[f64]) -> Chart {
        match &self.kind {
            MapKind::Hopf => {
                if x[0] * x[0] + x[1] * x[1] <= x[2] * x[2] + x[3] * x[3] {
                    Chart::W
                } else {
                    Chart::InvW
                }
            }
            MapKind::Composed(..) if matches!(self.target, TargetMetric::RoundSphere(_)) => match self.value(x) {
                Some(w) if w.norm() <= 1.0 => Chart::W,
                _ => Chart::InvW,
            },
            _ => Chart::W,
        }
    }

    fn eval_chart(&self, x: &[f64], chart: Chart) -> ChartValue {
        let raw = match &self.kind {
            MapKind::Pi1 | MapKind::Pi4 => ChartValue::W(Complex64::new(x[0], x[1])),
            MapKind::Screw(q) => ChartValue::W(Complex64::new(x[0], x[1]).powu(*q)),
            MapKind::Hopf => {
                let z1 = Complex64::new(x[0], x[1]);
                let z2 = Complex64::new(x[2], x[3]);
                match chart {
                    Chart::W => ChartValue::W(z1 / z2),
                    Chart::InvW => ChartValue::InvW(z2 / z1),
                }
            }
            MapKind::Composed(base, m) => {
                let inner = base.eval_chart(x, base.natural_chart(x));
                let w = m.apply_chart(inner);
                return match chart {
                    Chart::W => ChartValue::W(w.unwrap_or(Complex64::new(f64::INFINITY, 0.0))),
                    Chart::InvW => ChartValue::InvW(w.map(|w| 1.0 / w).unwrap_or_else(|| {
                        // ψ(w) = ∞: evaluate 1/ψ directly
                        match inner {
                            ChartValue::W(w) => (m.c * w + m.d) / (m.a * w + m.b),
                            ChartValue::InvW(u) => (m.c + m.d * u) / (m.a + m.b * u),
                        }
                    })),
                };
            }
        };
        match (raw, chart) {
            (ChartValue::W(w), Chart::InvW) => ChartValue::InvW(1.0 / w),
            (v, _) => v,
        }
    }

    /// Value in `C ∪ ∞` (`None` = ∞).
    pub fn value(&self, x: &[f64]) -> Option<Complex64> {
        match &self.kind {
            MapKind::Composed(base, m) => m.apply_chart(base.eval_chart(x, base.natural_chart(x))),
            _ => self.eval_chart(x, self.natural_chart(x)).to_w(),
        }
    }

    /// Conformal factor of the target metric at chart coordinate `w`.
    fn target_factor(&self, w: Complex64) -> f64 {
        match self.target {
            TargetMetric::Euclidean => 1.0,
            TargetMetric::RoundSphere(r) => 2.0 * r / (1.0 + w.norm_sqr()),
        }
    }

    /// Distance to the declared critical set, when there is one.
    fn critical_distance(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            MapKind::Screw(q) if *q >= 2 => Some((x[0] * x[0] + x[1] * x[1]).sqrt()),
            MapKind::Composed(b, _) => b.critical_distance(x),
            _ => None,
        }
    }

    /// Known dilation, for the standard maps.
    pub fn expected_dilation(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            MapKind::Pi1 => Some(1.0),
            MapKind::Hopf => match self.target {
                TargetMetric::RoundSphere(r) => Some(2.0 * r),
                TargetMetric::Euclidean => None,
            },
            MapKind::Pi4 => Some(x[2]),
            MapKind::Screw(q) => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                Some(*q as f64 * r.powi(*q as i32 - 1))
            }
            MapKind::Composed(..) => None,
        }
    }

    fn check_domain(&self, x: &[f64]) -> Result<(), NumericsError> {
        match self.domain {
            Domain::Sphere3 => {
                let n: f64 = x.iter().map(|v| v * v).sum();
                if (n - 1.0).abs() > SPHERE_INPUT_TOL {
                    return Err(NumericsError::OffSphere(n));
                }
            }
            Domain::HyperbolicUpperHalf3 if x[2] <= 0.0 => return Err(NumericsError::NotUpperHalfSpace(x[2])),
            _ => {}
        }
        Ok(())
    }

    /// Tangent vectors at `x`, orthonormal for the domain metric.
    fn tangent_frame(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self.domain {
            Domain::Euclidean3 => (0..3).map(|i| unit(3, i)).collect(),
            Domain::HyperbolicUpperHalf3 => (0..3).map(|i| scaled(&unit(3, i), x[2])).collect(),
            Domain::Sphere3 => {
                let mut frame: Vec<Vec<f64>> = Vec::new();
                for i in 0..4 {
                    let mut v = unit(4, i);
                    for b in std::iter::once(x.to_vec()).chain(frame.iter().cloned()) {
                        let d = dotv(&v, &b);
                        v = v.iter().zip(&b).map(|(p, q)| p - d * q).collect();
                    }
                    let n = dotv(&v, &v).sqrt();
                    if n > 1e-3 {
                        frame.push(scaled(&v, 1.0 / n));
                    }
                    if frame.len() == 3 {
                        break;
                    }
                }
                frame
            }
        }
    }

    /// Point reached from `x` by a step `h·v`, kept in the domain.
    fn step(&self, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
        let y: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
        match self.domain {
            Domain::Sphere3 => {
                let n = dotv(&y, &y).sqrt();
                scaled(&y, 1.0 / n)
            }
            _ => y,
        }
    }

    /// Differential at `x` as a 2×3 matrix from an orthonormal domain frame to
    /// an orthonormal target frame, by central differences with step `h`.
    pub fn differential(&self, x: &[f64], h: f64) -> SMatrix<f64, 2, 3> {
        let chart = self.natural_chart(x);
        let w0 = self.eval_chart(x, chart).coord();
        let mu = self.target_factor(w0);
        let mut j = SMatrix::<f64, 2, 3>::zeros();
        for (k, v) in self.tangent_frame(x).iter().enumerate() {
            let wp = self.eval_chart(&self.step(x, v, h), chart).coord();
            let wm = self.eval_chart(&self.step(x, v, -h), chart).coord();
            let d = (wp - wm) / (2.0 * h) * mu;
            j[(0, k)] = d.re;
            j[(1, k)] = d.im;
        }
        j
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl FromStr for ChartedMap {
    type Err = NumericsError;
    fn from_str(s: &str) -> Result<Self, NumericsError> {
        match s {
            "pi1" => Ok(Self::pi1()),
            "hopf" => Ok(Self::hopf()),
            "pi4" => Ok(Self::pi4()),
            _ => {
                let q = s
                    .strip_prefix("screw:")
                    .and_then(|q| q.parse::<u32>().ok())
                    .filter(|q| *q >= 1)
                    .ok_or_else(|| NumericsError::UnknownMap(s.to_string()))?;
                Ok(Self::screw(q))
            }
        }
    }
}

impl fmt::Display for ChartedMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// `π₁(x₁, x₂, x₃) = (x₁, x₂)`
pub fn eval_pi1(x: [f64; 3]) -> [f64; 2] {
    [x[0], x[1]]
}

/// `π₂(z₁, z₂) = z₁/z₂`, `None` for `z₂ = 0` (the point `∞`).
pub fn eval_hopf(z1: Complex64, z2: Complex64) -> Result<Option<Complex64>, NumericsError> {
    let n = z1.norm_sqr() + z2.norm_sqr();
    if (n - 1.0).abs() > SPHERE_INPUT_TOL {
        return Err(NumericsError::OffSphere(n));
    }
    Ok((z2.norm() > 0.0).then(|| z1 / z2))
}

/// `π₄(x₁, x₂, x₃) = x₁ + i x₂` on the upper half-space.
pub fn eval_pi4(x: [f64; 3]) -> Result<Complex64, NumericsError> {
    if x[2] <= 0.0 {
        return Err(NumericsError::NotUpperHalfSpace(x[2]));
    }
    Ok(Complex64::new(x[0], x[1]))
}

/// The parameter `q` of a one-generator group generated by a screw along
/// `e₃` through a rational angle `2πp/q`.
pub fn screw_order(spec: &GroupSpec) -> Result<u32, NumericsError> {
    let Generators::Euclidean(gens) = &spec.generators else {
        return Err(NumericsError::NotScrewFamily("not a Euclidean group".into()));
    };
    let [g]: &[EuclIsometry; 1] = gens
        .as_slice()
        .try_into()
        .map_err(|_| NumericsError::NotScrewFamily(format!("{} generators, expected one screw", gens.len())))?;
    let l = g.linear_f64();
    let vertical = l[0][2].abs() < 1e-12 && l[1][2].abs() < 1e-12 && (l[2][2] - 1.0).abs() < 1e-12;
    let t = g.translation_part_f64();
    if !vertical || !g.is_orientation_preserving() || t[0].abs() > 1e-12 || t[1].abs() > 1e-12 || t[2] == 0.0 {
        return Err(NumericsError::NotScrewFamily(format!("{g} is not a screw along e3 through the origin")));
    }
    let theta = g.rotation_angle().unwrap_or(0.0);
    if theta.abs() < 1e-12 {
        return Ok(1);
    }
    if !angle_has_finite_order(theta) {
        return Err(NumericsError::NotScrewFamily(format!("rotation angle {theta} is not a rational multiple of 2π")));
    }
    let mut p = g.into_float();
    for q in 1..=crate::group::FINITE_ORDER_MAX_DEN as u32 {
        if p.linear_deviation() < 1e-9 {
            return Ok(q);
        }
        p = p.compose(g);
    }
    Err(NumericsError::NotScrewFamily("rotation order not found".into()))
}

/// `[(z, t)] ↦ z^q` for the rational screw family.
pub fn eval_quotient_hm(spec: &GroupSpec, x: [f64; 3]) -> Result<Complex64, NumericsError> {
    let q = screw_order(spec)?;
    Ok(Complex64::new(x[0], x[1]).powu(q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dilation {
    pub value: f64,
    /// `‖Gram − λ²I‖/λ²` on an orthonormal horizontal basis.
    pub defect: f64,
    /// `|λ² − ‖dφ‖²/2|`, the cross-check against the full differential.
    pub identity_defect: f64,
}

fn dilation_from_differential(j: &SMatrix<f64, 2, 3>, critical_ok: bool) -> Result<Dilation, NumericsError> {
    let jd = DMatrix::from_fn(2, 3, |r, c| j[(r, c)]);
    let svd = jd.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let (s1, s2) = (svd.singular_values[order[0]], svd.singular_values[order[1]]);
    if s2 < 1e-8 * s1.max(1.0) && !critical_ok {
        return Err(NumericsError::RankDeficient(s1, s2));
    }
    // horizontal space: orthogonal complement of the kernel, spanned by the top right singular vectors
    let h = DMatrix::from_fn(3, 2, |r, c| vt[(order[c], r)]);
    let images = &jd * &h;
    let gram = images.transpose() * &images;
    let lambda_sq = gram.trace() / 2.0;
    let value = lambda_sq.max(0.0).sqrt();
    let defect = if lambda_sq > 0.0 { (gram - DMatrix::identity(2, 2) * lambda_sq).norm() / lambda_sq } else { 0.0 };
    let identity_defect = (lambda_sq - j.norm_squared() / 2.0).abs();
    Ok(Dilation { value, defect, identity_defect })
}

/// Dilation and conformality defect of the horizontal differential at `x`.
pub fn check_horizontal_conformality(map: &ChartedMap, x: &[f64]) -> Result<Dilation, NumericsError> {
    conformality_with_step(map, x, H_FIRST)
}

fn conformality_with_step(map: &ChartedMap, x: &[f64], h: f64) -> Result<Dilation, NumericsError> {
    map.check_domain(x)?;
    let near_critical = map.critical_distance(x).is_some_and(|d| d < 1e-6);
    dilation_from_differential(&map.differential(x, h), near_critical)
}

/// Point on the fibre through `x` at parameter `t` (unit speed).
pub fn fiber_point(map: &ChartedMap, x: &[f64], t: f64) -> Vec<f64> {
    match map.domain {
        Domain::Euclidean3 => vec![x[0], x[1], x[2] + t],
        // (e^{it}z₁, e^{it}z₂)
        Domain::Sphere3 => {
            let (s, c) = t.sin_cos();
            vec![c * x[0] - s * x[1], s * x[0] + c * x[1], c * x[2] - s * x[3], s * x[2] + c * x[3]]
        }
        // hyperbolic arclength along the vertical half-line
        Domain::HyperbolicUpperHalf3 => vec![x[0], x[1], x[2] * t.exp()],
    }
}

fn second_difference(f: impl Fn(f64) -> Vec<f64>, h: f64) -> Vec<f64> {
    let (p, m, z) = (f(h), f(-h), f(0.0));
    p.iter().zip(&m).zip(&z).map(|((a, b), c)| (a + b - 2.0 * c) / (h * h)).collect()
}

fn first_difference(f: impl Fn(f64) -> Vec<f64>, h: f64) -> Vec<f64> {
    let (p, m) = (f(h), f(-h));
    p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

/// Geodesic-equation residual of the fibre through `x`, sampled at a few
/// parameters, using second differences with step `h` and `richardson` levels.
fn geodesic_defect_with(map: &ChartedMap, x: &[f64], h: f64, richardson: bool) -> f64 {
    let samples = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let second = |t0: f64| -> Vec<f64> {
        let g = |s: f64| fiber_point(map, x, t0 + s);
        let d = second_difference(g, h);
        if richardson {
            let d2 = second_difference(g, h / 2.0);
            d2.iter().zip(&d).map(|(a, b)| (4.0 * a - b) / 3.0).collect()
        } else {
            d
        }
    };
    samples
        .iter()
        .map(|&t0| {
            let acc = second(t0);
            let pt = fiber_point(map, x, t0);
            match map.domain {
                Domain::Euclidean3 => dotv(&acc, &acc).sqrt(),
                // unit-speed great circle: γ'' = −γ
                Domain::Sphere3 => acc.iter().zip(&pt).map(|(a, p)| (a + p).powi(2)).sum::<f64>().sqrt(),
                Domain::HyperbolicUpperHalf3 => {
                    let g = |s: f64| fiber_point(map, x, t0 + s);
                    let mut vel = first_difference(g, h);
                    if richardson {
                        let v2 = first_difference(g, h / 2.0);
                        vel = v2.iter().zip(&vel).map(|(a, b)| (4.0 * a - b) / 3.0).collect();
                    }
                    // ẍ₃ x₃ = ẋ₃², made dimensionless by x₃²
                    (acc[2] * pt[2] - vel[2] * vel[2]).abs() / (pt[2] * pt[2])
                }
            }
        })
        .fold(0.0, f64::max)
}

/// Defect of the fibre through `x` from being a geodesic.
pub fn check_fiber_geodesic(map: &ChartedMap, x: &[f64]) -> Result<f64, NumericsError> {
    map.check_domain(x)?;
    Ok(geodesic_defect_with(map, x, H_GEODESIC, true))
}

/// Harmonic functions on the target chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TestFunction {
    RePow(u32),
    ImPow(u32),
    /// `log|w − c|`
    LogDist([f64; 2]),
}

impl TestFunction {
    pub fn eval(&self, w: Complex64) -> f64 {
        match self {
            TestFunction::RePow(k) => w.powu(*k).re,
            TestFunction::ImPow(k) => w.powu(*k).im,
            TestFunction::LogDist(c) => (w - Complex64::new(c[0], c[1])).norm().ln(),
        }
    }

    /// The three built-ins used by the batch checks.
    pub fn builtins() -> [TestFunction; 3] {
        [TestFunction::RePow(2), TestFunction::ImPow(3), TestFunction::LogDist([3.0, 3.0])]
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::RePow(k) => write!(f, "Re(w^{k})"),
            TestFunction::ImPow(k) => write!(f, "Im(w^{k})"),
            TestFunction::LogDist(c) => write!(f, "log|w-({}+{}i)|", c[0], c[1]),
        }
    }
}

/// Laplacian of `u` at `x` in the domain metric and the Hessian scale, by
/// central differences with step `h`.
fn laplacian(domain: Domain, u: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> (f64, f64) {
    let n = domain.dim();
    // on S³ differentiate the degree-0 homogeneous extension in R⁴
    let ext = |y: &[f64]| -> f64 {
        match domain {
            Domain::Sphere3 => {
                let r = dotv(y, y).sqrt();
                u(&scaled(y, 1.0 / r))
            }
            _ => u(y),
        }
    };
    let u0 = ext(x);
    let mut lap = 0.0;
    let mut scale = 0.0;
    let mut d3 = 0.0;
    for i in 0..n {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[i] += h;
        m[i] -= h;
        let (up, um) = (ext(&p), ext(&m));
        let second = (up + um - 2.0 * u0) / (h * h);
        lap += second;
        scale += second.abs();
        if i == 2 {
            d3 = (up - um) / (2.0 * h);
        }
    }
    match domain {
        Domain::HyperbolicUpperHalf3 => {
            let x3 = x[2];
            (x3 * x3 * lap - x3 * d3, x3 * x3 * scale)
        }
        _ => (lap, scale),
    }
}

fn harmonicity_with_step(map: &ChartedMap, f: TestFunction, x: &[f64], h: f64, richardson: bool) -> f64 {
    let chart = map.natural_chart(x);
    let u = |y: &[f64]| f.eval(map.eval_chart(y, chart).coord());
    let (l1, s1) = laplacian(map.domain, &u, x, h);
    let (lap, scale) = if richardson {
        let (l2, s2) = laplacian(map.domain, &u, x, h / 2.0);
        ((4.0 * l2 - l1) / 3.0, s1.max(s2))
    } else {
        (l1, s1)
    };
    lap.abs() / scale.max(1.0)
}

/// `|Δ(f∘φ)(x)|` relative to the Hessian scale.
pub fn check_harmonicity(map: &ChartedMap, f: TestFunction, x: &[f64]) -> Result<f64, NumericsError> {
    map.check_domain(x)?;
    if let Some(d) = map.critical_distance(x) {
        if d < CRITICAL_MARGIN_STEPS * H_LAPLACE {
            return Err(NumericsError::NearCritical(CRITICAL_MARGIN_STEPS * H_LAPLACE));
        }
    }
    Ok(harmonicity_with_step(map, f, x, H_LAPLACE, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PostcompositionReport {
    pub dilation: Dilation,
    /// Largest harmonicity residual over the built-in test functions.
    pub harmonicity_residual: f64,
}

/// Conformality and harmonicity of `moebius ∘ map` at `x`.
pub fn check_conformal_postcomposition(
    map: &ChartedMap,
    moebius: Moebius,
    x: &[f64],
) -> Result<PostcompositionReport, NumericsError> {
    map.check_domain(x)?;
    let inner = map.eval_chart(x, map.natural_chart(x));
    let den = match inner {
        ChartValue::W(w) => moebius.c * w + moebius.d,
        ChartValue::InvW(u) => moebius.c + moebius.d * u,
    };
    if den.norm() < 1e-6 && matches!(map.target, TargetMetric::Euclidean) {
        return Err(NumericsError::MoebiusPole);
    }
    let composed = map.clone().composed(moebius);
    let dilation = check_horizontal_conformality(&composed, x)?;
    let mut harmonicity_residual: f64 = 0.0;
    for f in TestFunction::builtins() {
        harmonicity_residual = harmonicity_residual.max(check_harmonicity(&composed, f, x)?);
    }
    Ok(PostcompositionReport { dilation, harmonicity_residual })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayProfile {
    pub q: u32,
    pub radii: Vec<f64>,
    pub dilations: Vec<f64>,
    /// Least-squares slope of `log λ` against `log r`.
    pub exponent: f64,
}

/// Dilation of `z^q` along a ray approaching the axis and the fitted decay exponent.
pub fn check_critical_dilation(q: u32, radii: &[f64]) -> Result<DecayProfile, NumericsError> {
    let map = ChartedMap::screw(q);
    let dilations = radii
        .iter()
        .map(|r| check_horizontal_conformality(&map, &[*r, 0.0, 0.3]).map(|d| d.value))
        .collect::<Result<Vec<_>, _>>()?;
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = dilations.iter().map(|l| l.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(DecayProfile { q, radii: radii.to_vec(), dilations, exponent: sxy / sxx })
}

/// Observed order of a stencil between the steps `step` and `step/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub step: f64,
    pub residual_h: f64,
    pub residual_h2: f64,
    pub order: f64,
    /// Order at least `min_order`, or the residual already below the floor.
    pub converged: bool,
}

/// Halves `h0` up to `halvings` times and reads the order off the finest
/// pair whose finer residual is still above `floor`.
pub fn convergence_order(
    residual: impl Fn(f64) -> f64,
    h0: f64,
    halvings: u32,
    floor: f64,
    min_order: f64,
) -> ConvergenceReport {
    let steps: Vec<f64> = (0..=halvings.max(1)).map(|k| h0 / f64::from(1u32 << k)).collect();
    let rs: Vec<f64> = steps.iter().map(|&h| residual(h)).collect();
    let k = (2..rs.len()).rev().find(|&k| rs[k] > floor).unwrap_or(1);
    let (r1, r2) = (rs[k - 1], rs[k]);
    let order = (r1 / r2).log2();
    let converged = r1 < floor || (r2 <= floor && r1 >= r2) || order >= min_order;
    ConvergenceReport { step: steps[k - 1], residual_h: r1, residual_h2: r2, order, converged }
}

/// Observed orders of the raw stencils at `x`: dilation error (when the exact
/// dilation is known) or conformality defect, harmonicity for each built-in,
/// and the fibre geodesic defect.
pub fn stencil_orders(map: &ChartedMap, x: &[f64]) -> Vec<(String, ConvergenceReport)> {
    stencil_orders_over(map, &[x.to_vec()])
}

/// Observed orders of the sup-norm of each stencil residual over `points`.
pub fn stencil_orders_over(map: &ChartedMap, points: &[Vec<f64>]) -> Vec<(String, ConvergenceReport)> {
    let sup = |r: &(dyn Fn(&[f64]) -> f64 + Sync)| points.par_iter().map(|x| r(x)).reduce(|| 0.0, f64::max);
    let mut out = Vec::new();
    let dilation_error = |x: &[f64], h: f64| {
        let d = conformality_with_step(map, x, h).map(|d| (d.value, d.defect)).unwrap_or((f64::NAN, f64::NAN));
        match map.expected_dilation(x) {
            Some(l) => (d.0 - l).abs(),
            None => d.1,
        }
    };
    out.push(("dilation".to_string(), convergence_order(|h| sup(&|x| dilation_error(x, h)), 1e-2, 4, 1e-9, 1.8)));
    for f in TestFunction::builtins() {
        let order = convergence_order(|h| sup(&|x| harmonicity_with_step(map, f, x, h, false)), 1e-2, 2, 1e-9, 1.8);
        out.push((f.to_string(), order));
    }
    let order = convergence_order(|h| sup(&|x| geodesic_defect_with(map, x, h, false)), 1e-1, 2, 1e-10, 1.8);
    out.push(("geodesic".to_string(), order));
    out
}

/// Seeded regular sample points for a map.
pub fn sample_points(map: &ChartedMap, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_point(map, &mut rng)).collect()
}

fn sample_point(map: &ChartedMap, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match (&map.kind, map.domain) {
        (MapKind::Screw(_), _) => {
            let r = rng.gen_range(0.2..1.2);
            let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            vec![r * a.cos(), r * a.sin(), rng.gen_range(-2.0..2.0)]
        }
        (_, Domain::Euclidean3) => (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        (_, Domain::HyperbolicUpperHalf3) => {
            vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0)]
        }
        (_, Domain::Sphere3) => loop {
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = dotv(&v, &v).sqrt();
            if n > 0.2 && n < 1.0 {
                break scaled(&v, 1.0 / n);
            }
        },
    }
}

/// All checks at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub point: Vec<f64>,
    pub lambda: f64,
    pub expected_lambda: Option<f64>,
    pub conformality_defect: f64,
    pub dilation_identity_defect: f64,
    /// Largest residual over the built-in test functions.
    pub harmonicity_residual: f64,
    pub geodesic_defect: f64,
    pub step_first: f64,
    pub step_laplacian: f64,
    pub step_geodesic: f64,
}

pub fn residuals_at(map: &ChartedMap, x: &[f64]) -> Result<ResidualReport, NumericsError> {
    let d = check_horizontal_conformality(map, x)?;
    let mut harm: f64 = 0.0;
    for f in TestFunction::builtins() {
        harm = harm.max(check_harmonicity(map, f, x)?);
    }
    Ok(ResidualReport {
        point: x.to_vec(),
        lambda: d.value,
        expected_lambda: map.expected_dilation(x),
        conformality_defect: d.defect,
        dilation_identity_defect: d.identity_defect,
        harmonicity_residual: harm,
        geodesic_defect: check_fiber_geodesic(map, x)?,
        step_first: H_FIRST,
        step_laplacian: H_LAPLACE,
        step_geodesic: H_GEODESIC,
    })
}

/// Residual reports at the given points, computed in parallel, in input order.
pub fn batch_residuals(map: &ChartedMap, points: &[Vec<f64>]) -> Vec<Result<ResidualReport, NumericsError>> {
    points.par_iter().map(|x| residuals_at(map, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euclid::{e3, screw, vq, Angle};
    use crate::group::{enumerate_in_ball, EnumerationBudget};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn formula_examples() {
        assert_eq!(eval_pi1([1.0, 2.0, 3.0]), [1.0, 2.0]);
        assert_eq!(eval_pi1([0.0, 0.0, 7.0]), [0.0, 0.0]);
        assert_eq!(eval_hopf(c(0.0, 0.0), c(1.0, 0.0)).unwrap(), Some(c(0.0, 0.0)));
        assert_eq!(eval_hopf(c(1.0, 0.0), c(0.0, 0.0)).unwrap(), None);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((eval_hopf(c(r, 0.0), c(r, 0.0)).unwrap().unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!(eval_hopf(c(1.0, 0.0), c(1.0, 0.0)).is_err());
        assert_eq!(eval_pi4([1.0, 2.0, 5.0]).unwrap(), c(1.0, 2.0));
        assert_eq!(eval_pi4([3.0, -1.0, 0.1]).unwrap(), c(3.0, -1.0));
        assert!(eval_pi4([0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn quotient_examples() {
        let s = |q: i64| GroupSpec::euclidean("s", vec![screw(e3(), Angle::turns(1, q), e3())]).unwrap();
        assert_eq!(eval_quotient_hm(&s(2), [1.0, 0.0, 0.0]).unwrap(), c(1.0, 0.0));
        assert_eq!(eval_quotient_hm(&s(2), [-1.0, 0.0, 0.0]).unwrap(), c(1.0, 0.0));
        assert_eq!(eval_quotient_hm(&s(1), [0.4, 0.7, 3.0]).unwrap(), c(0.4, 0.7));
        assert!((eval_quotient_hm(&s(3), [0.0, 1.0, 5.0]).unwrap() - c(0.0, -1.0)).norm() < 1e-15);
        let five = GroupSpec::euclidean("s5", vec![screw(e3(), Angle::turns(2, 5), e3())]).unwrap();
        assert_eq!(screw_order(&five).unwrap(), 5);
        let glide = GroupSpec::euclidean("g", vec![crate::euclid::glide(vq([1, 0, 0]), e3())]).unwrap();
        assert!(eval_quotient_hm(&glide, [0.0; 3]).is_err());
    }

    #[test]
    fn quotient_is_invariant_under_the_group() {
        for q in [2i64, 3, 5] {
            let spec = GroupSpec::euclidean("s", vec![screw(e3(), Angle::turns(1, q), e3())]).unwrap();
            let Generators::Euclidean(g) = &spec.generators else { panic!() };
            let en = enumerate_in_ball(g, &EnumerationBudget::default()).unwrap();
            let x = [0.7, -0.4, 0.2];
            let base = eval_quotient_hm(&spec, x).unwrap();
            for h in &en.elements {
                let y = h.apply_f64(&x);
                assert!((eval_quotient_hm(&spec, y).unwrap() - base).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn dilation_examples() {
        let d = check_horizontal_conformality(&ChartedMap::pi1(), &[0.3, -0.2, 5.0]).unwrap();
        assert!((d.value - 1.0).abs() < 1e-8 && d.defect < 1e-8);
        for x in sample_points(&ChartedMap::hopf(), 20, 1) {
            let d = check_horizontal_conformality(&ChartedMap::hopf(), &x).unwrap();
            assert!((d.value - 2.0).abs() < 1e-5, "λ = {}", d.value);
            assert!(d.identity_defect < 1e-6);
        }
        let d = check_horizontal_conformality(&ChartedMap::pi4(), &[0.5, 1.0, 2.5]).unwrap();
        assert!((d.value - 2.5).abs() < 1e-5);
    }

    /// Independent oracle for the Hopf dilation: differentiate z₁/z₂ analytically.
    #[test]
    fn hopf_dilation_matches_analytic_differential() {
        let map = ChartedMap::hopf();
        for x in sample_points(&map, 10, 2) {
            let z1 = c(x[0], x[1]);
            let z2 = c(x[2], x[3]);
            if z1.norm() > z2.norm() {
                continue;
            }
            let w = z1 / z2;
            let mu = 2.0 / (1.0 + w.norm_sqr());
            // dw = dz₁/z₂ − z₁ dz₂/z₂²
            let frame = map.tangent_frame(&x);
            let cols: Vec<Complex64> =
                frame.iter().map(|v| (c(v[0], v[1]) / z2 - z1 * c(v[2], v[3]) / (z2 * z2)) * mu).collect();
            let j = SMatrix::<f64, 2, 3>::from_fn(|r, k| if r == 0 { cols[k].re } else { cols[k].im });
            let exact = dilation_from_differential(&j, false).unwrap();
            assert!((exact.value - 2.0).abs() < 1e-12);
            let numeric = check_horizontal_conformality(&map, &x).unwrap();
            assert!((numeric.value - exact.value).abs() < 1e-8);
        }
    }

    #[test]
    fn harmonicity_examples() {
        let r = check_harmonicity(&ChartedMap::pi1(), TestFunction::RePow(2), &[0.3, -0.2, 5.0]).unwrap();
        assert!(r < 1e-6);
        for x in sample_points(&ChartedMap::hopf(), 50, 3) {
            assert!(check_harmonicity(&ChartedMap::hopf(), TestFunction::RePow(1), &x).unwrap() < 1e-4);
        }
        let r = check_harmonicity(&ChartedMap::pi4(), TestFunction::ImPow(2), &[1.0, 1.0, 2.0]).unwrap();
        assert!(r < 1e-4);
        assert!(check_harmonicity(&ChartedMap::screw(2), TestFunction::RePow(1), &[0.001, 0.0, 0.0]).is_err());
    }

    /// A function that is not harmonic after composition is detected.
    #[test]
    fn harmonicity_detects_non_harmonic_functions() {
        let map = ChartedMap::pi1();
        let x = [0.5, 0.5, 0.0];
        // |w|² has Laplacian 4
        let chart = map.natural_chart(&x);
        let u = |y: &[f64]| map.eval_chart(y, chart).coord().norm_sqr();
        let (lap, _) = laplacian(Domain::Euclidean3, &u, &x, 1e-3);
        assert!((lap - 4.0).abs() < 1e-5);
        // the Hopf map composed with |w|² is not harmonic on S³
        let h = ChartedMap::hopf();
        let x = sample_points(&h, 1, 9).remove(0);
        let chart = h.natural_chart(&x);
        let u = |y: &[f64]| h.eval_chart(y, chart).coord().norm_sqr();
        let (lap, _) = laplacian(Domain::Sphere3, &u, &x, 1e-3);
        assert!(lap.abs() > 1e-2);
    }

    #[test]
    fn fibre_geodesics() {
        assert!(check_fiber_geodesic(&ChartedMap::pi1(), &[1.0, 2.0, 0.0]).unwrap() < 1e-10);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(check_fiber_geodesic(&ChartedMap::hopf(), &[r, 0.0, r, 0.0]).unwrap() < 1e-8);
        assert!(check_fiber_geodesic(&ChartedMap::pi4(), &[0.0, 0.0, 1.0]).unwrap() < 1e-6);
    }

    #[test]
    fn fibres_are_level_sets() {
        for map in [ChartedMap::pi1(), ChartedMap::hopf(), ChartedMap::pi4()] {
            for x in sample_points(&map, 50, 4) {
                let a = map.value(&x);
                for t in [0.3, 1.7, -2.2] {
                    let b = map.value(&fiber_point(&map, &x, t));
                    let (pa, pb) = (crate::quat::hopf_coordinate_to_leaf(a), crate::quat::hopf_coordinate_to_leaf(b));
                    assert!((0..3).all(|i| (pa[i] - pb[i]).abs() < 1e-9), "{}", map.name());
                }
            }
        }
    }

    #[test]
    fn postcomposition_examples() {
        let hopf = ChartedMap::hopf();
        let x = vec![0.1, 0.2, 0.6, (1.0f64 - 0.01 - 0.04 - 0.36).sqrt()];
        let base = check_horizontal_conformality(&hopf, &x).unwrap();
        let same = check_conformal_postcomposition(&hopf, Moebius::identity(), &x).unwrap();
        assert!((same.dilation.value - base.value).abs() < 1e-9);
        let inv = Moebius::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let r = check_conformal_postcomposition(&hopf, inv, &x).unwrap();
        assert!(r.harmonicity_residual < 1e-4 && r.dilation.defect < 1e-5);
        // w ↦ 1/w is an isometry of the round sphere
        assert!((r.dilation.value - 2.0).abs() < 1e-5);
        let cay = Moebius::new(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)).unwrap();
        let r = check_conformal_postcomposition(&ChartedMap::pi1(), cay, &[0.2, 0.5, 1.0]).unwrap();
        assert!(r.harmonicity_residual < 1e-4 && r.dilation.defect < 1e-5);
        assert_eq!(
            check_conformal_postcomposition(&ChartedMap::pi1(), cay, &[1.0, 0.0, 0.0]).unwrap_err(),
            NumericsError::MoebiusPole
        );
    }

    #[test]
    fn critical_decay() {
        let radii = [0.1, 0.05, 0.025];
        for q in 2..=4u32 {
            let p = check_critical_dilation(q, &radii).unwrap();
            assert!((p.exponent - (q - 1) as f64).abs() < 1e-2, "q = {q}: {}", p.exponent);
        }
        let p = check_critical_dilation(1, &radii).unwrap();
        assert!(p.dilations.iter().all(|l| (l - 1.0).abs() < 1e-9));
        let at_axis = check_horizontal_conformality(&ChartedMap::screw(2), &[0.0, 0.0, 1.0]).unwrap();
        assert!(at_axis.value < 1e-6);
    }

    #[test]
    fn stencils_converge_at_second_order() {
        for map in [ChartedMap::pi1(), ChartedMap::hopf(), ChartedMap::pi4(), ChartedMap::screw(3)] {
            for x in sample_points(&map, 5, 5) {
                for (name, r) in stencil_orders(&map, &x) {
                    assert!(r.converged, "{} {name}: {r:?}", map.name());
                }
            }
        }
    }

    #[test]
    fn map_names_parse() {
        assert_eq!("screw:3".parse::<ChartedMap>().unwrap(), ChartedMap::screw(3));
        assert!("screw:0".parse::<ChartedMap>().is_err());
        assert!("pi3".parse::<ChartedMap>().is_err());
    }
}

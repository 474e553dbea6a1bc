//! The orientable Euclidean families and the spherical table as executable
//! cases, each compared against its expected leaf group and orbifold.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::euclid::{
    add, dot, e3, is_parallel_exact, is_zero_vec, rational_rank, real_rank_exact, scale, screw, Affine, Angle,
    EuclIsometry, Isometry, Motion, Vec2Q, Vec3Q,
};
use crate::exact::{QSqrt3, Scalar};
use crate::foliation::{
    leaf_of_euclidean, leaf_of_so4, project_f1, project_f2, run_pipeline, Failure, Orbifold2, PipelineError,
    VerificationReport,
};
use crate::group::{self, Ambient, EnumerationBudget, GroupEnumeration, GroupError, GroupSpec};
use crate::numerics::{batch_residuals, eval_quotient_hm, sample_points, ChartedMap};
use crate::quat::{
    binary_icosahedral, binary_octahedral, binary_tetrahedral, phi_cover, QuatError, Quaternion, SO4Element,
};

/// Number of `(g, x)` pairs sampled for the structural checks.
pub const STRUCTURAL_PAIRS: usize = 1000;
/// Number of points for the numerical spot checks of the standard morphism.
pub const RESIDUAL_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("unknown case {0:?}")]
    UnknownCase(String),
    #[error("case {case}: constraint violated: {clause}")]
    Constraint { case: String, clause: String },
    #[error("(H1, H2) = ({0}, {1}) is not a row of the spherical table")]
    NotInTable(H1, H2),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Quat(#[from] QuatError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Outcome a case is expected to produce.
#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    Accept(Orbifold2),
    Reject(Failure),
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expected::Accept(o) => write!(f, "{o}"),
            Expected::Reject(c) => write!(f, "reject ({c})"),
        }
    }
}

/// Vector and angle parameters of a Euclidean family. `None` means the case default.
#[derive(Debug, Clone, Default)]
pub struct EuclideanParams {
    pub v1: Option<Vec3Q>,
    pub v2: Option<Vec3Q>,
    pub v3: Option<Vec3Q>,
    pub theta: Option<Angle>,
    /// Common factor applied to every vector.
    pub scale: Option<QSqrt3>,
}

/// `H₁` of the spherical table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum H1 {
    Cyclic(u32),
    Dihedral(u32),
}

/// `H₂` of the spherical table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum H2 {
    Cyclic(u32),
    Dihedral(u32),
    Tetrahedral,
    Octahedral,
    Icosahedral,
}

impl fmt::Display for H1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            H1::Cyclic(p) => write!(f, "Z{p}"),
            H1::Dihedral(m) => write!(f, "D{m}"),
        }
    }
}

impl fmt::Display for H2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            H2::Cyclic(q) => write!(f, "Z{q}"),
            H2::Dihedral(m) => write!(f, "D{m}"),
            H2::Tetrahedral => f.write_str("T"),
            H2::Octahedral => f.write_str("O"),
            H2::Icosahedral => f.write_str("I"),
        }
    }
}

/// Lift parameters not fixed by `(H₁, H₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphericalExtra {
    /// Lens spaces: the generator is `φ(e^{2πi a/p}, e^{2πi b/q})`.
    pub lens_exponents: (u32, u32),
}

impl Default for SphericalExtra {
    fn default() -> Self {
        Self { lens_exponents: (2, 1) }
    }
}

/// How a case builds its group.
#[derive(Debug, Clone)]
pub enum Builder {
    Euclidean(EuclideanParams),
    Spherical { h1: H1, h2: H2, extra: SphericalExtra },
    Negative,
}

#[derive(Debug, Clone)]
pub struct CatalogCase {
    pub id: &'static str,
    pub family: &'static str,
    pub builder: Builder,
    pub expected_leaf_group: &'static str,
    pub expected: Expected,
}

/// A built group plus notes on fallbacks taken while building it.
#[derive(Debug, Clone)]
pub struct BuiltCase {
    pub spec: GroupSpec,
    pub notes: Vec<String>,
}

fn q(n: i64) -> QSqrt3 {
    QSqrt3::int(n)
}

fn v3(x: i64, y: i64, z: i64) -> Vec3Q {
    [q(x), q(y), q(z)]
}

fn e1() -> Vec3Q {
    v3(1, 0, 0)
}

fn e2() -> Vec3Q {
    v3(0, 1, 0)
}

fn proj(v: &Vec3Q) -> Vec2Q {
    [v[0], v[1]]
}

fn half(v: &Vec3Q, k: i64) -> Vec3Q {
    scale(QSqrt3::frac(1, k), v)
}

fn t(v: Vec3Q) -> EuclIsometry {
    Isometry::translation(v)
}

fn det3(a: &Vec3Q, b: &Vec3Q, c: &Vec3Q) -> QSqrt3 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Unit vector at angle `2πk/12` in the plane `e₃⊥`.
fn plane_dir(k: i64) -> Vec3Q {
    let (c, s) = Angle::turns(k, 12).exact_cos_sin().expect("twelfth turns are exact");
    [c, s, q(0)]
}

struct Checker<'a> {
    case: &'a str,
}

impl Checker<'_> {
    fn require(&self, ok: bool, clause: &str) -> Result<(), CatalogError> {
        if ok {
            Ok(())
        } else {
            Err(CatalogError::Constraint { case: self.case.to_string(), clause: clause.to_string() })
        }
    }
}

fn parallel_e3(v: &Vec3Q) -> bool {
    !is_zero_vec(v) && is_parallel_exact(v, &e3())
}

fn horizontal(v: &Vec3Q) -> bool {
    !is_zero_vec(v) && v[2].is_zero()
}

fn independent(vs: &[Vec3Q]) -> bool {
    real_rank_exact(vs) == vs.len()
}

fn mutually_orthogonal(a: &Vec3Q, b: &Vec3Q, c: &Vec3Q) -> bool {
    dot(a, b).is_zero() && dot(a, c).is_zero() && dot(b, c).is_zero()
}

/// Every case, in catalog order.
pub fn all_cases() -> Vec<CatalogCase> {
    let eu = |id, family, leaf, orb: &str| CatalogCase {
        id,
        family,
        builder: Builder::Euclidean(EuclideanParams::default()),
        expected_leaf_group: leaf,
        expected: Expected::Accept(orb.parse().expect("valid orbifold name")),
    };
    let sp = |id, family, h1, h2, leaf, orb: &str| CatalogCase {
        id,
        family,
        builder: Builder::Spherical { h1, h2, extra: SphericalExtra::default() },
        expected_leaf_group: leaf,
        expected: Expected::Accept(orb.parse().expect("valid orbifold name")),
    };
    let neg = |id, family, leaf, f| CatalogCase {
        id,
        family,
        builder: Builder::Negative,
        expected_leaf_group: leaf,
        expected: Expected::Reject(f),
    };
    vec![
        eu("4.1-1a", "E", "{e}", "Plane"),
        eu("4.1-2a", "J1", "{e}", "Plane"),
        eu("4.1-2b", "J1", "<R_pi>", "Plane(2)"),
        eu("4.1-2c", "J1", "<R_theta>", "Plane(3)"),
        eu("4.1-2d", "J1", "<t_pi(v)>", "Cylinder"),
        eu("4.1-2e", "J1", "<(S_v, t_v)>", "MoebiusBand"),
        eu("4.1-3a", "T1", "<t_pi(v1), t_pi(v2)>", "Torus"),
        eu("4.1-3b", "T1", "<t_w>", "Cylinder"),
        eu("4.1-4a", "K1", "<t_pi(v1), (S_v2, t_v2)>", "KleinBottle"),
        eu("4.1-4b", "K1", "<(S_v2, t_v2)>", "MoebiusBand"),
        eu("4.1-4c", "K1", "<t_pi(v1), R_pi>", "D²(2,2)"),
        eu("4.1-5a", "G1", "<t_w1, t_w2>", "Torus"),
        eu("4.1-6a", "G2", "<(S_v1, t_v1/2), t_w>", "KleinBottle"),
        eu("4.1-6b", "G2", "<R_pi, t_v2, t_v3>", "S²(2,2,2,2)"),
        eu("4.1-7a", "G3", "<R_2pi/3, t_v2, t_v3>", "S²(3,3,3)"),
        eu("4.1-8a", "G4", "<R_pi/2, t_v2, t_v3>", "S²(2,4,4)"),
        eu("4.1-9a", "G5", "<R_pi/3, t_v2, t_v3>", "S²(2,3,6)"),
        eu("4.1-10a", "G6", "<R_pi, (S_v2, .), (S_v3, .), t_v2, t_v3>", "P²(2,2)"),
        eu("4.1-10b", "G6", "<(S_v1, t_v1/2), (R_pi, t_v3/2), (S_v3, .), t_v1, t_v3>", "P²(2,2)"),
        eu("4.1-10c", "G6", "<(S_v1, t_v1/2), (S_v2, t_v2/2), (R_pi, .), t_v1, t_v2>", "P²(2,2)"),
        sp("4.3-lens", "lens", H1::Cyclic(5), H2::Cyclic(3), "Z3", "S²(3,3)"),
        sp("4.3-prism", "prism", H1::Cyclic(5), H2::Dihedral(3), "D3", "S²(2,2,3)"),
        sp("4.3-prism-P2", "prism", H1::Dihedral(3), H2::Cyclic(5), "Z5 x {±I}", "P²(5)"),
        sp("4.3-T", "tetrahedral", H1::Cyclic(5), H2::Tetrahedral, "T", "S²(2,3,3)"),
        sp("4.3-O", "octahedral", H1::Cyclic(5), H2::Octahedral, "O", "S²(2,3,4)"),
        sp("4.3-I", "icosahedral", H1::Cyclic(7), H2::Icosahedral, "I", "S²(2,3,5)"),
        neg("neg-glide", "glide along e3", "<S>", Failure::B1),
        neg("neg-irrational", "screw through an irrational angle", "<R_theta>, theta/2pi irrational", Failure::B2),
        neg("neg-tilted", "screw about a tilted axis", "none", Failure::A),
    ]
}

pub fn find_case(id: &str) -> Option<CatalogCase> {
    all_cases().into_iter().find(|c| c.id == id)
}

/// The group of a Euclidean case. Every constraint of the family and of the
/// sub-case is checked on the supplied or default parameters.
pub fn build_euclidean_case(id: &str, params: &EuclideanParams) -> Result<BuiltCase, CatalogError> {
    let ck = Checker { case: id };
    let sc = params.scale.unwrap_or(q(1));
    ck.require(!sc.is_zero(), "scale ≠ 0")?;
    let pick = |v: Option<Vec3Q>, d: Vec3Q| scale(sc, &v.unwrap_or(d));
    let mut notes = Vec::new();
    let gens: Vec<EuclIsometry> = match id {
        "4.1-1a" => return Ok(BuiltCase { spec: GroupSpec::trivial(Ambient::Euclidean3, id), notes }),
        "4.1-2a" | "4.1-2b" | "4.1-2c" | "4.1-2d" | "4.1-2e" => {
            let (dv, dt) = match id {
                "4.1-2a" => (e3(), Angle::zero()),
                "4.1-2b" => (e3(), Angle::half_turn()),
                "4.1-2c" => (e3(), Angle::turns(1, 3)),
                "4.1-2d" => (e1(), Angle::zero()),
                _ => (e1(), Angle::half_turn()),
            };
            let v = pick(params.v1, dv);
            let theta = params.theta.unwrap_or(dt);
            ck.require(!is_zero_vec(&v), "v ≠ 0")?;
            match id {
                "4.1-2a" => {
                    ck.require(parallel_e3(&v), "v ∥ e3")?;
                    ck.require(theta.is_zero(), "θ = 0")?;
                }
                "4.1-2b" => {
                    ck.require(parallel_e3(&v), "v ∥ e3")?;
                    ck.require(theta.is_half_turn(), "θ = π")?;
                }
                "4.1-2c" => {
                    ck.require(parallel_e3(&v), "v ∥ e3")?;
                    ck.require(!theta.is_zero() && !theta.is_half_turn(), "θ ≠ 0, π")?;
                    ck.require(theta.order().is_some(), "θ = 2πp/q")?;
                }
                "4.1-2d" => {
                    ck.require(!parallel_e3(&v), "v ∦ e3")?;
                    ck.require(theta.is_zero(), "θ = 0")?;
                }
                _ => {
                    ck.require(horizontal(&v), "v ∈ e3⊥")?;
                    ck.require(theta.is_half_turn(), "θ = π")?;
                }
            }
            vec![screw(v, theta, v)]
        }
        "4.1-3a" | "4.1-3b" => {
            let (a, b) = if id == "4.1-3a" { (e1(), e2()) } else { (e1(), e3()) };
            let (a, b) = (pick(params.v1, a), pick(params.v2, b));
            ck.require(independent(&[a, b]), "v1, v2 linearly independent")?;
            let e3_in_span = det3(&a, &b, &e3()).is_zero();
            if id == "4.1-3a" {
                ck.require(!e3_in_span, "e3 ∉ span{v1, v2}")?;
            } else {
                ck.require(e3_in_span, "e3 ∈ span{v1, v2}")?;
                ck.require(rational_rank(&[proj(&a), proj(&b)]) <= 1, "π(v1), π(v2) rationally related")?;
            }
            vec![t(a), t(b)]
        }
        "4.1-4a" | "4.1-4b" | "4.1-4c" => {
            let (da, db) = match id {
                "4.1-4a" => (e2(), e1()),
                "4.1-4b" => (e3(), e1()),
                _ => (e1(), e3()),
            };
            let (a, b) = (pick(params.v1, da), pick(params.v2, db));
            ck.require(independent(&[a, b]), "v1, v2 linearly independent")?;
            match id {
                "4.1-4a" => {
                    ck.require(!parallel_e3(&a), "v1 ∦ e3")?;
                    ck.require(horizontal(&b), "v2 ∈ e3⊥")?;
                }
                "4.1-4b" => {
                    ck.require(parallel_e3(&a), "v1 ∥ e3")?;
                    ck.require(horizontal(&b), "v2 ∈ e3⊥")?;
                }
                _ => ck.require(parallel_e3(&b), "v2 ∥ e3")?,
            }
            vec![t(a), screw(b, Angle::half_turn(), b)]
        }
        "4.1-5a" => {
            let (a, b, c) = (pick(params.v1, e1()), pick(params.v2, e2()), pick(params.v3, e3()));
            ck.require(independent(&[a, b, c]), "v1, v2, v3 linearly independent")?;
            ck.require(rational_rank(&[proj(&a), proj(&b), proj(&c)]) <= 2, "π(v1), π(v2), π(v3) rationally related")?;
            vec![t(a), t(b), t(c)]
        }
        "4.1-6a" | "4.1-6b" => {
            let d = if id == "4.1-6a" { (e1(), e2(), e3()) } else { (e3(), e1(), e2()) };
            let (a, b, c) = (pick(params.v1, d.0), pick(params.v2, d.1), pick(params.v3, d.2));
            ck.require(independent(&[a, b, c]), "v1, v2, v3 linearly independent")?;
            ck.require(dot(&a, &b).is_zero() && dot(&a, &c).is_zero(), "v1 ⊥ span{v2, v3}")?;
            if id == "4.1-6a" {
                ck.require(horizontal(&a), "v1 ∈ e3⊥")?;
                ck.require(rational_rank(&[proj(&b), proj(&c)]) <= 1, "π(v2), π(v3) rationally related")?;
            } else {
                ck.require(parallel_e3(&a), "v1 ∥ e3")?;
            }
            vec![screw(a, Angle::half_turn(), half(&a, 2)), t(a), t(b), t(c)]
        }
        "4.1-7a" | "4.1-8a" => {
            let hex = id == "4.1-7a";
            let dv3 = if hex { plane_dir(4) } else { e2() };
            let (a, b, c) = (pick(params.v1, e3()), pick(params.v2, e1()), pick(params.v3, dv3));
            ck.require(independent(&[a, b, c]), "v1, v2, v3 linearly independent")?;
            ck.require(dot(&b, &b) == dot(&c, &c), "‖v2‖ = ‖v3‖")?;
            if hex {
                ck.require(dot(&a, &b).is_zero() && dot(&a, &c).is_zero(), "v1 ⊥ span{v2, v3}")?;
                ck.require(dot(&b, &c) == QSqrt3::frac(-1, 2) * dot(&b, &b), "∠(v2, v3) = 2π/3")?;
            } else {
                ck.require(mutually_orthogonal(&a, &b, &c), "v1, v2, v3 mutually orthogonal")?;
            }
            ck.require(parallel_e3(&a), "v1 ∥ e3")?;
            let (turn, k) = if hex { (Angle::turns(1, 3), 3) } else { (Angle::turns(1, 4), 4) };
            vec![screw(a, turn, half(&a, k)), t(a), t(b), t(c)]
        }
        "4.1-9a" => {
            let explicit = params.v3.is_some();
            let printed = build_g5(id, params, Angle::turns(1, 12), plane_dir(1), sc)?;
            if explicit {
                printed
            } else {
                match printed_g5_rejection(id, &printed)? {
                    None => printed,
                    Some(why) => {
                        notes.push(format!(
                            "rotation π/6 with ∠(v2, v3) = π/6 rejected ({why}); using rotation π/3 with ∠(v2, v3) = π/3"
                        ));
                        build_g5(id, params, Angle::turns(1, 6), plane_dir(2), sc)?
                    }
                }
            }
        }
        "4.1-10a" | "4.1-10b" | "4.1-10c" => {
            let d = match id {
                "4.1-10a" => (e3(), e1(), e2()),
                "4.1-10b" => (e1(), e3(), e2()),
                _ => (e1(), e2(), e3()),
            };
            let (a, b, c) = (pick(params.v1, d.0), pick(params.v2, d.1), pick(params.v3, d.2));
            ck.require(independent(&[a, b, c]), "v1, v2, v3 linearly independent")?;
            ck.require(mutually_orthogonal(&a, &b, &c), "v1, v2, v3 mutually orthogonal")?;
            let (which, clause) = match id {
                "4.1-10a" => (&a, "v1 ∥ e3"),
                "4.1-10b" => (&b, "v2 ∥ e3"),
                _ => (&c, "v3 ∥ e3"),
            };
            ck.require(parallel_e3(which), clause)?;
            vec![
                screw(a, Angle::half_turn(), half(&a, 2)),
                screw(b, Angle::half_turn(), half(&add(&b, &c), 2)),
                screw(c, Angle::half_turn(), half(&add(&add(&a, &b), &c), 2)),
                t(a),
                t(b),
                t(c),
            ]
        }
        other => {
            return Err(if find_case(other).is_some() {
                CatalogError::Constraint { case: other.into(), clause: "not a Euclidean case".into() }
            } else {
                CatalogError::UnknownCase(other.into())
            })
        }
    };
    Ok(BuiltCase { spec: GroupSpec::euclidean(id, gens)?, notes })
}

/// Why the printed G5 group is not admissible, if it is not.
fn printed_g5_rejection(id: &str, gens: &[EuclIsometry]) -> Result<Option<String>, CatalogError> {
    let budget = EnumerationBudget::default();
    let spec = GroupSpec::euclidean(id, gens.to_vec())?;
    let verdicts = group::acts_freely(&spec, &budget).and_then(|f| Ok((f, group::is_discrete(&spec, &budget)?)));
    Ok(match verdicts {
        Ok((f, _)) if !f.holds => Some(format!("not free: {}", f.witness.unwrap_or_default())),
        Ok((_, d)) if !d.holds => Some(format!("not discrete: {}", d.witness.unwrap_or_default())),
        Ok(_) => None,
        // translations accumulate in the ball
        Err(GroupError::MaxElementsExceeded(n)) => Some(format!("more than {n} elements in the ball, not discrete")),
        Err(e) => return Err(e.into()),
    })
}

/// `⟨(R_α(v₁), t_{v₁/6}), t_{v₁}, t_{v₂}, t_{v₃}⟩` with `∠(v₂, v₃)` checked against `α`.
fn build_g5(
    id: &str,
    params: &EuclideanParams,
    alpha: Angle,
    default_v3: Vec3Q,
    sc: QSqrt3,
) -> Result<Vec<EuclIsometry>, CatalogError> {
    let ck = Checker { case: id };
    let pick = |v: Option<Vec3Q>, d: Vec3Q| scale(sc, &v.unwrap_or(d));
    let (a, b, c) = (pick(params.v1, e3()), pick(params.v2, e1()), pick(params.v3, default_v3));
    ck.require(independent(&[a, b, c]), "v1, v2, v3 linearly independent")?;
    ck.require(dot(&a, &b).is_zero() && dot(&a, &c).is_zero(), "v1 ⊥ span{v2, v3}")?;
    ck.require(dot(&b, &b) == dot(&c, &c), "‖v2‖ = ‖v3‖")?;
    let (cos, _) = alpha.exact_cos_sin().expect("twelfth turns are exact");
    ck.require(dot(&b, &c) == cos * dot(&b, &b), &format!("∠(v2, v3) = {}", alpha))?;
    ck.require(parallel_e3(&a), "v1 ∥ e3")?;
    Ok(vec![screw(a, alpha, half(&a, 6)), t(a), t(b), t(c)])
}

/// The group of a spherical row, lifted through `φ`.
pub fn build_spherical_case(h1: H1, h2: H2, extra: &SphericalExtra) -> Result<GroupSpec, CatalogError> {
    use std::f64::consts::PI;
    let one = Quaternion::one();
    let label = format!("S3/({h1}, {h2})");
    let cyclic = |p: u32| Quaternion::exp_i(2.0 * PI / p as f64);
    let gens: Vec<(Quaternion, Quaternion)> = match (h1, h2) {
        (H1::Cyclic(p), H2::Cyclic(qq)) => {
            let (a, b) = extra.lens_exponents;
            vec![(
                Quaternion::exp_i(2.0 * PI * a as f64 / p as f64),
                Quaternion::exp_i(2.0 * PI * b as f64 / qq as f64),
            )]
        }
        (H1::Cyclic(p), H2::Dihedral(m)) => vec![
            (Quaternion::exp_i(PI / p as f64), one),
            (one, Quaternion::exp_i(PI / m as f64)),
            (one, Quaternion::j()),
        ],
        (H1::Dihedral(m), H2::Cyclic(qq)) => vec![
            (Quaternion::exp_i(PI / m as f64), one),
            (Quaternion::j(), one),
            (one, Quaternion::exp_i(PI / qq as f64)),
        ],
        (H1::Cyclic(p), poly) => {
            let b = match poly {
                H2::Tetrahedral => binary_tetrahedral(),
                H2::Octahedral => binary_octahedral(),
                _ => binary_icosahedral(),
            };
            std::iter::once((cyclic(p), one)).chain(b.into_iter().map(|x| (one, x))).collect()
        }
        (h1, h2) => return Err(CatalogError::NotInTable(h1, h2)),
    };
    if let Some(bad) = [h1_order(h1), h2_order(h2)].into_iter().flatten().find(|n| *n == 0) {
        return Err(CatalogError::Constraint { case: label, clause: format!("order {bad} must be positive") });
    }
    let els = gens.into_iter().map(|(a, b)| phi_cover(a, b)).collect::<Result<Vec<SO4Element>, _>>()?;
    Ok(GroupSpec::sphere(label, els)?)
}

fn h1_order(h: H1) -> Option<u32> {
    match h {
        H1::Cyclic(n) | H1::Dihedral(n) => Some(n),
    }
}

fn h2_order(h: H2) -> Option<u32> {
    match h {
        H2::Cyclic(n) | H2::Dihedral(n) => Some(n),
        _ => None,
    }
}

fn build_negative(id: &str) -> Result<GroupSpec, CatalogError> {
    let g = match id {
        "neg-glide" => crate::euclid::glide(e1(), e3()),
        "neg-irrational" => {
            let theta = 2.0 * std::f64::consts::PI * ((1.0 + 5f64.sqrt()) / 2.0).fract();
            screw(e3(), Angle::radians(theta), e3())
        }
        "neg-tilted" => {
            // axis (0, 1, √3) makes the angle π/3 with e3
            let axis = [q(0), q(1), QSqrt3::sqrt3_times(num_rational::Rational64::from_integer(1))];
            screw(axis, Angle::turns(1, 4), axis)
        }
        other => return Err(CatalogError::UnknownCase(other.into())),
    };
    Ok(GroupSpec::euclidean(id, vec![g])?)
}

/// Builds the group of a catalog case.
pub fn build_case(case: &CatalogCase) -> Result<BuiltCase, CatalogError> {
    match &case.builder {
        Builder::Euclidean(p) => build_euclidean_case(case.id, p),
        Builder::Spherical { h1, h2, extra } => {
            let mut spec = build_spherical_case(*h1, *h2, extra)?;
            spec.label = case.id.to_string();
            Ok(BuiltCase { spec, notes: Vec::new() })
        }
        Builder::Negative => Ok(BuiltCase { spec: build_negative(case.id)?, notes: Vec::new() }),
    }
}

/// Conjugate by the homothety `x ↦ kx`: `(A, b) ↦ (A, kb)`.
pub fn scale_spec(spec: &GroupSpec, k: QSqrt3) -> Option<GroupSpec> {
    let group::Generators::Euclidean(gens) = &spec.generators else { return None };
    let gens = gens
        .iter()
        .map(|g| match &g.motion {
            Motion::Exact(a) => {
                Isometry::exact(Affine { linear: a.linear, translation: scale(k, &a.translation) }, g.provenance)
            }
            Motion::Float(a) => {
                let kf = k.to_f64();
                Isometry::float(Affine { linear: a.linear, translation: a.translation.map(|x| kf * x) }, g.provenance)
            }
        })
        .collect();
    Some(GroupSpec { label: spec.label.clone(), generators: group::Generators::Euclidean(gens), trivial: spec.trivial })
}

/// Budgets, seed and sample counts for a catalog run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CatalogOptions {
    pub euclidean_budget: EnumerationBudget,
    pub sphere_budget: EnumerationBudget,
    pub seed: u64,
    pub residual_samples: usize,
    pub structural_pairs: usize,
}

impl Default for CatalogOptions {
    fn default() -> Self {
        Self {
            euclidean_budget: EnumerationBudget::default(),
            sphere_budget: EnumerationBudget::sphere_default(),
            seed: 0,
            residual_samples: RESIDUAL_SAMPLES,
            structural_pairs: STRUCTURAL_PAIRS,
        }
    }
}

/// Numerical spot checks for one case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    /// Standard morphism checked.
    pub map: String,
    pub samples: usize,
    pub max_dilation_error: f64,
    pub max_conformality_defect: f64,
    pub max_harmonicity_residual: f64,
    pub max_geodesic_defect: f64,
    /// Pairs `(g, x)` behind the two structural defects.
    pub pairs: usize,
    /// `max |π(g x) − g′ π(x)|`
    pub equivariance_defect: Option<f64>,
    /// `max |(gh)′ − g′ h′|`
    pub homomorphism_defect: Option<f64>,
    /// `max |φ(g x) − φ(x)|` for the rational screw family.
    pub quotient_invariance_defect: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdicts {
    pub free: bool,
    pub discrete: bool,
    pub a: bool,
    pub b1: Option<bool>,
    pub b2: Option<bool>,
    pub failure: Option<&'static str>,
}

/// One row of the catalog report.
#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub case: String,
    pub family: String,
    pub expected: String,
    pub expected_leaf_group: String,
    pub matched: bool,
    pub verdicts: Option<Verdicts>,
    pub orbifold: Option<Orbifold2>,
    pub leaf_generators: Vec<String>,
    pub residuals: Option<Residuals>,
    pub notes: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogReport {
    pub seed: u64,
    pub options: CatalogOptions,
    pub cases: Vec<CaseResult>,
    pub matched: usize,
    pub mismatched: usize,
}

impl CatalogReport {
    pub fn all_matched(&self) -> bool {
        self.mismatched == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for CatalogReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "catalog (seed {}): {} matched, {} mismatched", self.seed, self.matched, self.mismatched)?;
        for c in &self.cases {
            let got = match (&c.orbifold, &c.verdicts, &c.error) {
                (_, _, Some(e)) => format!("error: {e}"),
                (Some(o), _, _) => o.to_string(),
                (None, Some(v), _) => format!("reject ({})", v.failure.unwrap_or("?")),
                (None, None, None) => "-".into(),
            };
            let mark = if c.matched { "ok" } else { "MISMATCH" };
            writeln!(f, "{:<16} {:<8} expected {:<14} got {:<14} {mark}", c.case, c.family, c.expected, got)?;
            for n in &c.notes {
                writeln!(f, "    note: {n}")?;
            }
            if let Some(r) = &c.residuals {
                write!(
                    f,
                    "    {}: dilation err {:.1e}, conformality {:.1e}, harmonicity {:.1e}, geodesic {:.1e}",
                    r.map,
                    r.max_dilation_error,
                    r.max_conformality_defect,
                    r.max_harmonicity_residual,
                    r.max_geodesic_defect
                )?;
                if let (Some(e), Some(h)) = (r.equivariance_defect, r.homomorphism_defect) {
                    write!(f, "; equivariance {e:.1e}, homomorphism {h:.1e} over {} pairs", r.pairs)?;
                }
                if let Some(qd) = r.quotient_invariance_defect {
                    write!(f, "; quotient invariance {qd:.1e}")?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// Whether `id` matches a glob with `*` and `?` wildcards.
pub fn id_matches(pattern: &str, id: &str) -> bool {
    glob::Pattern::new(pattern).map(|p| p.matches(id)).unwrap_or(false)
}

/// Runs the pipeline and the spot checks on every case matching `filter`.
/// Cases run in parallel; results are sorted by catalog order.
pub fn run_catalog(opts: &CatalogOptions, filter: Option<&str>) -> CatalogReport {
    let cases: Vec<(usize, CatalogCase)> =
        all_cases().into_iter().enumerate().filter(|(_, c)| filter.is_none_or(|p| id_matches(p, c.id))).collect();
    let mut results: Vec<(usize, CaseResult)> = cases.into_par_iter().map(|(i, c)| (i, run_case(&c, opts))).collect();
    results.sort_by_key(|(i, _)| *i);
    let cases: Vec<CaseResult> = results.into_iter().map(|(_, r)| r).collect();
    let matched = cases.iter().filter(|c| c.matched).count();
    CatalogReport { seed: opts.seed, options: *opts, mismatched: cases.len() - matched, matched, cases }
}

/// Pipeline, comparison and spot checks for one case.
pub fn run_case(case: &CatalogCase, opts: &CatalogOptions) -> CaseResult {
    let mut out = CaseResult {
        case: case.id.to_string(),
        family: case.family.to_string(),
        expected: case.expected.to_string(),
        expected_leaf_group: case.expected_leaf_group.to_string(),
        matched: false,
        verdicts: None,
        orbifold: None,
        leaf_generators: Vec::new(),
        residuals: None,
        notes: Vec::new(),
        error: None,
    };
    let built = match build_case(case) {
        Ok(b) => b,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.notes = built.notes;
    let budget = match built.spec.ambient() {
        Ambient::Euclidean3 => opts.euclidean_budget,
        Ambient::Sphere3 => opts.sphere_budget,
    };
    let report = match pipeline(&built.spec, &budget) {
        Ok(r) => r,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.matched = match &case.expected {
        Expected::Accept(o) => report.orbifold.as_ref() == Some(o),
        Expected::Reject(f) => report.failure == Some(*f),
    };
    out.verdicts = Some(Verdicts {
        free: report.free.holds,
        discrete: report.discrete.holds,
        a: report.a.holds,
        b1: report.b1.as_ref().map(|v| v.holds),
        b2: report.b2.as_ref().map(|v| v.holds),
        failure: report.failure.map(|f| f.name()),
    });
    if let (Some(f), Some(d)) = (report.failure, &report.detail) {
        out.notes.push(format!("{f}: {d}"));
    }
    out.orbifold = report.orbifold.clone();
    out.leaf_generators = report.leaf_generators.clone();
    out.residuals = Some(spot_checks(&built.spec, report.a.holds, opts, &budget));
    out
}

fn pipeline(spec: &GroupSpec, budget: &EnumerationBudget) -> Result<VerificationReport, CatalogError> {
    Ok(run_pipeline(spec, budget)?)
}

fn seed_for(opts: &CatalogOptions, label: &str) -> u64 {
    label.bytes().fold(opts.seed ^ 0x9e37_79b9_7f4a_7c15, |h, b| h.rotate_left(5) ^ b as u64)
}

/// Residuals of the standard morphism plus the structural checks.
pub fn spot_checks(spec: &GroupSpec, preserves: bool, opts: &CatalogOptions, budget: &EnumerationBudget) -> Residuals {
    let seed = seed_for(opts, &spec.label);
    let map = match spec.ambient() {
        Ambient::Euclidean3 => ChartedMap::pi1(),
        Ambient::Sphere3 => ChartedMap::hopf(),
    };
    let pts = sample_points(&map, opts.residual_samples, seed);
    let mut res = Residuals {
        map: map.name(),
        samples: pts.len(),
        max_dilation_error: 0.0,
        max_conformality_defect: 0.0,
        max_harmonicity_residual: 0.0,
        max_geodesic_defect: 0.0,
        pairs: 0,
        equivariance_defect: None,
        homomorphism_defect: None,
        quotient_invariance_defect: None,
    };
    for r in batch_residuals(&map, &pts).into_iter().flatten() {
        let err = r.expected_lambda.map_or(0.0, |e| (r.lambda - e).abs());
        res.max_dilation_error = res.max_dilation_error.max(err);
        res.max_conformality_defect = res.max_conformality_defect.max(r.conformality_defect);
        res.max_harmonicity_residual = res.max_harmonicity_residual.max(r.harmonicity_residual);
        res.max_geodesic_defect = res.max_geodesic_defect.max(r.geodesic_defect);
    }
    if !preserves || spec.trivial {
        return res;
    }
    let Ok(en) = group::enumerate(spec, budget) else { return res };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = opts.structural_pairs;
    res.pairs = n;
    match &en {
        GroupEnumeration::Euclidean(en) => {
            let (eq, hom) = euclidean_structure(&en.elements, n, &mut rng);
            res.equivariance_defect = Some(eq);
            res.homomorphism_defect = Some(hom);
            if eval_quotient_hm(spec, [0.5, 0.5, 0.0]).is_ok() {
                let mut worst: f64 = 0.0;
                for _ in 0..n {
                    let g = &en.elements[rng.gen_range(0..en.elements.len())];
                    let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
                    let a = eval_quotient_hm(spec, g.apply_f64(&x)).expect("screw family");
                    let b = eval_quotient_hm(spec, x).expect("screw family");
                    worst = worst.max((a - b).norm() / (1.0 + b.norm()));
                }
                res.quotient_invariance_defect = Some(worst);
            }
        }
        GroupEnumeration::Sphere(en) => {
            let (eq, hom) = sphere_structure(&en.elements, n, &mut rng);
            res.equivariance_defect = Some(eq);
            res.homomorphism_defect = Some(hom);
        }
    }
    res
}

fn euclidean_structure(els: &[EuclIsometry], n: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (mut eq, mut hom): (f64, f64) = (0.0, 0.0);
    for _ in 0..n {
        let g = &els[rng.gen_range(0..els.len())];
        let h = &els[rng.gen_range(0..els.len())];
        let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
        let (Some(lg), Some(lh), Some(lgh)) =
            (leaf_of_euclidean(g), leaf_of_euclidean(h), leaf_of_euclidean(&g.compose(h)))
        else {
            return (f64::INFINITY, f64::INFINITY);
        };
        let a = project_f1(g.apply_f64(&x));
        let b = lg.apply_f64(&project_f1(x));
        eq = eq.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        let y = project_f1(x);
        let c = lgh.apply_f64(&y);
        let d = lg.apply_f64(&lh.apply_f64(&y));
        hom = hom.max(((c[0] - d[0]).powi(2) + (c[1] - d[1]).powi(2)).sqrt());
    }
    (eq, hom)
}

fn sphere_structure(els: &[SO4Element], n: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (mut eq, mut hom): (f64, f64) = (0.0, 0.0);
    for _ in 0..n {
        let g = &els[rng.gen_range(0..els.len())];
        let h = &els[rng.gen_range(0..els.len())];
        let x = Quaternion::from_array(std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).normalized();
        let (Some(lg), Some(lh), Some(lgh)) = (leaf_of_so4(g), leaf_of_so4(h), leaf_of_so4(&g.compose(h))) else {
            return (f64::INFINITY, f64::INFINITY);
        };
        let a = Vector3::from(project_f2(g.apply(x)));
        let b = lg * Vector3::from(project_f2(x));
        eq = eq.max((a - b).norm());
        let m: Matrix3<f64> = lgh - lg * lh;
        hom = hom.max(m.norm());
    }
    (eq, hom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orb(s: &str) -> Orbifold2 {
        s.parse().unwrap()
    }

    #[test]
    fn case_ids_are_unique_and_complete() {
        let cases = all_cases();
        let mut ids: Vec<&str> = cases.iter().map(|c| c.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), cases.len());
        assert_eq!(cases.iter().filter(|c| c.id.starts_with("4.1-")).count(), 20);
        assert_eq!(cases.iter().filter(|c| c.id.starts_with("4.3-")).count(), 6);
        assert_eq!(cases.iter().filter(|c| c.id.starts_with("neg-")).count(), 3);
    }

    #[test]
    fn screw_case_matches_its_description() {
        let b = build_euclidean_case("4.1-2c", &EuclideanParams::default()).unwrap();
        let group::Generators::Euclidean(g) = &b.spec.generators else { panic!() };
        assert_eq!(g[0].key(), screw(e3(), Angle::turns(1, 3), e3()).key());
    }

    #[test]
    fn constraint_violations_name_the_clause() {
        let p = EuclideanParams { v1: Some(e1()), ..Default::default() };
        let err = build_euclidean_case("4.1-2c", &p).unwrap_err();
        assert_eq!(err, CatalogError::Constraint { case: "4.1-2c".into(), clause: "v ∥ e3".into() });
        let p = EuclideanParams { v3: Some(v3(0, 2, 0)), ..Default::default() };
        let err = build_euclidean_case("4.1-8a", &p).unwrap_err().to_string();
        assert!(err.contains("‖v2‖ = ‖v3‖"), "{err}");
        let p = EuclideanParams { v2: Some(v3(1, 0, 0)), v1: Some(v3(2, 0, 0)), ..Default::default() };
        assert!(build_euclidean_case("4.1-3a", &p).unwrap_err().to_string().contains("linearly independent"));
        assert!(matches!(build_euclidean_case("4.1-99", &p), Err(CatalogError::UnknownCase(_))));
    }

    #[test]
    fn spherical_table_rejects_pairs_outside_it() {
        let e = build_spherical_case(H1::Dihedral(3), H2::Icosahedral, &SphericalExtra::default()).unwrap_err();
        assert!(matches!(e, CatalogError::NotInTable(..)));
    }

    #[test]
    fn printed_g5_parameters_fail_freeness_and_fall_back() {
        let b = build_euclidean_case("4.1-9a", &EuclideanParams::default()).unwrap();
        assert_eq!(b.notes.len(), 1);
        let printed = EuclideanParams { v3: Some(plane_dir(1)), ..Default::default() };
        let spec = build_euclidean_case("4.1-9a", &printed).unwrap().spec;
        let group::Generators::Euclidean(g) = &spec.generators else { panic!() };
        assert!(printed_g5_rejection("4.1-9a", g).unwrap().is_some());
    }

    #[test]
    fn each_family_reproduces_its_orbifold() {
        let opts = CatalogOptions { residual_samples: 2, structural_pairs: 50, ..Default::default() };
        for c in all_cases().iter().filter(|c| c.id.starts_with("4.1-")) {
            let r = run_case(c, &opts);
            assert!(r.matched, "{}: {:?} {:?} {:?}", c.id, r.orbifold, r.error, r.notes);
        }
    }

    #[test]
    fn negative_controls_reject_for_the_stated_reason() {
        let opts = CatalogOptions { residual_samples: 2, structural_pairs: 50, ..Default::default() };
        let rep = run_catalog(&opts, Some("neg-*"));
        assert_eq!(rep.cases.len(), 3);
        let reasons: Vec<_> = rep.cases.iter().map(|c| c.verdicts.as_ref().unwrap().failure.unwrap()).collect();
        assert_eq!(reasons, vec!["b1", "b2", "a"]);
        assert!(rep.all_matched());
    }

    #[test]
    fn spherical_rows() {
        let opts = CatalogOptions { residual_samples: 2, structural_pairs: 50, ..Default::default() };
        let rep = run_catalog(&opts, Some("4.3-*"));
        assert_eq!(rep.cases.len(), 6);
        for c in &rep.cases {
            assert!(c.matched, "{}: {:?} {:?}", c.case, c.orbifold, c.error);
            let r = c.residuals.as_ref().unwrap();
            assert!(r.equivariance_defect.unwrap() < 1e-9 && r.homomorphism_defect.unwrap() < 1e-9);
        }
    }

    #[test]
    fn homothety_preserves_the_orbifold() {
        let b = EnumerationBudget::default();
        for id in ["4.1-2c", "4.1-6b", "4.1-7a"] {
            let spec = build_euclidean_case(id, &EuclideanParams::default()).unwrap().spec;
            let base = run_pipeline(&spec, &b).unwrap().orbifold;
            let scaled = scale_spec(&spec, QSqrt3::frac(3, 2)).unwrap();
            assert_eq!(run_pipeline(&scaled, &b).unwrap().orbifold, base, "{id}");
        }
        let p = EuclideanParams { scale: Some(QSqrt3::frac(1, 2)), ..Default::default() };
        let spec = build_euclidean_case("4.1-8a", &p).unwrap().spec;
        assert_eq!(run_pipeline(&spec, &b).unwrap().orbifold, Some(orb("S²(2,4,4)")));
    }

    #[test]
    fn filter_globs() {
        assert!(id_matches("4.1-*", "4.1-10c"));
        assert!(!id_matches("4.1-*", "4.3-I"));
        assert!(id_matches("neg-?ilted", "neg-tilted"));
    }
}

//! Quotients of the standard foliations: condition (a), the induced leaf
//! group, conditions (b1) and (b2), and the leaf orbifold.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::euclid::{Affine, EuclIsometry, Isometry, Motion, PlaneIsometry};
use crate::exact::{QSqrt3, Scalar};
use crate::group::{
    self, enumerate_in_ball, find_nondiscreteness, Ambient, Enumeration, EnumerationBudget, Generators, GroupError,
    GroupSpec, Verdict,
};
use crate::quat::{
    classify_so3_subgroup, hopf_leaf, matrix_group_closure, p_homomorphism, rotation_axis, CirclePosition, Quaternion,
    SO3Subgroup, SO4Element, So3Class,
};

/// Tolerance for point comparisons in the leaf space.
const LEAF_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("foliation {0} does not live on {1}")]
    AmbientMismatch(StandardFoliation, Ambient),
    #[error("condition (a) does not hold: {0}")]
    ConditionA(String),
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("leaf group contains a reflection: {0}")]
    Reflector(String),
    #[error("unclassified within budget: {0}")]
    Unclassified(String),
}

/// `F1`: vertical lines of `R³`, leaf map `π₁(x) = (x₁, x₂)`.
/// `F2`: Hopf circles of `S³`, leaf map `x ↦ x̄ i x ∈ S²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StandardFoliation {
    F1,
    F2,
}

impl StandardFoliation {
    pub fn for_ambient(a: Ambient) -> Self {
        match a {
            Ambient::Euclidean3 => StandardFoliation::F1,
            Ambient::Sphere3 => StandardFoliation::F2,
        }
    }

    pub fn ambient(&self) -> Ambient {
        match self {
            StandardFoliation::F1 => Ambient::Euclidean3,
            StandardFoliation::F2 => Ambient::Sphere3,
        }
    }
}

impl fmt::Display for StandardFoliation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StandardFoliation::F1 => "F1",
            StandardFoliation::F2 => "F2",
        })
    }
}

/// `π₁`
pub fn project_f1(x: [f64; 3]) -> [f64; 2] {
    [x[0], x[1]]
}

/// Leaf of `F2` through a unit quaternion.
pub fn project_f2(x: Quaternion) -> [f64; 3] {
    hopf_leaf(x)
}

/// Induced action of a Euclidean isometry on the leaf plane, if it maps
/// vertical lines to vertical lines: `(A, b) ↦ (A|e₃⊥, π(b))`.
pub fn leaf_of_euclidean(g: &EuclIsometry) -> Option<PlaneIsometry> {
    match &g.motion {
        Motion::Exact(a) => {
            if !(a.linear[0][2].is_zero() && a.linear[1][2].is_zero()) {
                return None;
            }
            let linear = [[a.linear[0][0], a.linear[0][1]], [a.linear[1][0], a.linear[1][1]]];
            let translation = [a.translation[0], a.translation[1]];
            Some(Isometry::exact(Affine::<QSqrt3, 2> { linear, translation }, None))
        }
        Motion::Float(a) => {
            if a.linear[0][2].abs() > 1e-9 || a.linear[1][2].abs() > 1e-9 {
                return None;
            }
            let mut linear = [[a.linear[0][0], a.linear[0][1]], [a.linear[1][0], a.linear[1][1]]];
            // re-orthonormalize away the rounding in the discarded column
            let c0 = Vector2::new(linear[0][0], linear[1][0]).normalize();
            let c1 = Vector2::new(linear[0][1], linear[1][1]);
            let c1 = (c1 - c0 * c0.dot(&c1)).normalize();
            linear = [[c0.x, c1.x], [c0.y, c1.y]];
            Some(Isometry::float(Affine { linear, translation: [a.translation[0], a.translation[1]] }, None))
        }
    }
}

/// Induced action `ε(q₁)·ψ(q₂)` on the leaf sphere, if `q₁` normalizes the Hopf circle.
pub fn leaf_of_so4(g: &SO4Element) -> Option<Matrix3<f64>> {
    let eps = match g.circle_position() {
        CirclePosition::Circle => 1.0,
        CirclePosition::CircleTimesJ => -1.0,
        CirclePosition::Off => return None,
    };
    Some(p_homomorphism(g).1 * eps)
}

/// Leaf group `Γ'` with the index of the generator of `Γ` behind each of its generators.
#[derive(Debug, Clone)]
pub enum LeafGroup {
    Plane { generators: Vec<PlaneIsometry>, derivation: Vec<usize> },
    Sphere { generators: Vec<Matrix3<f64>>, derivation: Vec<usize> },
}

impl LeafGroup {
    pub fn describe_generators(&self) -> Vec<String> {
        match self {
            LeafGroup::Plane { generators, derivation } => generators
                .iter()
                .zip(derivation)
                .map(|(g, d)| format!("{} (from g{})", describe_plane(g), d + 1))
                .collect(),
            LeafGroup::Sphere { generators, derivation } => generators
                .iter()
                .zip(derivation)
                .map(|(m, d)| format!("{} (from g{})", describe_o3(m), d + 1))
                .collect(),
        }
    }
}

fn describe_plane(g: &PlaneIsometry) -> String {
    let t = g.translation_part_f64();
    let tr = format!("({:.4}, {:.4})", t[0], t[1]);
    if g.is_identity() {
        return "e".into();
    }
    if g.is_translation() {
        return format!("t{tr}");
    }
    if g.is_orientation_preserving() {
        let l = g.linear_f64();
        let angle = l[1][0].atan2(l[0][0]);
        let c = g.a_fixed_point().unwrap_or([f64::NAN; 2]);
        return format!("R[{:.4} rad] about ({:.4}, {:.4})", angle, c[0], c[1]);
    }
    if g.fixed_points().is_empty() {
        format!("glide (S, {tr})")
    } else {
        format!("reflection (S, {tr})")
    }
}

fn describe_o3(m: &Matrix3<f64>) -> String {
    let det = m.determinant();
    let r = m * det.signum();
    let angle = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    let sign = if det < 0.0 { "-" } else { "" };
    if angle < 1e-9 {
        return format!("{sign}I");
    }
    let a = rotation_axis(&r);
    format!("{sign}R[{:.4} rad] about ({:.4}, {:.4}, {:.4})", angle, a.x, a.y, a.z)
}

/// Condition (a): every generator maps leaves to leaves.
pub fn preserves_foliation(spec: &GroupSpec, fol: StandardFoliation) -> Result<Verdict, PipelineError> {
    if spec.ambient() != fol.ambient() {
        return Err(PipelineError::AmbientMismatch(fol, spec.ambient()));
    }
    let witness = match &spec.generators {
        Generators::Euclidean(gens) => gens.iter().enumerate().find(|(_, g)| leaf_of_euclidean(g).is_none()).map(|(i, g)| {
            let l = g.linear_f64();
            format!(
                "g{} = {g} maps the leaf through the origin to a line with direction ({:.4}, {:.4}, {:.4}), not vertical",
                i + 1,
                l[0][2],
                l[1][2],
                l[2][2]
            )
        }),
        Generators::Sphere(gens) => gens.iter().enumerate().find(|(_, g)| leaf_of_so4(g).is_none()).map(|(i, g)| {
            format!(
                "g{} = {g}: q1 does not normalize the Hopf circle, so the fibre through 1 maps to a circle that is not a fibre",
                i + 1
            )
        }),
    };
    Ok(Verdict {
        holds: witness.is_none(),
        witness,
        examined: spec.num_generators(),
        complete: true,
        budget: EnumerationBudget::default(),
    })
}

/// `Γ'` generated by the leaf actions of the generators of `Γ`.
pub fn induce_leaf_action(spec: &GroupSpec, fol: StandardFoliation) -> Result<LeafGroup, PipelineError> {
    let a = preserves_foliation(spec, fol)?;
    if !a.holds {
        return Err(PipelineError::ConditionA(a.witness.unwrap_or_default()));
    }
    Ok(match &spec.generators {
        Generators::Euclidean(gens) => LeafGroup::Plane {
            generators: gens.iter().map(|g| leaf_of_euclidean(g).expect("checked by (a)")).collect(),
            derivation: (0..gens.len()).collect(),
        },
        Generators::Sphere(gens) => LeafGroup::Sphere {
            generators: gens.iter().map(|g| leaf_of_so4(g).expect("checked by (a)")).collect(),
            derivation: (0..gens.len()).collect(),
        },
    })
}

/// Elements of a spherical leaf group (finite by construction).
fn sphere_leaf_elements(gens: &[Matrix3<f64>], budget: &EnumerationBudget) -> Result<Vec<Matrix3<f64>>, String> {
    matrix_group_closure(gens, budget.max_elements).map_err(|e| e.to_string())
}

fn sphere_reflection(elems: &[Matrix3<f64>]) -> Option<Matrix3<f64>> {
    // det −1 with a fixed unit vector: eigenvalues (1, 1, −1)
    elems.iter().find(|m| m.determinant() < 0.0 && (*m - Matrix3::identity()).determinant().abs() < 1e-8).copied()
}

fn plane_budget_verdict(holds: bool, witness: Option<String>, en: &Enumeration<PlaneIsometry>) -> Verdict {
    Verdict { holds, witness, examined: en.len(), complete: en.complete, budget: en.budget }
}

/// Condition (b1): no element of `Γ'` is a reflection.
pub fn check_b1(leaf: &LeafGroup, budget: &EnumerationBudget) -> Result<Verdict, PipelineError> {
    match leaf {
        LeafGroup::Plane { generators, .. } => {
            let en = enumerate_in_ball(generators, budget)?;
            let w = (1..en.len())
                .find(|&i| !en.elements[i].is_orientation_preserving() && !en.elements[i].fixed_points().is_empty())
                .map(|i| {
                    format!("reflection in leaf stabilizer: {} = {}", en.word(i), describe_plane(&en.elements[i]))
                });
            Ok(plane_budget_verdict(w.is_none(), w, &en))
        }
        LeafGroup::Sphere { generators, .. } => {
            let elems = match sphere_leaf_elements(generators, budget) {
                Ok(e) => e,
                Err(e) => return Ok(sphere_verdict(false, Some(e), 0, budget)),
            };
            let w = sphere_reflection(&elems).map(|m| format!("reflection in leaf stabilizer: {}", describe_o3(&m)));
            Ok(sphere_verdict(w.is_none(), w, elems.len(), budget))
        }
    }
}

fn sphere_verdict(holds: bool, witness: Option<String>, n: usize, budget: &EnumerationBudget) -> Verdict {
    Verdict { holds, witness, examined: n, complete: holds, budget: *budget }
}

/// Condition (b2): `Γ'` acts discontinuously (falsifier: near-returns and rank certificates).
pub fn check_b2(leaf: &LeafGroup, budget: &EnumerationBudget) -> Result<Verdict, PipelineError> {
    match leaf {
        LeafGroup::Plane { generators, .. } => {
            let en = enumerate_in_ball(generators, budget)?;
            let w = find_nondiscreteness(generators, &en).map(|w| format!("not discontinuous: {w}"));
            Ok(plane_budget_verdict(w.is_none(), w, &en))
        }
        LeafGroup::Sphere { generators, .. } => Ok(match sphere_leaf_elements(generators, budget) {
            Ok(e) => sphere_verdict(true, None, e.len(), budget),
            Err(e) => sphere_verdict(false, Some(format!("leaf group not finite within budget: {e}")), 0, budget),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Surface {
    Plane,
    Sphere,
    Disc,
    Cylinder,
    Torus,
    MoebiusBand,
    KleinBottle,
    ProjectivePlane,
}

impl Surface {
    /// Euler characteristic of the underlying surface.
    pub fn euler_characteristic(&self) -> i32 {
        match self {
            Surface::Plane | Surface::Disc => 1,
            Surface::Sphere => 2,
            Surface::Cylinder | Surface::Torus | Surface::MoebiusBand | Surface::KleinBottle => 0,
            Surface::ProjectivePlane => 1,
        }
    }
}

/// A 2-orbifold whose only singularities are cone points.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Orbifold2 {
    pub surface: Surface,
    /// Sorted ascending.
    pub cones: Vec<u32>,
}

impl Orbifold2 {
    pub fn new(surface: Surface, mut cones: Vec<u32>) -> Self {
        cones.sort_unstable();
        Self { surface, cones }
    }

    /// `χ(surface) − Σ (1 − 1/q)`.
    pub fn euler_characteristic(&self) -> f64 {
        self.surface.euler_characteristic() as f64 - self.cones.iter().map(|q| 1.0 - 1.0 / *q as f64).sum::<f64>()
    }
}

impl fmt::Display for Orbifold2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.surface {
            Surface::Plane => "Plane",
            Surface::Sphere => "S²",
            Surface::Disc => "D²",
            Surface::Cylinder => "Cylinder",
            Surface::Torus => "Torus",
            Surface::MoebiusBand => "MoebiusBand",
            Surface::KleinBottle => "KleinBottle",
            Surface::ProjectivePlane => "P²",
        };
        f.write_str(name)?;
        if !self.cones.is_empty() {
            let c: Vec<String> = self.cones.iter().map(|q| q.to_string()).collect();
            write!(f, "({})", c.join(","))?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Orbifold2 {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (name, cones) = match s.split_once('(') {
            Some((n, rest)) => {
                let inner = rest.strip_suffix(')').ok_or_else(|| format!("missing ')' in {s:?}"))?;
                let cones = inner
                    .split(',')
                    .map(|c| c.trim().parse::<u32>().map_err(|e| format!("bad cone order {c:?}: {e}")))
                    .collect::<Result<Vec<_>, _>>()?;
                (n, cones)
            }
            None => (s, Vec::new()),
        };
        let surface = match name.trim() {
            "Plane" | "R²" => Surface::Plane,
            "S²" | "S2" | "Sphere" => Surface::Sphere,
            "D²" | "D2" | "Disc" => Surface::Disc,
            "Cylinder" => Surface::Cylinder,
            "Torus" => Surface::Torus,
            "MoebiusBand" => Surface::MoebiusBand,
            "KleinBottle" => Surface::KleinBottle,
            "P²" | "P2" | "ProjectivePlane" => Surface::ProjectivePlane,
            other => return Err(format!("unknown surface {other:?}")),
        };
        Ok(Orbifold2::new(surface, cones))
    }
}

/// Orbifold `E²_i / Γ'`. Requires (b1) and (b2).
pub fn classify_orbifold(leaf: &LeafGroup, budget: &EnumerationBudget) -> Result<Orbifold2, ClassifyError> {
    match leaf {
        LeafGroup::Plane { generators, .. } => classify_plane(generators, budget),
        LeafGroup::Sphere { generators, .. } => classify_sphere(generators, budget).map(|(o, _)| o),
    }
}

/// Translation lattice of a plane group, as a basis of rank 0, 1 or 2.
struct Lattice {
    basis: Vec<Vector2<f64>>,
}

impl Lattice {
    /// Successive minima of the enumerated translations; in the plane they form a basis.
    fn from_translations(ts: &[Vector2<f64>]) -> Self {
        let mut sorted: Vec<Vector2<f64>> = ts.iter().copied().filter(|v| v.norm() > LEAF_TOL).collect();
        sorted.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let mut basis = Vec::new();
        if let Some(v1) = sorted.first().copied() {
            basis.push(v1);
            if let Some(v2) = sorted.iter().find(|v| (v1.perp(v)).abs() > LEAF_TOL * v1.norm() * v.norm()) {
                basis.push(*v2);
            }
        }
        Self { basis }
    }

    fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Coefficients of `d` in the basis plus the residual orthogonal to its span.
    fn coords(&self, d: Vector2<f64>) -> (Vec<f64>, f64) {
        match self.basis.len() {
            0 => (vec![], d.norm()),
            1 => {
                let b = self.basis[0];
                let s = d.dot(&b) / b.norm_squared();
                (vec![s], (d - b * s).norm())
            }
            _ => {
                let m = Matrix2::from_columns(&[self.basis[0], self.basis[1]]);
                let c = m.try_inverse().expect("independent basis") * d;
                (vec![c.x, c.y], 0.0)
            }
        }
    }

    fn contains(&self, d: Vector2<f64>) -> bool {
        let (c, res) = self.coords(d);
        res < LEAF_TOL && c.iter().all(|x| (x - x.round()).abs() < LEAF_TOL)
    }

    /// Representative of `p` modulo the lattice with coefficients in `[0, 1)`.
    fn reduce(&self, p: Vector2<f64>) -> Vector2<f64> {
        let (c, _) = self.coords(p);
        let mut q = p;
        for (x, b) in c.iter().zip(&self.basis) {
            let mut k = x.floor();
            if x - k > 1.0 - LEAF_TOL {
                k += 1.0;
            }
            q -= b * k;
        }
        q
    }
}

struct PlaneMap {
    a: Matrix2<f64>,
    b: Vector2<f64>,
}

impl PlaneMap {
    fn of(g: &PlaneIsometry) -> Self {
        let f = g.to_float();
        Self {
            a: Matrix2::new(f.linear[0][0], f.linear[0][1], f.linear[1][0], f.linear[1][1]),
            b: Vector2::new(f.translation[0], f.translation[1]),
        }
    }

    fn apply(&self, p: Vector2<f64>) -> Vector2<f64> {
        self.a * p + self.b
    }

    fn det(&self) -> f64 {
        self.a.determinant()
    }
}

fn linear_key(a: &Matrix2<f64>) -> [i64; 4] {
    [a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]].map(|x| (x * 1e6).round() as i64)
}

/// Cone points and underlying surface of `R² / Γ'` from the lattice, a set of
/// coset representatives of the point group, and the rotation centres
/// modulo the lattice.
fn classify_plane(gens: &[PlaneIsometry], budget: &EnumerationBudget) -> Result<Orbifold2, ClassifyError> {
    let en = enumerate_in_ball(gens, budget).map_err(|e| ClassifyError::Unclassified(e.to_string()))?;
    if let Some(i) = (1..en.len())
        .find(|&i| !en.elements[i].is_orientation_preserving() && !en.elements[i].fixed_points().is_empty())
    {
        return Err(ClassifyError::Reflector(format!("{} = {}", en.word(i), en.elements[i])));
    }
    let maps: Vec<PlaneMap> = en.elements.iter().map(PlaneMap::of).collect();
    let translations: Vec<Vector2<f64>> =
        maps.iter().filter(|m| (m.a - Matrix2::identity()).norm() < LEAF_TOL).map(|m| m.b).collect();
    let lattice = Lattice::from_translations(&translations);
    let r = lattice.rank();

    // one representative per linear part: the one moving the origin least
    let mut reps: BTreeMap<[i64; 4], usize> = BTreeMap::new();
    for (i, m) in maps.iter().enumerate() {
        let k = linear_key(&m.a);
        match reps.get(&k) {
            Some(&j) if maps[j].b.norm() <= m.b.norm() + 1e-12 => {}
            _ => {
                reps.insert(k, i);
            }
        }
    }
    let reps: Vec<&PlaneMap> = reps.values().map(|&i| &maps[i]).collect();
    let point_group_order = reps.len();
    let reversing = reps.iter().filter(|h| h.det() < 0.0).count();

    // rotation centres c = (I − A)⁻¹(b + λ), λ over a box of lattice vectors
    let box_range: Vec<i64> = (-3..=3).collect();
    let lambdas: Vec<Vector2<f64>> = match r {
        0 => vec![Vector2::zeros()],
        1 => box_range.iter().map(|&n| lattice.basis[0] * n as f64).collect(),
        _ => box_range
            .iter()
            .flat_map(|&n| box_range.iter().map(move |&m| (n, m)))
            .map(|(n, m)| lattice.basis[0] * n as f64 + lattice.basis[1] * m as f64)
            .collect(),
    };
    let mut centres: Vec<Vector2<f64>> = Vec::new();
    for h in reps.iter().filter(|h| h.det() > 0.0 && (h.a - Matrix2::identity()).norm() > LEAF_TOL) {
        let inv = (Matrix2::identity() - h.a).try_inverse().expect("nontrivial rotation");
        for l in &lambdas {
            let c = lattice.reduce(inv * (h.b + l));
            if !centres.iter().any(|d| lattice.contains(c - d)) {
                centres.push(c);
            }
        }
    }
    // cluster centres into orbits; stabilizer order = number of cosets fixing the point
    let mut cones = Vec::new();
    let mut seen: Vec<Vector2<f64>> = Vec::new();
    for c in &centres {
        if seen.iter().any(|s| reps.iter().any(|h| lattice.contains(h.apply(*s) - c))) {
            continue;
        }
        seen.push(*c);
        let stab = reps.iter().filter(|h| lattice.contains(h.apply(*c) - c)).count();
        if stab > 1 {
            cones.push(stab as u32);
        }
    }
    let rotations = centres.len();
    let surface = match (r, reversing > 0, rotations > 0) {
        (0, false, _) => Surface::Plane,
        (1, false, false) => Surface::Cylinder,
        (1, false, true) => Surface::Disc,
        (1, true, false) => Surface::MoebiusBand,
        (2, false, false) => Surface::Torus,
        (2, false, true) => Surface::Sphere,
        (2, true, false) => Surface::KleinBottle,
        (2, true, true) => Surface::ProjectivePlane,
        _ => {
            return Err(ClassifyError::Unclassified(format!(
                "translation rank {r}, point group order {point_group_order}, {reversing} orientation-reversing classes, {rotations} rotation centres"
            )))
        }
    };
    let orb = Orbifold2::new(surface, cones);
    if r == 2 && orb.euler_characteristic().abs() > 1e-9 {
        return Err(ClassifyError::Unclassified(format!(
            "{orb} has orbifold Euler characteristic {:.4}, expected 0 for a compact quotient; lattice detection incomplete",
            orb.euler_characteristic()
        )));
    }
    Ok(orb)
}

/// Orbifold `S² / Γ'` and the type of the rotation subgroup.
pub fn classify_sphere(
    gens: &[Matrix3<f64>],
    budget: &EnumerationBudget,
) -> Result<(Orbifold2, So3Class), ClassifyError> {
    let elems = sphere_leaf_elements(gens, budget).map_err(ClassifyError::Unclassified)?;
    if let Some(m) = sphere_reflection(&elems) {
        return Err(ClassifyError::Reflector(describe_o3(&m)));
    }
    let rotations: Vec<Matrix3<f64>> = elems.iter().filter(|m| m.determinant() > 0.0).copied().collect();
    let class = SO3Subgroup::from_elements(rotations.clone())
        .and_then(|h| classify_so3_subgroup(&h))
        .map_err(|e| ClassifyError::Unclassified(e.to_string()))?;
    let mut poles: Vec<Vector3<f64>> = Vec::new();
    for m in rotations.iter().filter(|m| (*m - Matrix3::identity()).norm() > LEAF_TOL) {
        let a = rotation_axis(m);
        for p in [a, -a] {
            if !poles.iter().any(|q| (q - p).norm() < LEAF_TOL) {
                poles.push(p);
            }
        }
    }
    let mut cones = Vec::new();
    let mut seen: Vec<Vector3<f64>> = Vec::new();
    for p in &poles {
        if seen.iter().any(|s| elems.iter().any(|g| (g * s - p).norm() < LEAF_TOL)) {
            continue;
        }
        seen.push(*p);
        let stab = elems.iter().filter(|g| (*g * p - p).norm() < LEAF_TOL).count();
        if stab > 1 {
            cones.push(stab as u32);
        }
    }
    let surface = if rotations.len() == elems.len() { Surface::Sphere } else { Surface::ProjectivePlane };
    let orb = Orbifold2::new(surface, cones);
    let expected = 2.0 / elems.len() as f64;
    if (orb.euler_characteristic() - expected).abs() > 1e-9 {
        return Err(ClassifyError::Unclassified(format!(
            "{orb} has Euler characteristic {:.4}, expected 2/|Γ'| = {expected:.4}",
            orb.euler_characteristic()
        )));
    }
    Ok((orb, class))
}

/// Condition of the pipeline that failed first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Failure {
    /// `Γ` has a fixed point.
    NotFree,
    /// `Γ` is not discrete.
    NotDiscrete,
    A,
    B1,
    B2,
    Unclassified,
}

impl Failure {
    pub fn name(&self) -> &'static str {
        match self {
            Failure::NotFree => "free",
            Failure::NotDiscrete => "discrete",
            Failure::A => "a",
            Failure::B1 => "b1",
            Failure::B2 => "b2",
            Failure::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub label: String,
    pub ambient: Ambient,
    pub foliation: StandardFoliation,
    pub free: Verdict,
    pub discrete: Verdict,
    pub a: Verdict,
    pub b1: Option<Verdict>,
    pub b2: Option<Verdict>,
    pub leaf_generators: Vec<String>,
    /// Type of the rotation part of `Γ'` for spherical quotients.
    pub leaf_rotation_class: Option<So3Class>,
    pub orbifold: Option<Orbifold2>,
    pub failure: Option<Failure>,
    pub detail: Option<String>,
}

impl VerificationReport {
    pub fn accepted(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "group: {} ({}, foliation {})", self.label, self.ambient, self.foliation)?;
        writeln!(f, "free: {}", self.free)?;
        writeln!(f, "discrete: {}", self.discrete)?;
        writeln!(f, "(a) preserves foliation: {}", self.a)?;
        if let Some(b1) = &self.b1 {
            writeln!(f, "(b1) no reflections: {b1}")?;
        }
        if let Some(b2) = &self.b2 {
            writeln!(f, "(b2) discontinuous: {b2}")?;
        }
        if !self.leaf_generators.is_empty() {
            writeln!(f, "leaf group generators:")?;
            for g in &self.leaf_generators {
                writeln!(f, "  {g}")?;
            }
        }
        if let Some(c) = &self.leaf_rotation_class {
            writeln!(f, "leaf rotation group: {c}")?;
        }
        if let Some(o) = &self.orbifold {
            writeln!(f, "L^M = {o}")?;
        }
        if let Some(fl) = &self.failure {
            let what = match fl {
                Failure::NotFree => "group does not act freely",
                Failure::NotDiscrete => "group is not discrete",
                Failure::A => "a violated: foliation not preserved",
                Failure::B1 => "b1 violated: reflection in leaf stabilizer",
                Failure::B2 => "b2 violated: leaf group not discontinuous",
                Failure::Unclassified => "leaf orbifold unclassified within budget",
            };
            writeln!(f, "FAILED: {what}")?;
        }
        if let Some(d) = &self.detail {
            writeln!(f, "detail: {d}")?;
        }
        Ok(())
    }
}

/// Freeness, discreteness, (a), leaf group, (b1), (b2), classification.
pub fn run_pipeline(spec: &GroupSpec, budget: &EnumerationBudget) -> Result<VerificationReport, PipelineError> {
    let fol = StandardFoliation::for_ambient(spec.ambient());
    let free = group::acts_freely(spec, budget)?;
    let discrete = group::is_discrete(spec, budget)?;
    let a = preserves_foliation(spec, fol)?;
    let mut report = VerificationReport {
        label: spec.label.clone(),
        ambient: spec.ambient(),
        foliation: fol,
        free,
        discrete,
        a,
        b1: None,
        b2: None,
        leaf_generators: Vec::new(),
        leaf_rotation_class: None,
        orbifold: None,
        failure: None,
        detail: None,
    };
    if !report.free.holds {
        report.failure = Some(Failure::NotFree);
        report.detail = report.free.witness.clone();
        return Ok(report);
    }
    if !report.discrete.holds {
        report.failure = Some(Failure::NotDiscrete);
        report.detail = report.discrete.witness.clone();
        return Ok(report);
    }
    if !report.a.holds {
        report.failure = Some(Failure::A);
        report.detail = report.a.witness.clone();
        return Ok(report);
    }
    let leaf = induce_leaf_action(spec, fol)?;
    report.leaf_generators = leaf.describe_generators();
    let b1 = check_b1(&leaf, budget)?;
    let b1_holds = b1.holds;
    report.detail = b1.witness.clone();
    report.b1 = Some(b1);
    if !b1_holds {
        report.failure = Some(Failure::B1);
        return Ok(report);
    }
    let b2 = check_b2(&leaf, budget)?;
    let b2_holds = b2.holds;
    report.detail = b2.witness.clone();
    report.b2 = Some(b2);
    if !b2_holds {
        report.failure = Some(Failure::B2);
        return Ok(report);
    }
    let classified = match &leaf {
        LeafGroup::Sphere { generators, .. } => classify_sphere(generators, budget).map(|(o, c)| {
            report.leaf_rotation_class = Some(c);
            o
        }),
        LeafGroup::Plane { .. } => classify_orbifold(&leaf, budget),
    };
    match classified {
        Ok(o) => report.orbifold = Some(o),
        Err(e) => {
            report.failure = Some(Failure::Unclassified);
            report.detail = Some(e.to_string());
        }
    }
    Ok(report)
}

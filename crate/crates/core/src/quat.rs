//! Quaternionic model of `S³`, `SO(3)` and `SO(4)`.
//!
//! `ψ(q) = a ↦ q a q⁻¹` is the double cover `S³ → SO(3)` and
//! `φ(q₁, q₂) = x ↦ q₁ x q₂⁻¹` the double cover `S³ × S³ → SO(4)`.
//! With `x = z₁ + z₂ j` the Hopf fibres `(e^{it}z₁, e^{it}z₂)` are the orbits
//! of left multiplication by the circle `S¹ = {e^{it}} ⊂ span{1, i}`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Mul, Neg};

use nalgebra::{Matrix3, Matrix4, Vector3};
use thiserror::Error;

use crate::euclid::float_bucket;

/// Allowed deviation of `|q|` from 1 for inputs.
pub const UNIT_TOL: f64 = 1e-9;
/// Tolerance on the `j`, `k` components when testing membership in `S¹`.
pub const CIRCLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuatError {
    #[error("quaternion is not a unit quaternion (|q| = {0})")]
    NonUnit(f64),
    #[error("element set is not closed under multiplication")]
    NotClosed,
    #[error("generated group exceeds {0} elements")]
    TooLarge(usize),
    #[error("finite subgroup of order {0} with unrecognized element-order census {1:?}")]
    Unrecognized(usize, BTreeMap<usize, usize>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn one() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    pub const fn i() -> Self {
        Self::new(0.0, 1.0, 0.0, 0.0)
    }

    pub const fn j() -> Self {
        Self::new(0.0, 0.0, 1.0, 0.0)
    }

    pub const fn k() -> Self {
        Self::new(0.0, 0.0, 0.0, 1.0)
    }

    /// `e^{iθ} = cos θ + i sin θ`.
    pub fn exp_i(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s, 0.0, 0.0)
    }

    /// `cos(θ/2) + sin(θ/2)·n` for a unit axis `n`.
    pub fn from_axis_angle(axis: [f64; 3], theta: f64) -> Self {
        let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (s, c) = (theta / 2.0).sin_cos();
        Self::new(c, s * axis[0] / len, s * axis[1] / len, s * axis[2] / len)
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn conj(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sq(&self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn inverse(&self) -> Self {
        let n = self.norm_sq();
        let c = self.conj();
        Self::new(c.w / n, c.x / n, c.y / n, c.z / n)
    }

    pub fn imag(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dist(&self, o: &Self) -> f64 {
        (*self + -*o).norm()
    }

    fn check_unit(&self) -> Result<(), QuatError> {
        let n = self.norm();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(QuatError::NonUnit(n));
        }
        Ok(())
    }
}

impl Mul for Quaternion {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

impl std::ops::Add for Quaternion {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Neg for Quaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.6}, {:.6}, {:.6}, {:.6}]", self.w, self.x, self.y, self.z)
    }
}

/// `ψ(q)` as a matrix acting on imaginary quaternions in the basis `(i, j, k)`.
pub fn psi(q: Quaternion) -> Result<Matrix3<f64>, QuatError> {
    q.check_unit()?;
    Ok(psi_unchecked(q.normalized()))
}

pub(crate) fn psi_unchecked(q: Quaternion) -> Matrix3<f64> {
    let Quaternion { w, x, y, z } = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Where `q₁` sits relative to the Hopf circle `S¹ = {e^{it}}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CirclePosition {
    /// `q₁ ∈ S¹`: the element lies in `Γ₁`.
    Circle,
    /// `q₁ ∈ S¹·j`: normalizes `S¹` and reverses its orientation.
    CircleTimesJ,
    /// `q₁` does not normalize `S¹`.
    Off,
}

/// An element of `SO(4)` as a pair `(q₁, q₂)` modulo `(−q₁, −q₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SO4Element {
    q1: Quaternion,
    q2: Quaternion,
}

impl SO4Element {
    pub fn identity() -> Self {
        Self { q1: Quaternion::one(), q2: Quaternion::one() }
    }

    /// Builds from normalized inputs and fixes the sign: the first component
    /// of `q₁` that is not negligible is positive.
    fn canonical(q1: Quaternion, q2: Quaternion) -> Self {
        let (q1, q2) = (q1.normalized(), q2.normalized());
        let lead = q1.to_array().into_iter().find(|c| c.abs() > 1e-9).unwrap_or(1.0);
        if lead < 0.0 {
            Self { q1: -q1, q2: -q2 }
        } else {
            Self { q1, q2 }
        }
    }

    pub fn q1(&self) -> Quaternion {
        self.q1
    }

    pub fn q2(&self) -> Quaternion {
        self.q2
    }

    /// `x ↦ q₁ x q₂⁻¹`
    pub fn apply(&self, x: Quaternion) -> Quaternion {
        self.q1 * x * self.q2.conj()
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self::canonical(self.q1 * other.q1, self.q2 * other.q2)
    }

    pub fn inverse(&self) -> Self {
        Self::canonical(self.q1.conj(), self.q2.conj())
    }

    /// The 4×4 matrix in the basis `(1, i, j, k)`.
    pub fn matrix(&self) -> Matrix4<f64> {
        let basis = [Quaternion::one(), Quaternion::i(), Quaternion::j(), Quaternion::k()];
        let mut m = Matrix4::zeros();
        for (c, b) in basis.iter().enumerate() {
            let img = self.apply(*b).to_array();
            for r in 0..4 {
                m[(r, c)] = img[r];
            }
        }
        m
    }

    pub fn key(&self) -> [i64; 8] {
        let a = self.q1.to_array();
        let b = self.q2.to_array();
        std::array::from_fn(|i| float_bucket(if i < 4 { a[i] } else { b[i - 4] }))
    }

    pub fn is_identity(&self) -> bool {
        self.q1.dist(&Quaternion::one()) < 1e-9 && self.q2.dist(&Quaternion::one()) < 1e-9
    }

    pub fn circle_position(&self) -> CirclePosition {
        let q = self.q1;
        if q.y.abs() < CIRCLE_TOL && q.z.abs() < CIRCLE_TOL {
            CirclePosition::Circle
        } else if q.w.abs() < CIRCLE_TOL && q.x.abs() < CIRCLE_TOL {
            CirclePosition::CircleTimesJ
        } else {
            CirclePosition::Off
        }
    }

    /// `|det(g − I)|`, zero exactly when `g` fixes a point of `S³`.
    pub fn fixed_point_determinant(&self) -> f64 {
        (self.matrix() - Matrix4::identity()).determinant().abs()
    }
}

impl fmt::Display for SO4Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "phi({}, {})", self.q1, self.q2)
    }
}

/// `φ(q₁, q₂)`.
pub fn phi_cover(q1: Quaternion, q2: Quaternion) -> Result<SO4Element, QuatError> {
    q1.check_unit()?;
    q2.check_unit()?;
    Ok(SO4Element::canonical(q1, q2))
}

/// `p(g) = (ψ(q₁), ψ(q₂))`; well defined because `ψ(−q) = ψ(q)`.
pub fn p_homomorphism(g: &SO4Element) -> (Matrix3<f64>, Matrix3<f64>) {
    (psi_unchecked(g.q1), psi_unchecked(g.q2))
}

/// Membership in `Γ₁ = φ(S¹ × S³)`.
pub fn in_gamma1(g: &SO4Element) -> bool {
    g.circle_position() == CirclePosition::Circle
}

/// Membership in `Γ₂ = φ(S³ × S¹)`.
pub fn in_gamma2(g: &SO4Element) -> bool {
    let q = g.q2;
    q.y.abs() < CIRCLE_TOL && q.z.abs() < CIRCLE_TOL
}

/// Leaf of the Hopf foliation through `x`, as the point `x̄ i x` of the unit
/// sphere in the imaginary quaternions. Constant on `e^{it}x`, and
/// `leaf(x q⁻¹) = ψ(q)·leaf(x)`.
pub fn hopf_leaf(x: Quaternion) -> [f64; 3] {
    (x.conj() * Quaternion::i() * x).imag()
}

/// Stereographic coordinate of a leaf point, matching `π₂ = z₁/z₂`:
/// `w = (s₃ + i s₂)/(1 − s₁)`, with `None` for the pole `s = (1, 0, 0)` (`w = ∞`).
pub fn leaf_to_hopf_coordinate(s: [f64; 3]) -> Option<num_complex::Complex64> {
    let d = 1.0 - s[0];
    (d.abs() > 1e-15).then(|| num_complex::Complex64::new(s[2] / d, s[1] / d))
}

/// Inverse of [`leaf_to_hopf_coordinate`]; `None` stands for `∞`.
pub fn hopf_coordinate_to_leaf(w: Option<num_complex::Complex64>) -> [f64; 3] {
    match w {
        None => [1.0, 0.0, 0.0],
        Some(w) => {
            let n = w.norm_sqr();
            [(n - 1.0) / (n + 1.0), 2.0 * w.im / (n + 1.0), 2.0 * w.re / (n + 1.0)]
        }
    }
}

/// Rotation order of a matrix in `SO(3)`, searching powers up to `max`.
pub fn rotation_order(m: &Matrix3<f64>, max: usize) -> Option<usize> {
    let mut p = Matrix3::identity();
    for n in 1..=max {
        p *= m;
        if (p - Matrix3::identity()).norm() < 1e-7 {
            return Some(n);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum So3Class {
    Cyclic(usize),
    Dihedral(usize),
    Tetrahedral,
    Octahedral,
    Icosahedral,
}

impl fmt::Display for So3Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            So3Class::Cyclic(n) => write!(f, "Z{n}"),
            So3Class::Dihedral(m) => write!(f, "D{m}"),
            So3Class::Tetrahedral => write!(f, "T"),
            So3Class::Octahedral => write!(f, "O"),
            So3Class::Icosahedral => write!(f, "I"),
        }
    }
}

fn mat_key(m: &Matrix3<f64>) -> [i64; 9] {
    std::array::from_fn(|i| float_bucket(m[(i / 3, i % 3)]))
}

/// Closure of a set of orthogonal 3×3 matrices under products; the identity comes first.
pub fn matrix_group_closure(gens: &[Matrix3<f64>], max: usize) -> Result<Vec<Matrix3<f64>>, QuatError> {
    let mut elems = vec![Matrix3::identity()];
    let mut seen: HashMap<[i64; 9], ()> = HashMap::from([(mat_key(&elems[0]), ())]);
    let mut frontier = elems.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for f in &frontier {
            for g in gens {
                let p = g * f;
                if seen.insert(mat_key(&p), ()).is_none() {
                    next.push(p);
                    elems.push(p);
                    if elems.len() > max {
                        return Err(QuatError::TooLarge(max));
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(elems)
}

/// Finite subgroup of `SO(3)` given by its elements.
#[derive(Debug, Clone)]
pub struct SO3Subgroup {
    elements: Vec<Matrix3<f64>>,
}

impl SO3Subgroup {
    /// Checks closure under products and inverses.
    pub fn from_elements(elements: Vec<Matrix3<f64>>) -> Result<Self, QuatError> {
        let mut uniq: Vec<Matrix3<f64>> = Vec::new();
        for m in elements {
            if !uniq.iter().any(|u| (u - m).norm() < 1e-7) {
                uniq.push(m);
            }
        }
        let contains = |m: &Matrix3<f64>| uniq.iter().any(|u| (u - m).norm() < 1e-7);
        for a in &uniq {
            if !contains(&a.transpose()) {
                return Err(QuatError::NotClosed);
            }
            for b in &uniq {
                if !contains(&(a * b)) {
                    return Err(QuatError::NotClosed);
                }
            }
        }
        Ok(Self { elements: uniq })
    }

    /// Closure of a generating set.
    pub fn generate(gens: &[Matrix3<f64>], max: usize) -> Result<Self, QuatError> {
        Ok(Self { elements: matrix_group_closure(gens, max)? })
    }

    pub fn elements(&self) -> &[Matrix3<f64>] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Number of elements of each rotation order.
    pub fn order_census(&self) -> BTreeMap<usize, usize> {
        let mut census = BTreeMap::new();
        for m in &self.elements {
            let o = rotation_order(m, self.elements.len()).unwrap_or(0);
            *census.entry(o).or_insert(0) += 1;
        }
        census
    }

    pub fn conjugate(&self, r: &Matrix3<f64>) -> Self {
        Self { elements: self.elements.iter().map(|m| r * m * r.transpose()).collect() }
    }
}

/// Classifies a finite subgroup of `SO(3)` by its order and element-order census.
pub fn classify_so3_subgroup(h: &SO3Subgroup) -> Result<So3Class, QuatError> {
    let n = h.order();
    let census = h.order_census();
    let count = |o: usize| census.get(&o).copied().unwrap_or(0);
    if count(n) > 0 {
        return Ok(So3Class::Cyclic(n));
    }
    let matches = |want: &[(usize, usize)]| census.len() == want.len() && want.iter().all(|&(o, c)| count(o) == c);
    match n {
        12 if matches(&[(1, 1), (2, 3), (3, 8)]) => return Ok(So3Class::Tetrahedral),
        24 if matches(&[(1, 1), (2, 9), (3, 8), (4, 6)]) => return Ok(So3Class::Octahedral),
        60 if matches(&[(1, 1), (2, 15), (3, 20), (5, 24)]) => return Ok(So3Class::Icosahedral),
        _ => {}
    }
    if n % 2 == 0 {
        let m = n / 2;
        let cyclic_part = if m == 2 { count(2) == 3 } else { count(m) > 0 };
        if cyclic_part && count(2) >= m {
            return Ok(So3Class::Dihedral(m));
        }
    }
    Err(QuatError::Unrecognized(n, census))
}

/// Axis (unit vector) of a nontrivial rotation.
pub fn rotation_axis(m: &Matrix3<f64>) -> Vector3<f64> {
    let eig = (m - Matrix3::identity()).svd(false, true);
    let vt = eig.v_t.expect("requested V^T");
    // right singular vector of the smallest singular value spans the kernel
    let (idx, _) = eig.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("3 singular values");
    Vector3::new(vt[(idx, 0)], vt[(idx, 1)], vt[(idx, 2)]).normalize()
}

/// Generators of the binary cyclic group of order `2n` (`e^{iπ/n}`).
pub fn binary_cyclic(n: usize) -> Vec<Quaternion> {
    vec![Quaternion::exp_i(std::f64::consts::PI / n as f64)]
}

/// Generators of the binary dihedral group of order `4m` (`ψ`-image `D_m`
/// with cyclic part about the `i`-axis).
pub fn binary_dihedral(m: usize) -> Vec<Quaternion> {
    vec![Quaternion::exp_i(std::f64::consts::PI / m as f64), Quaternion::j()]
}

/// Generators of the binary tetrahedral group (order 24).
pub fn binary_tetrahedral() -> Vec<Quaternion> {
    vec![Quaternion::i(), Quaternion::new(0.5, 0.5, 0.5, 0.5)]
}

/// Generators of the binary octahedral group (order 48).
pub fn binary_octahedral() -> Vec<Quaternion> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    vec![Quaternion::new(r, r, 0.0, 0.0), Quaternion::new(0.5, 0.5, 0.5, 0.5)]
}

/// Generators of the binary icosahedral group (order 120).
pub fn binary_icosahedral() -> Vec<Quaternion> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    vec![Quaternion::new(0.5, 0.5, 0.5, 0.5), Quaternion::new(phi / 2.0, 0.5, 1.0 / (2.0 * phi), 0.0)]
}

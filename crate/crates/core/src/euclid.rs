//! Isometries of `R³` and of the leaf plane `R²`.
//!
//! Data is kept exact (over [`QSqrt3`]) whenever the constructors allow it and
//! falls back to `f64` otherwise. Mixing the two promotes to `f64`.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::DMatrix;
use num_integer::Integer;
use num_traits::Zero;

use crate::exact::{convergents, lcm_denoms, QSqrt3, Rat, Scalar};

/// Tolerance for certifying float orthogonality.
pub const ORTHO_TOL: f64 = 1e-12;
/// Singular-value threshold used when deciding ranks of float systems.
pub const FLOAT_RANK_TOL: f64 = 1e-9;
/// Default denominator bound for rationalizing float data.
pub const DEFAULT_DENOMINATOR_BOUND: i64 = 1_000_000;

pub type Vec3Q = [QSqrt3; 3];
pub type Vec2Q = [QSqrt3; 2];

pub fn vq<const N: usize>(xs: [i64; N]) -> [QSqrt3; N] {
    xs.map(QSqrt3::int)
}

pub fn e3() -> Vec3Q {
    vq([0, 0, 1])
}

pub fn dot<F: Scalar, const N: usize>(a: &[F; N], b: &[F; N]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (x, y)| acc + *x * *y)
}

pub fn cross<F: Scalar>(a: &[F; 3], b: &[F; 3]) -> [F; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn scale<F: Scalar, const N: usize>(s: F, a: &[F; N]) -> [F; N] {
    a.map(|x| s * x)
}

pub fn add<F: Scalar, const N: usize>(a: &[F; N], b: &[F; N]) -> [F; N] {
    std::array::from_fn(|i| a[i] + b[i])
}

pub fn sub<F: Scalar, const N: usize>(a: &[F; N], b: &[F; N]) -> [F; N] {
    std::array::from_fn(|i| a[i] - b[i])
}

pub fn is_zero_vec<F: Scalar, const N: usize>(a: &[F; N]) -> bool {
    a.iter().all(|x| x.is_zero())
}

pub fn to_f64_vec<F: Scalar, const N: usize>(a: &[F; N]) -> [f64; N] {
    a.map(|x| x.to_f64())
}

pub fn norm_f64<const N: usize>(a: &[f64; N]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// An angle, exact as a rational number of turns when possible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    /// `2π·p/q`, lowest terms, `0 <= p < q`.
    Rational { p: i64, q: i64 },
    /// Radians in `[0, 2π)`.
    Irrational(f64),
}

impl Angle {
    pub fn zero() -> Self {
        Angle::Rational { p: 0, q: 1 }
    }

    pub fn half_turn() -> Self {
        Angle::Rational { p: 1, q: 2 }
    }

    /// `2π·p/q`.
    pub fn turns(p: i64, q: i64) -> Self {
        assert!(q != 0, "angle denominator must be nonzero");
        let (p, q) = if q < 0 { (-p, -q) } else { (p, q) };
        let p = p.rem_euclid(q);
        let g = p.gcd(&q).max(1);
        Angle::Rational { p: p / g, q: q / g }
    }

    pub fn radians(x: f64) -> Self {
        Angle::Irrational(x.rem_euclid(TAU))
    }

    pub fn to_radians(&self) -> f64 {
        match *self {
            Angle::Rational { p, q } => TAU * p as f64 / q as f64,
            Angle::Irrational(x) => x,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Angle::Rational { p: 0, .. })
    }

    pub fn is_half_turn(&self) -> bool {
        matches!(self, Angle::Rational { p: 1, q: 2 })
    }

    /// Order of the rotation, `None` when irrational.
    pub fn order(&self) -> Option<i64> {
        match *self {
            Angle::Rational { q, .. } => Some(q),
            Angle::Irrational(_) => None,
        }
    }

    pub fn add(&self, other: &Angle) -> Angle {
        match (*self, *other) {
            (Angle::Rational { p: p1, q: q1 }, Angle::Rational { p: p2, q: q2 }) => {
                let l = q1.lcm(&q2);
                Angle::turns(p1 * (l / q1) + p2 * (l / q2), l)
            }
            _ => Angle::radians(self.to_radians() + other.to_radians()),
        }
    }

    pub fn scaled(&self, k: i64) -> Angle {
        match *self {
            Angle::Rational { p, q } => Angle::turns(p * k, q),
            Angle::Irrational(x) => Angle::radians(x * k as f64),
        }
    }

    /// `(cos θ, sin θ)` in `Q(√3)` for orders dividing 12.
    pub fn exact_cos_sin(&self) -> Option<(QSqrt3, QSqrt3)> {
        let Angle::Rational { p, q } = *self else { return None };
        if 12 % q != 0 {
            return None;
        }
        let k = (p * (12 / q)).rem_euclid(12);
        let h = QSqrt3::frac(1, 2);
        let r = QSqrt3::sqrt3_times(Rat::new(1, 2));
        let one = QSqrt3::int(1);
        let zero = QSqrt3::int(0);
        let (c, s) = match k {
            0 => (one, zero),
            1 => (r, h),
            2 => (h, r),
            3 => (zero, one),
            4 => (-h, r),
            5 => (-r, h),
            6 => (-one, zero),
            7 => (-r, -h),
            8 => (-h, -r),
            9 => (zero, -one),
            10 => (h, -r),
            _ => (r, -h),
        };
        Some((c, s))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Angle::Rational { p, q } => write!(f, "2pi*{p}/{q}"),
            Angle::Irrational(x) => write!(f, "{x}rad"),
        }
    }
}

/// Affine map `x ↦ linear·x + translation` over a scalar field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine<F: Scalar, const N: usize> {
    pub linear: [[F; N]; N],
    pub translation: [F; N],
}

impl<F: Scalar, const N: usize> Affine<F, N> {
    pub fn identity() -> Self {
        let linear = std::array::from_fn(|i| std::array::from_fn(|j| if i == j { F::one() } else { F::zero() }));
        Self { linear, translation: [F::zero(); N] }
    }

    pub fn mat_vec(&self, x: &[F; N]) -> [F; N] {
        std::array::from_fn(|i| (0..N).fold(F::zero(), |acc, k| acc + self.linear[i][k] * x[k]))
    }

    pub fn apply(&self, x: &[F; N]) -> [F; N] {
        add(&self.mat_vec(x), &self.translation)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        let linear = std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..N).fold(F::zero(), |acc, k| acc + self.linear[i][k] * other.linear[k][j]))
        });
        Self { linear, translation: self.apply(&other.translation) }
    }

    /// Inverse of an isometry (linear part transposed).
    pub fn inverse(&self) -> Self {
        let lt: [[F; N]; N] = std::array::from_fn(|i| std::array::from_fn(|j| self.linear[j][i]));
        let mut inv = Self { linear: lt, translation: [F::zero(); N] };
        inv.translation = inv.mat_vec(&self.translation).map(|x| -x);
        inv
    }

    pub fn det(&self) -> F {
        det(&self.linear)
    }

    pub fn linear_is_identity(&self) -> bool {
        (0..N).all(|i| (0..N).all(|j| (self.linear[i][j] - if i == j { F::one() } else { F::zero() }).is_zero()))
    }

    /// Largest entry of `linearᵀ·linear − I`.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..N {
            for j in 0..N {
                let v = (0..N).fold(F::zero(), |acc, k| acc + self.linear[k][i] * self.linear[k][j]);
                let target = if i == j { F::one() } else { F::zero() };
                worst = worst.max((v - target).to_f64().abs());
            }
        }
        worst
    }

    pub fn to_f64(&self) -> Affine<f64, N> {
        Affine { linear: self.linear.map(|r| r.map(|x| x.to_f64())), translation: to_f64_vec(&self.translation) }
    }
}

fn det<F: Scalar, const N: usize>(m: &[[F; N]; N]) -> F {
    match N {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => unimplemented!("determinants only for N <= 3"),
    }
}

/// Solution set of `g(x) = x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FixedSet {
    Empty,
    Point,
    Line,
    Plane,
    All,
}

impl FixedSet {
    fn from_dim(dim: usize, ambient: usize) -> Self {
        if dim == ambient {
            return FixedSet::All;
        }
        match dim {
            0 => FixedSet::Point,
            1 => FixedSet::Line,
            _ => FixedSet::Plane,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, FixedSet::Empty)
    }
}

/// Row reduction of an augmented system `[m | rhs]` over an exact field.
/// Returns the rank of `m` and a particular solution if consistent.
pub fn solve_exact<const N: usize>(m: [[QSqrt3; N]; N], rhs: [QSqrt3; N]) -> (usize, Option<[QSqrt3; N]>) {
    let mut a: Vec<Vec<QSqrt3>> = (0..N)
        .map(|i| {
            let mut row = m[i].to_vec();
            row.push(rhs[i]);
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..N {
        let Some(p) = (row..N).find(|&r| !a[r][col].is_zero()) else { continue };
        a.swap(row, p);
        let inv = a[row][col].recip().expect("nonzero pivot");
        for k in col..=N {
            a[row][k] = a[row][k] * inv;
        }
        for r in 0..N {
            if r != row && !a[r][col].is_zero() {
                let f = a[r][col];
                for k in col..=N {
                    let v = a[row][k];
                    a[r][k] = a[r][k] - f * v;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let rank = pivots.len();
    if (rank..N).any(|r| !a[r][N].is_zero()) {
        return (rank, None);
    }
    let mut x = [QSqrt3::int(0); N];
    for (r, &c) in pivots.iter().enumerate() {
        x[c] = a[r][N];
    }
    (rank, Some(x))
}

/// Least-squares analysis of a float system via SVD.
pub fn solve_float<const N: usize>(m: [[f64; N]; N], rhs: [f64; N]) -> (usize, Option<[f64; N]>) {
    let mat = DMatrix::from_fn(N, N, |i, j| m[i][j]);
    let b = nalgebra::DVector::from_fn(N, |i, _| rhs[i]);
    let svd = mat.clone().svd(true, true);
    let rank = svd.singular_values.iter().filter(|s| **s > FLOAT_RANK_TOL).count();
    let Ok(x) = svd.solve(&b, FLOAT_RANK_TOL) else { return (rank, None) };
    let resid = (&mat * &x - &b).norm();
    if resid > FLOAT_RANK_TOL * (1.0 + b.norm()) {
        return (rank, None);
    }
    (rank, Some(std::array::from_fn(|i| x[i])))
}

/// Constructor that produced an isometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Identity,
    Translation,
    Rotation(Angle),
    Reflection,
    Screw(Angle),
    Glide,
}

/// Exact or float data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion<const N: usize> {
    Exact(Affine<QSqrt3, N>),
    Float(Affine<f64, N>),
}

/// Dedup key: exact data, or float data rounded to 1e-8 buckets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ElementKey {
    Exact(Vec<QSqrt3>),
    Float(Vec<i64>),
}

pub fn float_bucket(x: f64) -> i64 {
    let v = (x * 1e8).round();
    if v == 0.0 {
        0
    } else {
        v as i64
    }
}

/// An isometry of `R^N`. `EuclIsometry` and `PlaneIsometry` are the two
/// instances used here; mismatched dimensions are ruled out by the type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Isometry<const N: usize> {
    pub motion: Motion<N>,
    pub provenance: Option<Provenance>,
}

pub type EuclIsometry = Isometry<3>;
pub type PlaneIsometry = Isometry<2>;

impl<const N: usize> Isometry<N> {
    pub fn identity() -> Self {
        Self { motion: Motion::Exact(Affine::identity()), provenance: Some(Provenance::Identity) }
    }

    pub fn exact(a: Affine<QSqrt3, N>, provenance: Option<Provenance>) -> Self {
        Self { motion: Motion::Exact(a), provenance }
    }

    /// Float isometry; panics unless the linear part is orthogonal to 1e-12.
    pub fn float(a: Affine<f64, N>, provenance: Option<Provenance>) -> Self {
        assert!(a.orthogonality_defect() < 1e-10, "linear part is not orthogonal");
        Self { motion: Motion::Float(a), provenance }
    }

    pub fn translation(v: [QSqrt3; N]) -> Self {
        let mut a = Affine::identity();
        a.translation = v;
        Self::exact(a, Some(Provenance::Translation))
    }

    pub fn translation_f64(v: [f64; N]) -> Self {
        let mut a = Affine::identity();
        a.translation = v;
        Self { motion: Motion::Float(a), provenance: Some(Provenance::Translation) }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.motion, Motion::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&Affine<QSqrt3, N>> {
        match &self.motion {
            Motion::Exact(a) => Some(a),
            Motion::Float(_) => None,
        }
    }

    pub fn to_float(&self) -> Affine<f64, N> {
        match &self.motion {
            Motion::Exact(a) => a.to_f64(),
            Motion::Float(a) => *a,
        }
    }

    pub fn into_float(self) -> Self {
        Self { motion: Motion::Float(self.to_float()), provenance: self.provenance }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let motion = match (&self.motion, &other.motion) {
            (Motion::Exact(a), Motion::Exact(b)) => Motion::Exact(a.compose(b)),
            _ => Motion::Float(self.to_float().compose(&other.to_float())),
        };
        Self { motion, provenance: None }
    }

    pub fn inverse(&self) -> Self {
        let motion = match &self.motion {
            Motion::Exact(a) => Motion::Exact(a.inverse()),
            Motion::Float(a) => Motion::Float(a.inverse()),
        };
        Self { motion, provenance: None }
    }

    pub fn pow(&self, k: i64) -> Self {
        let mut base = if k < 0 { self.inverse() } else { *self };
        let mut e = k.unsigned_abs();
        let mut acc = Self::identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose(&base);
            }
            base = base.compose(&base);
            e >>= 1;
        }
        acc
    }

    pub fn apply_f64(&self, x: &[f64; N]) -> [f64; N] {
        self.to_float().apply(x)
    }

    /// Exact image; `None` for float isometries.
    pub fn apply_exact(&self, x: &[QSqrt3; N]) -> Option<[QSqrt3; N]> {
        self.as_exact().map(|a| a.apply(x))
    }

    pub fn linear_f64(&self) -> [[f64; N]; N] {
        self.to_float().linear
    }

    pub fn translation_part_f64(&self) -> [f64; N] {
        self.to_float().translation
    }

    /// `+1` or `-1`.
    pub fn det_sign(&self) -> i32 {
        let d = match &self.motion {
            Motion::Exact(a) => a.det().to_f64(),
            Motion::Float(a) => a.det(),
        };
        if d > 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn is_orientation_preserving(&self) -> bool {
        self.det_sign() > 0
    }

    pub fn linear_is_identity(&self) -> bool {
        match &self.motion {
            Motion::Exact(a) => a.linear_is_identity(),
            Motion::Float(a) => a.linear_is_identity(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.linear_is_identity()
            && match &self.motion {
                Motion::Exact(a) => is_zero_vec(&a.translation),
                Motion::Float(a) => is_zero_vec(&a.translation),
            }
    }

    pub fn is_translation(&self) -> bool {
        self.linear_is_identity()
    }

    pub fn key(&self) -> ElementKey {
        match &self.motion {
            Motion::Exact(a) => {
                let mut v: Vec<QSqrt3> = a.linear.iter().flatten().copied().collect();
                v.extend_from_slice(&a.translation);
                ElementKey::Exact(v)
            }
            Motion::Float(a) => {
                let mut v: Vec<i64> = a.linear.iter().flatten().map(|x| float_bucket(*x)).collect();
                v.extend(a.translation.iter().map(|x| float_bucket(*x)));
                ElementKey::Float(v)
            }
        }
    }

    /// Solves `(linear − I)x = −translation` and classifies the solution set.
    pub fn fixed_points(&self) -> FixedSet {
        match &self.motion {
            Motion::Exact(a) => {
                let m = std::array::from_fn(|i| {
                    std::array::from_fn(|j| a.linear[i][j] - if i == j { QSqrt3::int(1) } else { QSqrt3::int(0) })
                });
                let (rank, sol) = solve_exact(m, a.translation.map(|x| -x));
                sol.map_or(FixedSet::Empty, |_| FixedSet::from_dim(N - rank, N))
            }
            Motion::Float(a) => {
                let m =
                    std::array::from_fn(|i| std::array::from_fn(|j| a.linear[i][j] - if i == j { 1.0 } else { 0.0 }));
                let (rank, sol) = solve_float(m, a.translation.map(|x| -x));
                sol.map_or(FixedSet::Empty, |_| FixedSet::from_dim(N - rank, N))
            }
        }
    }

    /// A fixed point, if any (float coordinates).
    pub fn a_fixed_point(&self) -> Option<[f64; N]> {
        match &self.motion {
            Motion::Exact(_) => self.a_fixed_point_exact().map(|x| to_f64_vec(&x)),
            Motion::Float(a) => {
                let m =
                    std::array::from_fn(|i| std::array::from_fn(|j| a.linear[i][j] - if i == j { 1.0 } else { 0.0 }));
                solve_float(m, a.translation.map(|x| -x)).1
            }
        }
    }

    pub fn a_fixed_point_exact(&self) -> Option<[QSqrt3; N]> {
        let a = self.as_exact()?;
        let m = std::array::from_fn(|i| {
            std::array::from_fn(|j| a.linear[i][j] - if i == j { QSqrt3::int(1) } else { QSqrt3::int(0) })
        });
        solve_exact(m, a.translation.map(|x| -x)).1
    }

    /// Rotation angle in `[0, π]` of the orientation-preserving linear part
    /// (for `det = −1` the angle of `−linear` in 3D; `None` for plane reflections).
    pub fn rotation_angle(&self) -> Option<f64> {
        let l = self.linear_f64();
        let sign = self.det_sign() as f64;
        match N {
            2 if sign > 0.0 => Some(l[1][0].atan2(l[0][0]).abs()),
            3 => {
                let tr = sign * (l[0][0] + l[1][1] + l[2][2]);
                Some(((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos())
            }
            _ => None,
        }
    }

    /// `|g(0)|`
    pub fn origin_displacement(&self) -> f64 {
        norm_f64(&self.translation_part_f64())
    }

    /// Frobenius distance of the linear part from the identity.
    pub fn linear_deviation(&self) -> f64 {
        let l = self.linear_f64();
        let mut s = 0.0;
        for i in 0..N {
            for j in 0..N {
                let d = l[i][j] - if i == j { 1.0 } else { 0.0 };
                s += d * d;
            }
        }
        s.sqrt()
    }
}

impl<const N: usize> fmt::Display for Isometry<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.motion {
            Motion::Exact(a) => {
                let rows: Vec<String> =
                    a.linear.iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")).collect();
                let t: Vec<String> = a.translation.iter().map(|x| x.to_string()).collect();
                write!(f, "([{}], t=({}))", rows.join(";"), t.join(","))
            }
            Motion::Float(a) => {
                let rows: Vec<String> = a
                    .linear
                    .iter()
                    .map(|r| r.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(","))
                    .collect();
                let t: Vec<String> = a.translation.iter().map(|x| format!("{x:.6}")).collect();
                write!(f, "([{}], t=({}))", rows.join(";"), t.join(","))
            }
        }
    }
}

/// Rotation through `angle` about the line through the origin spanned by `axis`.
/// Exact whenever `cos`, `sin` and `|axis|` (when needed) lie in `Q(√3)`.
pub fn rotation(axis: Vec3Q, angle: Angle) -> EuclIsometry {
    assert!(!is_zero_vec(&axis), "rotation axis must be nonzero");
    let n2 = dot(&axis, &axis);
    if let Some((c, s)) = angle.exact_cos_sin() {
        let s_over_len = if s.is_zero() { Some(QSqrt3::int(0)) } else { n2.sqrt().map(|len| s / len) };
        if let Some(sl) = s_over_len {
            let one_minus_c = QSqrt3::int(1) - c;
            let k = [
                [QSqrt3::int(0), -axis[2], axis[1]],
                [axis[2], QSqrt3::int(0), -axis[0]],
                [-axis[1], axis[0], QSqrt3::int(0)],
            ];
            let linear = std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    let diag = if i == j { c } else { QSqrt3::int(0) };
                    diag + sl * k[i][j] + one_minus_c * axis[i] * axis[j] / n2
                })
            });
            return Isometry::exact(Affine { linear, translation: vq([0, 0, 0]) }, Some(Provenance::Rotation(angle)));
        }
    }
    rotation_f64(to_f64_vec(&axis), angle)
}

pub fn rotation_f64(axis: [f64; 3], angle: Angle) -> EuclIsometry {
    let len = norm_f64(&axis);
    let n = axis.map(|x| x / len);
    let th = angle.to_radians();
    let (s, c) = th.sin_cos();
    let k = [[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]];
    let linear = std::array::from_fn(|i| {
        std::array::from_fn(|j| (if i == j { c } else { 0.0 }) + s * k[i][j] + (1.0 - c) * n[i] * n[j])
    });
    Isometry::float(Affine { linear, translation: [0.0; 3] }, Some(Provenance::Rotation(angle)))
}

/// `(R_θ(axis), t_shift)`: rotate, then translate by `shift`.
pub fn screw(axis: Vec3Q, angle: Angle, shift: Vec3Q) -> EuclIsometry {
    let r = rotation(axis, angle);
    let mut g = Isometry::translation(shift).compose(&r);
    g.provenance = Some(Provenance::Screw(angle));
    g
}

/// Reflection in the plane through the origin with normal `normal`, then translation.
pub fn glide(normal: Vec3Q, shift: Vec3Q) -> EuclIsometry {
    let n2 = dot(&normal, &normal);
    let linear = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let diag = if i == j { QSqrt3::int(1) } else { QSqrt3::int(0) };
            diag - QSqrt3::int(2) * normal[i] * normal[j] / n2
        })
    });
    let prov = if is_zero_vec(&shift) { Provenance::Reflection } else { Provenance::Glide };
    Isometry::exact(Affine { linear, translation: shift }, Some(prov))
}

/// Plane rotation about the origin.
pub fn plane_rotation(angle: Angle) -> PlaneIsometry {
    if let Some((c, s)) = angle.exact_cos_sin() {
        let linear = [[c, -s], [s, c]];
        return Isometry::exact(Affine { linear, translation: vq([0, 0]) }, Some(Provenance::Rotation(angle)));
    }
    let (s, c) = angle.to_radians().sin_cos();
    Isometry::float(Affine { linear: [[c, -s], [s, c]], translation: [0.0; 2] }, Some(Provenance::Rotation(angle)))
}

/// `S_v`: reflection in the line spanned by `v`.
pub fn plane_reflection(v: Vec2Q) -> PlaneIsometry {
    let n2 = dot(&v, &v);
    let linear = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let diag = if i == j { QSqrt3::int(1) } else { QSqrt3::int(0) };
            QSqrt3::int(2) * v[i] * v[j] / n2 - diag
        })
    });
    Isometry::exact(Affine { linear, translation: vq([0, 0]) }, Some(Provenance::Reflection))
}

/// `(S_v, t_w)`.
pub fn plane_glide(v: Vec2Q, w: Vec2Q) -> PlaneIsometry {
    let mut g = Isometry::translation(w).compose(&plane_reflection(v));
    g.provenance = Some(Provenance::Glide);
    g
}

/// Input to [`rationally_related`].
#[derive(Debug, Clone)]
pub enum VectorSet<const N: usize> {
    Exact(Vec<[QSqrt3; N]>),
    Float(Vec<[f64; N]>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub related: bool,
    /// Integer coefficients `c` with `Σ cᵢ vᵢ = 0`, when related.
    pub coefficients: Option<Vec<i64>>,
    /// `false` when the verdict for float data only covers denominators up to the bound.
    pub exact: bool,
}

/// Rank over `Q` of exact vectors, plus one integer kernel vector when deficient.
fn rational_kernel(cols: &[Vec<Rat>]) -> (usize, Option<Vec<i64>>) {
    let k = cols.len();
    if k == 0 {
        return (0, None);
    }
    let rows = cols[0].len();
    // matrix rows x k
    let mut a: Vec<Vec<Rat>> = (0..rows).map(|r| (0..k).map(|c| cols[c][r]).collect()).collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..k {
        let Some(p) = (row..rows).find(|&r| !a[r][col].is_zero()) else { continue };
        a.swap(row, p);
        let inv = Rat::from_integer(1) / a[row][col];
        for x in a[row].iter_mut() {
            *x = *x * inv;
        }
        for r in 0..rows {
            if r != row && !a[r][col].is_zero() {
                let f = a[r][col];
                let pivot_row = a[row].clone();
                for (x, y) in a[r].iter_mut().zip(pivot_row) {
                    *x = *x - f * y;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let rank = pivots.len();
    let Some(free) = (0..k).find(|c| !pivots.contains(c)) else { return (rank, None) };
    let mut kernel = vec![Rat::zero(); k];
    kernel[free] = Rat::from_integer(1);
    for (r, &pc) in pivots.iter().enumerate() {
        kernel[pc] = -a[r][free];
    }
    let l = lcm_denoms(kernel.iter());
    let ints: Vec<i64> = kernel.iter().map(|x| (*x * Rat::from_integer(l)).to_integer()).collect();
    (rank, Some(normalize_relation(ints)))
}

fn normalize_relation(mut ints: Vec<i64>) -> Vec<i64> {
    let g = ints.iter().fold(0i64, |g, x| g.gcd(x)).max(1);
    for x in ints.iter_mut() {
        *x /= g;
    }
    if ints.iter().find(|x| **x != 0).is_some_and(|x| *x < 0) {
        for x in ints.iter_mut() {
            *x = -*x;
        }
    }
    ints
}

/// Rank over `Q` of a set of exact vectors.
pub fn rational_rank<const N: usize>(vs: &[[QSqrt3; N]]) -> usize {
    let cols: Vec<Vec<Rat>> = vs.iter().map(|v| v.iter().flat_map(|x| x.coords()).collect()).collect();
    rational_kernel(&cols).0
}

/// Decides linear dependence over `Q`. Exact for exact input; for float input
/// the search covers relations whose coefficients rationalize with
/// denominators up to `max_den`.
pub fn rationally_related<const N: usize>(vs: &VectorSet<N>, max_den: i64) -> Relation {
    match vs {
        VectorSet::Exact(v) => {
            // each coordinate a + b√3 splits into two rational coordinates
            let cols: Vec<Vec<Rat>> = v.iter().map(|x| x.iter().flat_map(|c| c.coords()).collect()).collect();
            let (_, kernel) = rational_kernel(&cols);
            Relation { related: kernel.is_some(), coefficients: kernel, exact: true }
        }
        VectorSet::Float(v) => float_relation(v, max_den),
    }
}

fn float_relation<const N: usize>(vs: &[[f64; N]], max_den: i64) -> Relation {
    let k = vs.len();
    let not_related = Relation { related: false, coefficients: None, exact: false };
    if let Some(i) = vs.iter().position(|v| norm_f64(v) < FLOAT_RANK_TOL) {
        let mut c = vec![0; k];
        c[i] = 1;
        return Relation { related: true, coefficients: Some(c), exact: false };
    }
    // greedily pick a real basis
    let mut basis: Vec<usize> = Vec::new();
    for i in 0..k {
        let mut cand = basis.clone();
        cand.push(i);
        if real_rank(vs, &cand) == cand.len() {
            basis = cand;
        }
    }
    for extra in (0..k).filter(|i| !basis.contains(i)) {
        // express vs[extra] in the basis, then rationalize the coefficients
        let m = DMatrix::from_fn(N, basis.len(), |r, c| vs[basis[c]][r]);
        let b = nalgebra::DVector::from_fn(N, |r, _| vs[extra][r]);
        let Ok(coef) = m.svd(true, true).solve(&b, FLOAT_RANK_TOL) else { continue };
        let mut rats = Vec::with_capacity(basis.len());
        for c in coef.iter() {
            // the tolerance must sit well below the 1/q² accuracy any
            // convergent with q <= max_den reaches for irrational input
            let tol = (0.1 / (max_den as f64).powi(2)).min(1e-13) * (1.0 + c.abs());
            match crate::exact::rationalize(*c, max_den, tol) {
                Some(r) => rats.push(r),
                None => break,
            }
        }
        if rats.len() != basis.len() {
            continue;
        }
        let l = lcm_denoms(rats.iter());
        let mut ints = vec![0i64; k];
        ints[extra] = l;
        for (bi, r) in basis.iter().zip(&rats) {
            ints[*bi] = -(*r * Rat::from_integer(l)).to_integer();
        }
        return Relation { related: true, coefficients: Some(normalize_relation(ints)), exact: false };
    }
    not_related
}

fn real_rank<const N: usize>(vs: &[[f64; N]], idx: &[usize]) -> usize {
    let m = DMatrix::from_fn(N, idx.len(), |r, c| vs[idx[c]][r]);
    let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    m.svd(false, false).singular_values.iter().filter(|s| **s > FLOAT_RANK_TOL * scale).count()
}

/// Real rank of float vectors.
pub fn real_rank_f64<const N: usize>(vs: &[[f64; N]]) -> usize {
    let idx: Vec<usize> = (0..vs.len()).collect();
    if idx.is_empty() {
        0
    } else {
        real_rank(vs, &idx)
    }
}

/// Real rank of exact vectors (exact elimination).
pub fn real_rank_exact<const N: usize>(vs: &[[QSqrt3; N]]) -> usize {
    let mut rows: Vec<[QSqrt3; N]> = vs.to_vec();
    let mut rank = 0;
    for col in 0..N {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else { continue };
        rows.swap(rank, p);
        let piv = rows[rank];
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let f = rows[r][col] / piv[col];
                rows[r] = sub(&rows[r], &scale(f, &piv));
            }
        }
        rank += 1;
    }
    rank
}

/// Integer combination `Σ cᵢ vᵢ` of float vectors with small norm, from
/// continued-fraction convergents of the ratio of two parallel vectors.
pub fn short_parallel_combination(v: [f64; 2], w: [f64; 2], max_den: i64, eps: f64) -> Option<(i64, i64)> {
    let (i, _) = v.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
    let ratio = w[i] / v[i];
    convergents(ratio, max_den).into_iter().find_map(|(p, q)| {
        // q·w − p·v
        let d = [q as f64 * w[0] - p as f64 * v[0], q as f64 * w[1] - p as f64 * v[1]];
        (norm_f64(&d) < eps && (p, q) != (0, 0)).then_some((-p, q))
    })
}

pub fn is_parallel_exact(a: &Vec3Q, b: &Vec3Q) -> bool {
    is_zero_vec(&cross(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(xs: [i64; 3]) -> Vec3Q {
        vq(xs)
    }

    #[test]
    fn translations_commute_and_add() {
        let a = Isometry::translation(pt([1, 2, 0]));
        let b = Isometry::translation(pt([0, -1, 5]));
        assert_eq!(a.compose(&b).key(), Isometry::translation(pt([1, 1, 5])).key());
        assert_eq!(a.compose(&b).key(), b.compose(&a).key());
    }

    #[test]
    fn half_turn_is_involution() {
        let r = rotation(e3(), Angle::half_turn());
        assert!(r.is_exact());
        assert!(r.compose(&r).is_identity());
    }

    #[test]
    fn screw_squares() {
        let s = screw(e3(), Angle::turns(1, 3), e3());
        assert!(s.is_exact());
        let s2 = s.compose(&s);
        let expected = screw(e3(), Angle::turns(2, 3), pt([0, 0, 2]));
        assert_eq!(s2.key(), expected.key());
        // float oracle: explicit matrix product
        let f = s.to_float();
        let (sn, cs) = (TAU / 3.0).sin_cos();
        let m = [[cs, -sn, 0.0], [sn, cs, 0.0], [0.0, 0.0, 1.0]];
        let mut mm = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                mm[i][j] = (0..3).map(|k| m[i][k] * m[k][j]).sum();
                assert!((f.linear[i][j] - m[i][j]).abs() < 1e-15);
                assert!((s2.linear_f64()[i][j] - mm[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn apply_examples() {
        let x = pt([1, 2, 3]);
        assert_eq!(EuclIsometry::identity().apply_exact(&x), Some(x));
        let g = glide(pt([1, 0, 0]), pt([0, 0, 1]));
        assert_eq!(g.apply_exact(&pt([1, 0, 0])), Some(pt([-1, 0, 1])));
        let s = screw(e3(), Angle::turns(1, 4), e3());
        assert_eq!(s.apply_exact(&pt([1, 0, 0])), Some(pt([0, 1, 1])));
    }

    #[test]
    fn fixed_sets() {
        assert_eq!(Isometry::translation(e3()).fixed_points(), FixedSet::Empty);
        assert_eq!(rotation(e3(), Angle::half_turn()).fixed_points(), FixedSet::Line);
        assert_eq!(glide(pt([1, 0, 0]), e3()).fixed_points(), FixedSet::Empty);
        assert_eq!(glide(pt([1, 0, 0]), pt([0, 0, 0])).fixed_points(), FixedSet::Plane);
        assert_eq!(EuclIsometry::identity().fixed_points(), FixedSet::All);
        // a rotation about a shifted axis still has a line of fixed points
        let shifted = Isometry::translation(pt([2, 0, 0])).compose(&rotation(e3(), Angle::half_turn()));
        assert_eq!(shifted.fixed_points(), FixedSet::Line);
        assert_eq!(shifted.a_fixed_point_exact().unwrap()[0], QSqrt3::int(1));
        // rotoreflection fixes a point
        let rr = glide(e3(), pt([0, 0, 0])).compose(&rotation(e3(), Angle::turns(1, 4)));
        assert_eq!(rr.fixed_points(), FixedSet::Point);
    }

    #[test]
    fn float_rotation_fixed_line() {
        let r = rotation(e3(), Angle::radians(1.0));
        assert!(!r.is_exact());
        assert_eq!(r.fixed_points(), FixedSet::Line);
        let s = Isometry::translation(e3()).compose(&r);
        assert_eq!(s.fixed_points(), FixedSet::Empty);
    }

    #[test]
    fn exact_rotation_about_diagonal_needs_sqrt() {
        // |(1,1,1)| = √3 is in the field, so the quarter turn stays exact
        let r = rotation(pt([1, 1, 1]), Angle::turns(1, 3));
        assert!(r.is_exact());
        // 2π/3 about (1,1,1) permutes the axes
        assert_eq!(r.apply_exact(&pt([1, 0, 0])), Some(pt([0, 1, 0])));
        // |(1,1,0)| = √2 is not
        assert!(!rotation(pt([1, 1, 0]), Angle::turns(1, 4)).is_exact());
        assert!(rotation(pt([1, 1, 0]), Angle::half_turn()).is_exact());
    }

    #[test]
    fn angle_arithmetic() {
        assert_eq!(Angle::turns(1, 3).add(&Angle::turns(1, 6)), Angle::turns(1, 2));
        assert_eq!(Angle::turns(5, 4), Angle::turns(1, 4));
        assert_eq!(Angle::turns(-1, 4), Angle::Rational { p: 3, q: 4 });
        assert_eq!(Angle::turns(2, 4), Angle::half_turn());
    }

    #[test]
    fn relations() {
        let h = QSqrt3::frac(1, 2);
        let t = QSqrt3::frac(1, 3);
        let vs = VectorSet::Exact(vec![vq([1, 0]), vq([0, 1]), [h, t]]);
        let r = rationally_related(&vs, DEFAULT_DENOMINATOR_BOUND);
        assert!(r.related && r.exact);
        assert_eq!(r.coefficients, Some(vec![3, 2, -6]));
        let r = rationally_related(&VectorSet::Exact(vec![vq([1, 0]), vq([0, 1])]), DEFAULT_DENOMINATOR_BOUND);
        assert!(!r.related);
        let r = rationally_related(&VectorSet::Float(vec![[1.0, 0.0], [2f64.sqrt(), 0.0]]), DEFAULT_DENOMINATOR_BOUND);
        assert!(!r.related && !r.exact);
        let r =
            rationally_related(&VectorSet::Float(vec![[1.0, 0.0], [0.0, 1.0], [0.5, 0.25]]), DEFAULT_DENOMINATOR_BOUND);
        assert_eq!(r.coefficients, Some(vec![2, 1, -4]));
        // √3 and 1 are independent over Q
        let s3 = QSqrt3::sqrt3_times(Rat::from_integer(1));
        let r = rationally_related(&VectorSet::Exact(vec![vq([1, 0]), [s3, QSqrt3::int(0)]]), 10);
        assert!(!r.related);
    }

    #[test]
    fn parallel_combination_for_sqrt2() {
        let (a, b) = short_parallel_combination([1.0, 0.0], [2f64.sqrt(), 0.0], 1_000_000, 1e-3).unwrap();
        let v = a as f64 + b as f64 * 2f64.sqrt();
        assert!(v.abs() < 1e-3);
    }
}

//! Exact scalars for isometry data.
//!
//! Every crystallographic rotation (orders 1, 2, 3, 4, 6 and 12) has cosine
//! and sine in the quadratic field `Q(√3)`, and so does every hexagonal
//! lattice. [`QSqrt3`] is that field; [`Scalar`] abstracts over it and plain
//! `f64` so the affine machinery can be written once.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rat = Rational64;

/// Magnitude below which a float scalar is treated as zero.
pub const FLOAT_ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseScalarError {
    #[error("empty scalar")]
    Empty,
    #[error("malformed scalar `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// A number `a + b·√3` with rational `a`, `b`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct QSqrt3 {
    pub a: Rat,
    pub b: Rat,
}

impl QSqrt3 {
    pub const fn new(a: Rat, b: Rat) -> Self {
        Self { a, b }
    }

    pub fn rational(a: Rat) -> Self {
        Self { a, b: Rat::zero() }
    }

    pub fn int(n: i64) -> Self {
        Self::rational(Rat::from_integer(n))
    }

    pub fn frac(p: i64, q: i64) -> Self {
        Self::rational(Rat::new(p, q))
    }

    /// `r·√3`
    pub fn sqrt3_times(r: Rat) -> Self {
        Self { a: Rat::zero(), b: r }
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// Field conjugate `a − b√3`.
    pub fn conj(&self) -> Self {
        Self { a: self.a, b: -self.b }
    }

    /// Field norm `a² − 3b²`.
    pub fn norm(&self) -> Rat {
        self.a * self.a - Rat::from_integer(3) * self.b * self.b
    }

    /// Exact sign.
    pub fn signum(&self) -> Ordering {
        let sa = self.a.cmp(&Rat::zero());
        let sb = self.b.cmp(&Rat::zero());
        match (sa, sb) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (x, y) if x == y => x,
            // opposite signs: compare a² with 3b²
            (sa, _) => {
                let lhs = self.a * self.a;
                let rhs = Rat::from_integer(3) * self.b * self.b;
                match lhs.cmp(&rhs) {
                    Ordering::Greater => sa,
                    Ordering::Less => sa.reverse(),
                    Ordering::Equal => Ordering::Equal,
                }
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        rat_to_f64(self.a) + rat_to_f64(self.b) * 3f64.sqrt()
    }

    /// Largest integer not exceeding `self`, computed exactly.
    pub fn floor_int(&self) -> i64 {
        let mut f = self.to_f64().floor() as i64;
        loop {
            let lo = *self - QSqrt3::int(f);
            if lo.signum() == Ordering::Less {
                f -= 1;
                continue;
            }
            let hi = QSqrt3::int(f + 1) - *self;
            if hi.signum() != Ordering::Greater {
                f += 1;
                continue;
            }
            return f;
        }
    }

    pub fn recip(&self) -> Option<Self> {
        let n = self.norm();
        if n.is_zero() {
            return None;
        }
        Some(Self { a: self.a / n, b: -self.b / n })
    }

    /// Exact square root inside the field, when one exists.
    pub fn sqrt(&self) -> Option<Self> {
        match self.signum() {
            Ordering::Less => return None,
            Ordering::Equal => return Some(Self::int(0)),
            Ordering::Greater => {}
        }
        if self.b.is_zero() {
            if let Some(r) = rat_sqrt(self.a) {
                return Some(Self::rational(r));
            }
            // a = 3·s² gives s·√3
            return rat_sqrt(self.a / Rat::from_integer(3)).map(Self::sqrt3_times);
        }
        // (x + y√3)² = x² + 3y² + 2xy√3
        let disc = rat_sqrt(self.norm())?;
        let two = Rat::from_integer(2);
        for x2 in [(self.a + disc) / two, (self.a - disc) / two] {
            if x2 <= Rat::zero() {
                continue;
            }
            if let Some(x) = rat_sqrt(x2) {
                let y = self.b / (two * x);
                let cand = Self { a: x, b: y };
                if cand * cand == *self {
                    return Some(if cand.signum() == Ordering::Less { -cand } else { cand });
                }
            }
        }
        None
    }

    /// Rational coordinates `[a, b]`.
    pub fn coords(&self) -> [Rat; 2] {
        [self.a, self.b]
    }
}

pub fn rat_to_f64(r: Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational square root.
pub fn rat_sqrt(r: Rat) -> Option<Rat> {
    if r < Rat::zero() {
        return None;
    }
    let n = int_sqrt(*r.numer())?;
    let d = int_sqrt(*r.denom())?;
    Some(Rat::new(n, d))
}

fn int_sqrt(n: i64) -> Option<i64> {
    if n < 0 {
        return None;
    }
    let s = (n as f64).sqrt().round() as i64;
    (s.saturating_sub(1)..=s + 1).find(|c| *c >= 0 && c.checked_mul(*c) == Some(n))
}

impl Add for QSqrt3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { a: self.a + o.a, b: self.b + o.b }
    }
}

impl Sub for QSqrt3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { a: self.a - o.a, b: self.b - o.b }
    }
}

impl Mul for QSqrt3 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let three = Rat::from_integer(3);
        Self { a: self.a * o.a + three * self.b * o.b, b: self.a * o.b + self.b * o.a }
    }
}

impl Div for QSqrt3 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.recip().expect("division by zero in Q(sqrt3)")
    }
}

impl Neg for QSqrt3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self { a: -self.a, b: -self.b }
    }
}

fn fmt_rat(r: Rat) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for QSqrt3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a.is_zero(), self.b.is_zero()) {
            (_, true) => write!(f, "{}", fmt_rat(self.a)),
            (true, false) => write!(f, "{}*sqrt3", fmt_rat(self.b)),
            (false, false) => {
                let sign = if self.b.is_negative() { '-' } else { '+' };
                write!(f, "{}{}{}*sqrt3", fmt_rat(self.a), sign, fmt_rat(self.b.abs()))
            }
        }
    }
}

/// Parses `"p"`, `"p/q"`, decimals such as `"-0.25"`.
pub fn parse_rational(s: &str) -> Result<Rat, ParseScalarError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ParseScalarError::Empty);
    }
    let bad = || ParseScalarError::Malformed(s.to_string());
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(ParseScalarError::ZeroDenominator(s.to_string()));
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|c| c.is_ascii_digit()) || frac_part.len() > 15 {
            return Err(bad());
        }
        let neg = int_part.trim_start().starts_with('-');
        let ip: i64 = match int_part.trim() {
            "" | "-" | "+" => 0,
            t => t.parse().map_err(|_| bad())?,
        };
        let den = 10i64.pow(frac_part.len() as u32);
        let fp: i64 = frac_part.parse().map_err(|_| bad())?;
        let mag = Rat::from_integer(ip.abs()) + Rat::new(fp, den);
        return Ok(if neg { -mag } else { mag });
    }
    s.parse::<i64>().map(Rat::from_integer).map_err(|_| bad())
}

impl FromStr for QSqrt3 {
    type Err = ParseScalarError;

    /// Accepts `r`, `r*sqrt3` and `r±r*sqrt3` where each `r` is a rational.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(ParseScalarError::Empty);
        }
        let Some(body) = t.strip_suffix("*sqrt3") else {
            return parse_rational(&t).map(QSqrt3::rational);
        };
        // split off the rational part at the last top-level sign
        let split = body
            .char_indices()
            .skip(1)
            .filter(|(i, c)| (*c == '+' || *c == '-') && !body[..*i].ends_with('e'))
            .map(|(i, _)| i)
            .last();
        match split {
            None => Ok(QSqrt3::sqrt3_times(parse_rational(body)?)),
            Some(i) => {
                let a = parse_rational(&body[..i])?;
                let b = parse_rational(body[i..].trim_start_matches('+'))?;
                Ok(QSqrt3::new(a, b))
            }
        }
    }
}

/// Scalars usable as coordinates of affine maps.
pub trait Scalar:
    Copy
    + PartialEq
    + fmt::Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(n: i64) -> Self;
    /// Exact test for exact scalars, `|x| < FLOAT_ZERO_TOL` for floats.
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
    fn floor(&self) -> Self;
    fn sqrt(&self) -> Option<Self>;
    fn is_exact() -> bool;
}

impl Scalar for QSqrt3 {
    fn zero() -> Self {
        QSqrt3::int(0)
    }
    fn one() -> Self {
        QSqrt3::int(1)
    }
    fn from_i64(n: i64) -> Self {
        QSqrt3::int(n)
    }
    fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
    fn to_f64(&self) -> f64 {
        QSqrt3::to_f64(self)
    }
    fn floor(&self) -> Self {
        QSqrt3::int(self.floor_int())
    }
    fn sqrt(&self) -> Option<Self> {
        QSqrt3::sqrt(self)
    }
    fn is_exact() -> bool {
        true
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn is_zero(&self) -> bool {
        self.abs() < FLOAT_ZERO_TOL
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn floor(&self) -> Self {
        // snap values within tolerance of an integer before flooring
        let r = self.round();
        if (self - r).abs() < FLOAT_ZERO_TOL {
            r
        } else {
            f64::floor(*self)
        }
    }
    fn sqrt(&self) -> Option<Self> {
        (*self >= 0.0).then(|| f64::sqrt(*self))
    }
    fn is_exact() -> bool {
        false
    }
}

/// Continued-fraction convergents `p/q` of `x` with `q <= max_den`.
pub fn convergents(x: f64, max_den: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    if !x.is_finite() {
        return out;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let (Some(p2), Some(q2)) =
            (a.checked_mul(p1).and_then(|v| v.checked_add(p0)), a.checked_mul(q1).and_then(|v| v.checked_add(q0)))
        else {
            break;
        };
        if q2 > max_den {
            break;
        }
        out.push((p2, q2));
        let frac = r - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    out
}

/// Best rational `p/q` with `q <= max_den` matching `x` within `tol`.
pub fn rationalize(x: f64, max_den: i64, tol: f64) -> Option<Rat> {
    convergents(x, max_den)
        .into_iter()
        .find(|&(p, q)| (x - p as f64 / q as f64).abs() <= tol)
        .map(|(p, q)| Rat::new(p, q))
}

pub fn lcm_denoms<'a>(rs: impl IntoIterator<Item = &'a Rat>) -> i64 {
    rs.into_iter().fold(1i64, |acc, r| acc.lcm(r.denom()))
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

pub fn rat_one() -> Rat {
    Rat::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(a: (i64, i64), b: (i64, i64)) -> QSqrt3 {
        QSqrt3::new(Rat::new(a.0, a.1), Rat::new(b.0, b.1))
    }

    #[test]
    fn field_inverse_and_sign() {
        let x = q((2, 1), (-1, 1)); // 2 − √3 > 0
        assert_eq!(x.signum(), Ordering::Greater);
        assert_eq!(x * x.recip().unwrap(), QSqrt3::int(1));
        assert_eq!(q((1, 1), (-1, 1)).signum(), Ordering::Less);
        assert_eq!(x.floor_int(), 0);
        assert_eq!(q((0, 1), (1, 2)).floor_int(), 0); // √3/2
        assert_eq!(q((0, 1), (-1, 2)).floor_int(), -1);
        assert_eq!(QSqrt3::int(3).floor_int(), 3);
    }

    #[test]
    fn exact_square_roots() {
        assert_eq!(QSqrt3::int(3).sqrt(), Some(q((0, 1), (1, 1))));
        assert_eq!(QSqrt3::frac(9, 4).sqrt(), Some(QSqrt3::frac(3, 2)));
        // (1 + √3)² = 4 + 2√3
        assert_eq!(q((4, 1), (2, 1)).sqrt(), Some(q((1, 1), (1, 1))));
        assert_eq!(QSqrt3::int(2).sqrt(), None);
        assert_eq!(QSqrt3::int(-1).sqrt(), None);
    }

    #[test]
    fn parse_and_display() {
        for s in ["1/2", "-3", "1/2*sqrt3", "1-1/2*sqrt3", "-2/3+5*sqrt3"] {
            let v: QSqrt3 = s.parse().unwrap();
            assert_eq!(v.to_string(), s);
        }
        assert_eq!("2/4".parse::<QSqrt3>().unwrap(), QSqrt3::frac(1, 2));
        assert_eq!("0.25".parse::<QSqrt3>().unwrap(), QSqrt3::frac(1, 4));
        assert_eq!("-1.5".parse::<QSqrt3>().unwrap(), QSqrt3::frac(-3, 2));
        assert!("1/0".parse::<QSqrt3>().is_err());
        assert!("abc".parse::<QSqrt3>().is_err());
    }

    #[test]
    fn convergents_of_sqrt2() {
        let c = convergents(2f64.sqrt(), 1000);
        assert!(c.contains(&(99, 70)));
        assert!(c.contains(&(577, 408)));
        assert_eq!(rationalize(0.375, 100, 1e-12), Some(Rat::new(3, 8)));
        assert_eq!(rationalize(2f64.sqrt(), 1_000_000, 1e-14), None);
    }

    proptest! {
        #[test]
        fn arithmetic_matches_floats(a in -50i64..50, b in -50i64..50, c in -50i64..50, d in 1i64..20) {
            let x = q((a, d), (b, d));
            let y = q((c, 1), (1, d));
            let fx = x.to_f64();
            let fy = y.to_f64();
            prop_assert!(((x * y).to_f64() - fx * fy).abs() < 1e-9 * (1.0 + (fx * fy).abs()));
            prop_assert!(((x + y).to_f64() - (fx + fy)).abs() < 1e-9);
            if let Some(r) = y.recip() {
                prop_assert!((r.to_f64() - 1.0 / fy).abs() < 1e-9 * (1.0 + (1.0 / fy).abs()));
            }
            prop_assert_eq!(x.floor_int() as f64, fx.floor());
        }
    }
}

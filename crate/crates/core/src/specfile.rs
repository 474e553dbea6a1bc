//! JSON group-spec files. Rationals travel as `"p/q"` strings so exact data
//! stays exact through the text boundary.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::euclid::{glide, rotation, rotation_f64, screw, Affine, Angle, EuclIsometry, Isometry, Provenance, Vec3Q};
use crate::exact::QSqrt3;
use crate::group::{Ambient, GroupError, GroupSpec};
use crate::quat::{phi_cover, Quaternion, SO4Element};

/// Largest allowed `| |q| − 1 |` for a quaternion in a spec file.
pub const UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SpecFileError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Group(#[from] GroupError),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SpecFileError {
    SpecFileError::Invalid { field: field.into(), message: message.into() }
}

/// A coordinate: exact element of `Q(√3)` or a float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Number {
    Exact(QSqrt3),
    Float(f64),
}

impl Number {
    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(x) => x.to_f64(),
            Number::Float(x) => *x,
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(x) => write!(f, "{x}"),
            Number::Float(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Int(i64),
    Float(f64),
    Text(String),
}

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match RawNumber::deserialize(d)? {
            RawNumber::Int(n) => Ok(Number::Exact(QSqrt3::int(n))),
            RawNumber::Float(x) if x.is_finite() => Ok(Number::Float(x)),
            RawNumber::Float(x) => Err(serde::de::Error::custom(format!("non-finite number {x}"))),
            RawNumber::Text(s) => s.parse::<QSqrt3>().map(Number::Exact).map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for Number {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Number::Exact(x) => s.serialize_str(&x.to_string()),
            Number::Float(x) => s.serialize_f64(*x),
        }
    }
}

/// `{"rational": [p, q]}` is `2πp/q`; `{"radians": x}` is a float angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum AngleSpec {
    Rational([i64; 2]),
    Radians(f64),
}

impl AngleSpec {
    fn to_angle(self, field: &str) -> Result<Angle, SpecFileError> {
        match self {
            AngleSpec::Rational([p, q]) => {
                if q == 0 {
                    return Err(invalid(field, "angle denominator is zero"));
                }
                Ok(Angle::turns(p, q))
            }
            AngleSpec::Radians(x) if x.is_finite() => Ok(Angle::radians(x)),
            AngleSpec::Radians(x) => Err(invalid(field, format!("non-finite angle {x}"))),
        }
    }

    fn normalized(self) -> Self {
        match self {
            AngleSpec::Rational([p, q]) if q != 0 => match Angle::turns(p, q) {
                Angle::Rational { p, q } => AngleSpec::Rational([p, q]),
                Angle::Irrational(_) => self,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Translation,
    Rotation,
    Screw,
    Glide,
}

/// One Euclidean generator.
/// - translation: `vector`
/// - rotation: `axis`, `angle` (about the line through the origin)
/// - screw: `axis`, `angle`, `pitch`; rotation followed by `t_{pitch·axis}`
/// - glide: `axis` (mirror normal), `vector` (translation after the reflection)
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EuclideanGenerator {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[Number; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<[Number; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<AngleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<Number>,
}

/// One spherical generator `x ↦ q₁ x q₂⁻¹`, quaternions as `[w, x, y, z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereGenerator {
    pub q1: [f64; 4],
    pub q2: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum GeneratorSpec {
    Euclidean(EuclideanGenerator),
    Sphere(SphereGenerator),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmbientName {
    Euclidean3,
    Sphere3,
}

impl From<AmbientName> for Ambient {
    fn from(a: AmbientName) -> Self {
        match a {
            AmbientName::Euclidean3 => Ambient::Euclidean3,
            AmbientName::Sphere3 => Ambient::Sphere3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawSpecFile")]
pub struct GroupSpecFile {
    pub ambient: AmbientName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// The identity group; `generators` must then be empty.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub trivial: bool,
    #[serde(default)]
    pub generators: Vec<GeneratorSpec>,
}

/// Generators are decoded once the ambient space is known.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpecFile {
    ambient: AmbientName,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    trivial: bool,
    #[serde(default)]
    generators: Vec<serde_json::Value>,
}

impl TryFrom<RawSpecFile> for GroupSpecFile {
    type Error = String;

    fn try_from(raw: RawSpecFile) -> Result<Self, String> {
        let generators = raw
            .generators
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let g = match raw.ambient {
                    AmbientName::Euclidean3 => serde_json::from_value(v).map(GeneratorSpec::Euclidean),
                    AmbientName::Sphere3 => serde_json::from_value(v).map(GeneratorSpec::Sphere),
                };
                g.map_err(|e| format!("generators[{i}]: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { ambient: raw.ambient, label: raw.label, trivial: raw.trivial, generators })
    }
}

fn exact_vec(v: &[Number; 3]) -> Option<Vec3Q> {
    let mut out = [QSqrt3::int(0); 3];
    for (o, x) in out.iter_mut().zip(v) {
        match x {
            Number::Exact(q) => *o = *q,
            Number::Float(_) => return None,
        }
    }
    Some(out)
}

fn float_vec(v: &[Number; 3]) -> [f64; 3] {
    v.map(|x| x.to_f64())
}

fn require<T: Copy>(x: Option<T>, field: &str, kind: Kind) -> Result<T, SpecFileError> {
    x.ok_or_else(|| invalid(field, format!("required for kind {kind:?}").to_lowercase()))
}

fn forbid<T>(x: &Option<T>, field: &str, kind: Kind) -> Result<(), SpecFileError> {
    match x {
        Some(_) => Err(invalid(field, format!("not allowed for kind {kind:?}").to_lowercase())),
        None => Ok(()),
    }
}

fn nonzero(v: &[Number; 3], field: &str) -> Result<(), SpecFileError> {
    if v.iter().all(|x| x.to_f64() == 0.0) {
        return Err(invalid(field, "must be nonzero"));
    }
    Ok(())
}

impl EuclideanGenerator {
    fn to_isometry(&self, at: &str) -> Result<EuclIsometry, SpecFileError> {
        let f = |name: &str| format!("{at}.{name}");
        let k = self.kind;
        match k {
            Kind::Translation => {
                let v = require(self.vector.as_ref(), &f("vector"), k)?;
                forbid(&self.axis, &f("axis"), k)?;
                forbid(&self.angle, &f("angle"), k)?;
                forbid(&self.pitch, &f("pitch"), k)?;
                Ok(match exact_vec(v) {
                    Some(e) => Isometry::translation(e),
                    None => Isometry::translation_f64(float_vec(v)),
                })
            }
            Kind::Rotation | Kind::Screw => {
                let axis = require(self.axis.as_ref(), &f("axis"), k)?;
                nonzero(axis, &f("axis"))?;
                let angle = require(self.angle, &f("angle"), k)?.to_angle(&f("angle"))?;
                forbid(&self.vector, &f("vector"), k)?;
                let pitch = if k == Kind::Screw {
                    Some(require(self.pitch, &f("pitch"), k)?)
                } else {
                    forbid(&self.pitch, &f("pitch"), k)?;
                    None
                };
                match (exact_vec(axis), pitch) {
                    (Some(a), None) => Ok(rotation(a, angle)),
                    (Some(a), Some(Number::Exact(p))) => Ok(screw(a, angle, a.map(|x| p * x))),
                    (a, p) => {
                        let af = a.map_or_else(|| float_vec(axis), |e| e.map(|x| x.to_f64()));
                        let r = rotation_f64(af, angle);
                        match p {
                            None => Ok(r),
                            Some(p) => {
                                let pf = p.to_f64();
                                let mut g = Isometry::translation_f64(af.map(|x| pf * x)).compose(&r);
                                g.provenance = Some(Provenance::Screw(angle));
                                Ok(g)
                            }
                        }
                    }
                }
            }
            Kind::Glide => {
                let n = require(self.axis.as_ref(), &f("axis"), k)?;
                nonzero(n, &f("axis"))?;
                let v = require(self.vector.as_ref(), &f("vector"), k)?;
                forbid(&self.angle, &f("angle"), k)?;
                forbid(&self.pitch, &f("pitch"), k)?;
                match (exact_vec(n), exact_vec(v)) {
                    (Some(n), Some(v)) => Ok(glide(n, v)),
                    _ => {
                        let nf = float_vec(n);
                        let n2: f64 = nf.iter().map(|x| x * x).sum();
                        let linear = std::array::from_fn(|i| {
                            std::array::from_fn(|j| (if i == j { 1.0 } else { 0.0 }) - 2.0 * nf[i] * nf[j] / n2)
                        });
                        Ok(Isometry::float(Affine { linear, translation: float_vec(v) }, Some(Provenance::Glide)))
                    }
                }
            }
        }
    }

    fn normalized(&self) -> Self {
        Self { angle: self.angle.map(AngleSpec::normalized), ..self.clone() }
    }
}

fn unit_quaternion(q: [f64; 4], field: &str) -> Result<Quaternion, SpecFileError> {
    let x = Quaternion::from_array(q);
    let n = x.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(invalid(field, format!("quaternion has norm {n}, expected 1 within {UNIT_TOL}")));
    }
    Ok(x.normalized())
}

impl SphereGenerator {
    fn to_element(&self, at: &str) -> Result<SO4Element, SpecFileError> {
        let q1 = unit_quaternion(self.q1, &format!("{at}.q1"))?;
        let q2 = unit_quaternion(self.q2, &format!("{at}.q2"))?;
        phi_cover(q1, q2).map_err(|e| invalid(at, e.to_string()))
    }
}

impl GroupSpecFile {
    pub fn parse(text: &str) -> Result<Self, SpecFileError> {
        let f: GroupSpecFile = serde_json::from_str(text)?;
        f.to_spec()?;
        Ok(f.normalized())
    }

    pub fn read(path: &std::path::Path) -> Result<Self, SpecFileError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    /// Canonical form: angles in lowest terms.
    pub fn normalized(&self) -> Self {
        let generators = self
            .generators
            .iter()
            .map(|g| match g {
                GeneratorSpec::Euclidean(e) => GeneratorSpec::Euclidean(e.normalized()),
                s => s.clone(),
            })
            .collect();
        Self { generators, ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec file serializes")
    }

    pub fn to_spec(&self) -> Result<GroupSpec, SpecFileError> {
        let ambient: Ambient = self.ambient.into();
        let label = self.label.clone().unwrap_or_else(|| "spec".into());
        if self.trivial {
            if !self.generators.is_empty() {
                return Err(invalid("generators", "must be empty when trivial is true"));
            }
            return Ok(GroupSpec::trivial(ambient, label));
        }
        if self.generators.is_empty() {
            return Err(invalid("generators", "empty; set \"trivial\": true for the identity group"));
        }
        match ambient {
            Ambient::Euclidean3 => {
                let gens = self
                    .generators
                    .iter()
                    .enumerate()
                    .map(|(i, g)| match g {
                        GeneratorSpec::Euclidean(e) => e.to_isometry(&format!("generators[{i}]")),
                        GeneratorSpec::Sphere(_) => {
                            Err(invalid(format!("generators[{i}]"), "spherical generator in a euclidean3 spec"))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(GroupSpec::euclidean(label, gens)?)
            }
            Ambient::Sphere3 => {
                let gens = self
                    .generators
                    .iter()
                    .enumerate()
                    .map(|(i, g)| match g {
                        GeneratorSpec::Sphere(s) => s.to_element(&format!("generators[{i}]")),
                        GeneratorSpec::Euclidean(_) => {
                            Err(invalid(format!("generators[{i}]"), "euclidean generator in a sphere3 spec"))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(GroupSpec::sphere(label, gens)?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euclid::e3;
    use crate::group::{Generators, GroupElement};

    const SCREW: &str = r#"{
        "ambient": "euclidean3",
        "generators": [{"kind": "screw", "axis": [0, 0, 1], "angle": {"rational": [2, 8]}, "pitch": "2/2"}]
    }"#;

    fn keys(spec: &GroupSpec) -> Vec<String> {
        match &spec.generators {
            Generators::Euclidean(g) => g.iter().map(|x| format!("{:?}", x.key())).collect(),
            Generators::Sphere(g) => g.iter().map(|x| format!("{:?}", GroupElement::key(x))).collect(),
        }
    }

    #[test]
    fn screw_file_builds_the_exact_screw() {
        let f = GroupSpecFile::parse(SCREW).unwrap();
        let spec = f.to_spec().unwrap();
        let Generators::Euclidean(g) = &spec.generators else { panic!() };
        assert_eq!(g[0].key(), screw(e3(), Angle::turns(1, 4), e3()).key());
        let GeneratorSpec::Euclidean(e) = &f.generators[0] else { panic!() };
        assert_eq!(e.angle, Some(AngleSpec::Rational([1, 4])));
    }

    #[test]
    fn round_trip_is_identical() {
        let texts = [
            SCREW,
            r#"{"ambient": "euclidean3", "generators": [{"kind": "glide", "axis": [1, 0, 0], "vector": ["0", 0, "1/2+1/2*sqrt3"]}]}"#,
            r#"{"ambient": "euclidean3", "generators": [{"kind": "translation", "vector": [0.5, 1.25, 0]}]}"#,
            r#"{"ambient": "sphere3", "label": "lens", "generators": [{"q1": [0.5, 0.8660254037844386, 0, 0], "q2": [1, 0, 0, 0]}]}"#,
            r#"{"ambient": "euclidean3", "trivial": true}"#,
        ];
        for t in texts {
            let a = GroupSpecFile::parse(t).unwrap();
            let b = GroupSpecFile::parse(&a.to_json()).unwrap();
            assert_eq!(a, b);
            assert_eq!(keys(&a.to_spec().unwrap()), keys(&b.to_spec().unwrap()));
        }
    }

    #[test]
    fn rationals_are_normalized() {
        let f = GroupSpecFile::parse(
            r#"{"ambient": "euclidean3", "generators": [{"kind": "translation", "vector": ["2/4", "-6/3", 0]}]}"#,
        )
        .unwrap();
        let GeneratorSpec::Euclidean(e) = &f.generators[0] else { panic!() };
        let v = e.vector.unwrap();
        assert_eq!(v[0], Number::Exact(QSqrt3::frac(1, 2)));
        assert!(f.to_json().contains("\"1/2\"") && f.to_json().contains("\"-2\""));
        let spec = f.to_spec().unwrap();
        let Generators::Euclidean(g) = &spec.generators else { panic!() };
        assert_eq!(g[0].key(), Isometry::translation([QSqrt3::frac(1, 2), QSqrt3::int(-2), QSqrt3::int(0)]).key());
    }

    #[test]
    fn malformed_files_name_the_problem() {
        let unknown = r#"{"ambient": "euclidean3", "generators": [], "colour": 1}"#;
        let e = GroupSpecFile::parse(unknown).unwrap_err().to_string();
        assert!(e.contains("colour") && e.contains("line"), "{e}");
        let nonunit = r#"{"ambient": "sphere3", "generators": [{"q1": [1, 0.01, 0, 0], "q2": [1, 0, 0, 0]}]}"#;
        let e = GroupSpecFile::parse(nonunit).unwrap_err().to_string();
        assert!(e.contains("generators[0].q1"), "{e}");
        let missing = r#"{"ambient": "euclidean3", "generators": [{"kind": "rotation", "axis": [0, 0, 1]}]}"#;
        let e = GroupSpecFile::parse(missing).unwrap_err().to_string();
        assert!(e.contains("generators[0].angle"), "{e}");
        let empty = r#"{"ambient": "euclidean3", "generators": []}"#;
        assert!(GroupSpecFile::parse(empty).unwrap_err().to_string().contains("trivial"));
        let mixed = r#"{"ambient": "sphere3", "generators": [{"kind": "translation", "vector": [1, 0, 0]}]}"#;
        assert!(GroupSpecFile::parse(mixed).is_err());
        let zero_den = r#"{"ambient": "euclidean3", "generators": [{"kind": "translation", "vector": ["1/0", 0, 0]}]}"#;
        assert!(GroupSpecFile::parse(zero_den).is_err());
    }
}

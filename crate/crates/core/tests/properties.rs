use proptest::prelude::*;
use spaceform::catalog::{all_cases, build_case, scale_spec, Builder, Expected};
use spaceform::euclid::{Affine, EuclIsometry, Isometry};
use spaceform::exact::QSqrt3;
use spaceform::foliation::{run_pipeline, Orbifold2};
use spaceform::group::{EnumerationBudget, GroupSpec};
use spaceform::quat::{phi_cover, Quaternion};
use spaceform::specfile::GroupSpecFile;

fn accepted(builder: fn(&Builder) -> bool) -> Vec<(String, GroupSpec, Orbifold2)> {
    all_cases()
        .into_iter()
        .filter(|c| builder(&c.builder))
        .filter_map(|c| match &c.expected {
            Expected::Accept(o) => Some((c.id.to_string(), build_case(&c).unwrap().spec, o.clone())),
            Expected::Reject(_) => None,
        })
        .collect()
}

fn euclidean_cases() -> Vec<(String, GroupSpec, Orbifold2)> {
    accepted(|b| matches!(b, Builder::Euclidean(_)))
}

fn spherical_cases() -> Vec<(String, GroupSpec, Orbifold2)> {
    accepted(|b| matches!(b, Builder::Spherical { .. }))
}

fn orbifold_of(spec: &GroupSpec) -> Option<Orbifold2> {
    let budget = match spec.ambient() {
        spaceform::group::Ambient::Sphere3 => EnumerationBudget::sphere_default(),
        _ => EnumerationBudget::default(),
    };
    run_pipeline(spec, &budget).ok()?.orbifold
}

/// Rotation about `e3` with Pythagorean cosine and sine, an optional half-turn
/// about `e1`, then a rational translation.
fn vertical_preserving(a: i64, b: i64, flip: bool, t: [(i64, i64); 3]) -> EuclIsometry {
    let r = a * a + b * b;
    let c = QSqrt3::frac(a * a - b * b, r);
    let s = QSqrt3::frac(2 * a * b, r);
    let (z, one) = (QSqrt3::int(0), QSqrt3::int(1));
    let rot = Isometry::exact(Affine { linear: [[c, -s, z], [s, c, z], [z, z, one]], translation: [z; 3] }, None);
    let f = if flip { -one } else { one };
    let flip = Isometry::exact(Affine { linear: [[one, z, z], [z, f, z], [z, z, f]], translation: [z; 3] }, None);
    let shift = Isometry::translation(t.map(|(p, q)| QSqrt3::frac(p, q)));
    shift.compose(&flip).compose(&rot)
}

fn rational() -> impl Strategy<Value = (i64, i64)> {
    (-6i64..=6, 1i64..=5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn euclidean_classification_is_conjugation_invariant(
        idx in any::<prop::sample::Index>(),
        a in 1i64..6,
        b in 0i64..6,
        flip in any::<bool>(),
        t in [rational(), rational(), rational()],
    ) {
        let cases = euclidean_cases();
        let (id, spec, expected) = &cases[idx.index(cases.len())];
        let c = vertical_preserving(a, b, flip, t);
        let conj = spec.conjugated_euclidean(&c).unwrap();
        prop_assert_eq!(orbifold_of(&conj), Some(expected.clone()), "case {}", id);
    }

    #[test]
    fn spherical_classification_is_conjugation_invariant(
        idx in any::<prop::sample::Index>(),
        alpha in 0.0..std::f64::consts::TAU,
        beta in 0.0..std::f64::consts::TAU,
        axis in [-1.0f64..1.0, -1.0f64..1.0, 0.1f64..1.0],
    ) {
        let cases = spherical_cases();
        let (id, spec, expected) = &cases[idx.index(cases.len())];
        let c = phi_cover(Quaternion::exp_i(alpha), Quaternion::from_axis_angle(axis, beta)).unwrap();
        let conj = spec.conjugated_sphere(&c).unwrap();
        prop_assert_eq!(orbifold_of(&conj), Some(expected.clone()), "case {}", id);
    }

    #[test]
    fn euclidean_classification_is_homothety_invariant(
        idx in any::<prop::sample::Index>(),
        p in 1i64..8,
        q in 1i64..8,
    ) {
        let cases = euclidean_cases();
        let (id, spec, expected) = &cases[idx.index(cases.len())];
        let scaled = scale_spec(spec, QSqrt3::frac(p, q)).unwrap();
        prop_assert_eq!(orbifold_of(&scaled), Some(expected.clone()), "case {}", id);
    }

    #[test]
    fn spec_files_round_trip(gens in prop::collection::vec(generator_json(), 1..4), label in "[a-z]{1,8}") {
        let text = format!(r#"{{"ambient": "euclidean3", "label": "{label}", "generators": [{}]}}"#, gens.join(", "));
        let a = GroupSpecFile::parse(&text).unwrap();
        let b = GroupSpecFile::parse(&a.to_json()).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.to_json(), b.to_json());
    }
}

fn number() -> impl Strategy<Value = String> {
    prop_oneof![
        (-9i64..=9, 1i64..=9).prop_map(|(p, q)| format!("\"{p}/{q}\"")),
        (-9i64..=9, 1i64..=4, -3i64..=3).prop_map(|(p, q, r)| {
            let sign = if r < 0 { '-' } else { '+' };
            format!("\"{p}/{q}{sign}{}*sqrt3\"", r.abs())
        }),
        (-9i64..=9).prop_map(|n| n.to_string()),
    ]
}

fn nonzero_vector() -> impl Strategy<Value = String> {
    (number(), number(), 1i64..=9).prop_map(|(x, y, z)| format!("[{x}, {y}, {z}]"))
}

fn generator_json() -> impl Strategy<Value = String> {
    let vertical = Just("[0, 0, 1]".to_string());
    prop_oneof![
        [number(), number(), number()]
            .prop_map(|[x, y, z]| format!(r#"{{"kind": "translation", "vector": [{x}, {y}, {z}]}}"#)),
        (vertical.clone(), 1i64..12, 1i64..12).prop_map(|(a, p, q)| format!(
            r#"{{"kind": "rotation", "axis": {a}, "angle": {{"rational": [{p}, {q}]}}}}"#
        )),
        (vertical, 1i64..12, 1i64..12, number()).prop_map(|(a, p, q, h)| {
            format!(r#"{{"kind": "screw", "axis": {a}, "angle": {{"rational": [{p}, {q}]}}, "pitch": {h}}}"#)
        }),
        (nonzero_vector(), 0.1f64..6.0)
            .prop_map(|(a, r)| format!(r#"{{"kind": "rotation", "axis": {a}, "angle": {{"radians": {r}}}}}"#)),
    ]
}

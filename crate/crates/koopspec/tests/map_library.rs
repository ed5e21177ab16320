use koopspec::maps::{check_measure_preservation, koopman_norm_bound, Angle, BuiltinMap, MapOracle, Oracle};
use koopspec::rational::q;
use koopspec::space::{DyadicTree, Point, SpaceDesc};
use proptest::prelude::*;

fn oracle(space: SpaceDesc, map: BuiltinMap) -> MapOracle {
    MapOracle::new(space, map).unwrap()
}

#[test]
fn evaluation_examples() {
    let r = oracle(SpaceDesc::Circle, BuiltinMap::Rotation(Angle::rational(1, 4)));
    let y = r.evaluate(&Point::real(0.9), 53).unwrap().as_real().unwrap();
    assert!((y - 0.15).abs() < 1e-15);
    let id = oracle(SpaceDesc::UnitInterval, BuiltinMap::Identity);
    assert_eq!(id.evaluate(&Point::real(0.3), 53).unwrap(), Point::real(0.3));
    let c = oracle(SpaceDesc::uniform_atoms(3), BuiltinMap::Cycle(3));
    assert_eq!(c.evaluate(&Point::atom(2), 53).unwrap(), Point::atom(0));
    assert!(c.evaluate(&Point::atom(3), 53).is_err());
}

#[test]
fn koopman_norm_examples() {
    let r = oracle(SpaceDesc::Circle, BuiltinMap::Rotation(Angle::Golden));
    assert_eq!(koopman_norm_bound(&r, 3.0).unwrap(), 1.0);
    let id = oracle(SpaceDesc::UnitInterval, BuiltinMap::Identity);
    assert_eq!(koopman_norm_bound(&id, 1.7).unwrap(), 1.0);
    // push-forward of Lebesgue under x/2 has density 2 on [0, 1/2)
    let h = oracle(SpaceDesc::UnitInterval, BuiltinMap::Halving);
    assert!((koopman_norm_bound(&h, 2.0).unwrap() - 2f64.powf(0.5)).abs() < 1e-15);
}

#[test]
fn measure_preservation_examples() {
    let tree = DyadicTree::build(SpaceDesc::UnitInterval, 3).unwrap();
    let r = oracle(SpaceDesc::UnitInterval, BuiltinMap::Rotation(Angle::rational(1, 4)));
    assert!(check_measure_preservation(&r, &tree, 3, 4096).unwrap().max_deviation <= 0.05);
    let id = oracle(SpaceDesc::UnitInterval, BuiltinMap::Identity);
    assert_eq!(check_measure_preservation(&id, &tree, 3, 4096).unwrap().max_deviation, 0.0);
    let h = oracle(SpaceDesc::UnitInterval, BuiltinMap::Halving);
    let rep = check_measure_preservation(&h, &tree, 1, 4096).unwrap();
    assert_eq!(rep.atoms[0], (0.5, 1.0));
    assert!((rep.max_deviation - 0.5).abs() < 1e-12);
}

#[test]
fn maps_must_act_on_their_space() {
    assert!(MapOracle::new(SpaceDesc::Circle, BuiltinMap::Halving).is_err());
    assert!(MapOracle::new(SpaceDesc::uniform_atoms(3), BuiltinMap::Cycle(4)).is_err());
    assert!(MapOracle::new(SpaceDesc::uniform_atoms(3), BuiltinMap::AtomPermutation(vec![0, 0, 1])).is_err());
}

#[test]
fn declared_preserving_maps_pass_the_sampled_check() {
    let samples = 4096;
    let tol = 3.0 / (samples as f64).sqrt();
    let cases = vec![
        (SpaceDesc::Circle, BuiltinMap::Rotation(Angle::Golden)),
        (SpaceDesc::Circle, BuiltinMap::Rotation(Angle::rational(2, 7))),
        (SpaceDesc::UnitInterval, BuiltinMap::Identity),
        (SpaceDesc::uniform_atoms(5), BuiltinMap::Cycle(5)),
        (SpaceDesc::atoms(vec![q(1, 4); 4]), BuiltinMap::AtomPermutation(vec![1, 0, 3, 2])),
        (
            SpaceDesc::union(vec![(q(1, 2), SpaceDesc::uniform_atoms(2)), (q(1, 2), SpaceDesc::Circle)]),
            BuiltinMap::BlockUnion(vec![BuiltinMap::Cycle(2), BuiltinMap::Rotation(Angle::Golden)]),
        ),
    ];
    for (space, map) in cases {
        let f = oracle(space.clone(), map);
        assert!(f.flags().measure_preserving);
        let tree = DyadicTree::build(space, 4).unwrap();
        let r = check_measure_preservation(&f, &tree, 4, samples).unwrap();
        assert!(r.max_deviation <= tol, "{}: {}", f.name(), r.max_deviation);
    }
}

proptest! {
    #[test]
    fn rotation_matches_mod_one_arithmetic(x in 0.0f64..1.0, num in 0i64..64) {
        let theta = num as f64 / 64.0;
        let f = oracle(SpaceDesc::Circle, BuiltinMap::Rotation(Angle::rational(num, 64)));
        let y = f.evaluate(&Point::real(x), 53).unwrap().as_real().unwrap();
        let want = (x + theta).rem_euclid(1.0);
        let d = (y - want).abs();
        prop_assert!(d.min(1.0 - d) < 1e-15);
    }

    #[test]
    fn irrational_approximants_are_consistent(x in 0.0f64..1.0, k in 4u32..30, extra in 1u32..20) {
        let f = oracle(SpaceDesc::Circle, BuiltinMap::Rotation(Angle::Golden));
        let a = f.evaluate(&Point::real(x), k).unwrap().as_real().unwrap();
        let b = f.evaluate(&Point::real(x), k + extra).unwrap().as_real().unwrap();
        let d = (a - b).abs();
        prop_assert!(d.min(1.0 - d) <= (-(k as f64)).exp2() + (-((k + extra) as f64)).exp2() + 1e-15);
    }

    #[test]
    fn query_count_advances_by_one(xs in prop::collection::vec(0.0f64..1.0, 1..20)) {
        let f = oracle(SpaceDesc::Circle, BuiltinMap::Rotation(Angle::Golden));
        for (i, x) in xs.iter().enumerate() {
            prop_assert_eq!(f.query_count(), i as u64);
            f.evaluate(&Point::real(*x), 30).unwrap();
        }
        prop_assert_eq!(f.query_count(), xs.len() as u64);
    }
}

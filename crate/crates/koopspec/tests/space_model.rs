use koopspec::rational::{self, q, Q};
use koopspec::space::{AtomId, Children, DyadicTree, Point, SpaceDesc};
use num_traits::{One, Zero};
use proptest::prelude::*;

#[test]
fn interval_root_is_one_atom() {
    let t = DyadicTree::build(SpaceDesc::UnitInterval, 0).unwrap();
    let root = &t.level(0).unwrap()[0];
    assert_eq!(t.count(0).unwrap(), 1);
    assert_eq!(root.mass, Q::one());
    assert_eq!(root.rep.as_real(), Some(0.5));
    assert!(root.contains(&Point::real(0.0)) && root.contains(&Point::real(0.999)));
}

#[test]
fn interval_level_three_is_eight_dyadic_cells() {
    let t = DyadicTree::build(SpaceDesc::UnitInterval, 3).unwrap();
    let atoms = t.level(3).unwrap();
    assert_eq!(atoms.len(), 8);
    for (k, a) in atoms.iter().enumerate() {
        assert_eq!(a.mass, q(1, 8));
        assert_eq!(a.rep.as_real(), Some((2 * k + 1) as f64 / 16.0));
        assert_eq!(a.region.bounds(), Some((k as f64 / 8.0, (k + 1) as f64 / 8.0)));
    }
}

#[test]
fn four_equal_atoms_group_as_pairs() {
    let t = DyadicTree::build(SpaceDesc::atoms(vec![q(1, 4); 4]), 2).unwrap();
    let leaves: Vec<Option<usize>> = t.level(2).unwrap().iter().map(|a| a.rep.as_atom()).collect();
    assert_eq!(leaves, vec![Some(0), Some(1), Some(2), Some(3)]);
    // the balanced grouping of four atoms is {0,1} | {2,3}
    let mid = t.level(1).unwrap();
    assert_eq!(mid.len(), 2);
    for (g, members) in [(0usize, [0usize, 1]), (1, [2, 3])] {
        for j in 0..4 {
            assert_eq!(mid[g].contains(&Point::atom(j)), members.contains(&j));
        }
        assert_eq!(mid[g].mass, q(1, 2));
    }
}

#[test]
fn mesh_examples() {
    let t = DyadicTree::build(SpaceDesc::UnitInterval, 3).unwrap();
    assert_eq!(t.mesh(2).unwrap(), q(1, 4));
    let c = DyadicTree::build(SpaceDesc::Circle, 2).unwrap();
    // sup of the arc distance over a half circle
    let arc = |a: f64, b: f64| {
        let d = (a - b).abs();
        d.min(1.0 - d)
    };
    let n = 2000;
    let sup = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| arc(i as f64 / (2 * n) as f64, j as f64 / (2 * n) as f64)).fold(0.0, f64::max);
    assert!((rational::to_f64(&c.mesh(1).unwrap()) - sup).abs() < 1e-3);
    assert_eq!(c.mesh(1).unwrap(), q(1, 2));
    let a = DyadicTree::build(SpaceDesc::atoms(vec![q(1, 4); 4]), 2).unwrap();
    assert_eq!(a.mesh(2).unwrap(), Q::zero());
}

#[test]
fn atom_masses() {
    let t = DyadicTree::build(SpaceDesc::UnitInterval, 3).unwrap();
    assert_eq!(t.atom_mass(AtomId { level: 0, index: 0 }).unwrap(), Q::one());
    assert_eq!(t.atom_mass(AtomId { level: 3, index: 5 }).unwrap(), q(1, 8));
    let u = DyadicTree::build(SpaceDesc::union(vec![(q(1, 3), SpaceDesc::Circle), (q(2, 3), SpaceDesc::UnitInterval)]), 1).unwrap();
    let masses: Vec<Q> = u.level(1).unwrap().iter().map(|a| a.mass.clone()).collect();
    assert_eq!(masses, vec![q(1, 3), q(2, 3)]);
}

#[test]
fn bad_models_are_rejected() {
    assert!(SpaceDesc::atoms(vec![q(1, 2), q(1, 4)]).validate().is_err());
    assert!(SpaceDesc::atoms(vec![q(1, 1), q(0, 1)]).validate().is_err());
    assert!(DyadicTree::build(SpaceDesc::UnitInterval, 3).unwrap().level(4).is_err());
}

fn weights(n: usize) -> impl Strategy<Value = Vec<Q>> {
    prop::collection::vec(1i64..9, n).prop_map(|w| {
        let s: i64 = w.iter().sum();
        w.into_iter().map(|x| q(x, s)).collect()
    })
}

fn space() -> impl Strategy<Value = SpaceDesc> {
    let leaf = prop_oneof![
        Just(SpaceDesc::UnitInterval),
        Just(SpaceDesc::Circle),
        (1usize..9).prop_map(SpaceDesc::uniform_atoms),
        prop::sample::select(vec![1usize, 2, 4, 8]).prop_flat_map(weights).prop_map(SpaceDesc::atoms),
    ];
    prop_oneof![
        3 => leaf.clone(),
        1 => (prop::collection::vec(leaf, 2..4), 1i64..5).prop_map(|(parts, a)| {
            let k = parts.len() as i64;
            // first weight a/(a+k-1), the rest 1/(a+k-1)
            let d = a + k - 1;
            SpaceDesc::union(parts.into_iter().enumerate().map(|(i, s)| (if i == 0 { q(a, d) } else { q(1, d) }, s)).collect())
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn level_masses_sum_to_one(s in space(), depth in 0u32..7) {
        let t = DyadicTree::build(s, depth).unwrap();
        for m in 0..=depth {
            prop_assert_eq!(rational::sum(t.level(m).unwrap().iter().map(|a| &a.mass)), Q::one());
        }
    }

    #[test]
    fn parents_are_sums_of_children(s in space(), depth in 1u32..7) {
        let t = DyadicTree::build(s, depth).unwrap();
        for m in 0..depth {
            for i in 0..t.count(m).unwrap() {
                let id = AtomId { level: m, index: i };
                let mass = t.atom_mass(id).unwrap();
                match t.children(id).unwrap() {
                    Children::Split(a, b) => {
                        let sum = t.atom_mass(AtomId { level: m + 1, index: a }).unwrap() + t.atom_mass(AtomId { level: m + 1, index: b }).unwrap();
                        prop_assert_eq!(mass, sum);
                    }
                    Children::Carried(a) => prop_assert_eq!(mass, t.atom_mass(AtomId { level: m + 1, index: a }).unwrap()),
                    Children::Leaf => {}
                }
            }
        }
    }

    #[test]
    fn mesh_is_nonincreasing(s in space(), depth in 1u32..7) {
        let t = DyadicTree::build(s, depth).unwrap();
        for m in 0..depth {
            prop_assert!(t.mesh(m + 1).unwrap() <= t.mesh(m).unwrap());
        }
    }

    #[test]
    fn representatives_lie_in_their_atoms(s in space(), depth in 0u32..7) {
        let t = DyadicTree::build(s, depth).unwrap();
        for m in 0..=depth {
            for (i, a) in t.level(m).unwrap().iter().enumerate() {
                prop_assert!(a.contains(&a.rep));
                prop_assert_eq!(t.locate(m, &a.rep).unwrap(), i);
            }
        }
    }
}

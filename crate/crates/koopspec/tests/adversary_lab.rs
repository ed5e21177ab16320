use std::sync::Arc;

use koopspec::adversary::{
    angle_bits, dichotomy_experiment, dyadic_adversary_pair, lock_adversary, lock_experiment, nth_prime, prime_arc_probe, prime_arc_probe_with,
    probe_points, record_transcript, Block, DichotomySchedule, LabAlgorithm, Thresholds, Verdict,
};
use koopspec::dictionary::HaarDictionary;
use koopspec::maps::{Angle, BuiltinMap, MapOracle, Oracle};
use koopspec::markov::{markov_tower_with, spec_space, MarkovSpec};
use koopspec::rational::q;
use koopspec::reference::roots_of_unity;
use koopspec::space::{DyadicTree, Point, SpaceDesc};
use koopspec::tower::{gamma_base, GridSpec, TowerOptions};
use num_complex::Complex64;
use num_traits::Signed;

fn arc(o: MapOracle) -> Arc<dyn Oracle> {
    Arc::new(o)
}

fn oracle(space: SpaceDesc, map: BuiltinMap) -> MapOracle {
    MapOracle::new(space, map).unwrap()
}

#[test]
fn gamma_transcript_is_the_level_two_representatives() {
    let f = oracle(SpaceDesc::UnitInterval, BuiltinMap::Identity);
    let d = HaarDictionary::build(Arc::new(DyadicTree::build(SpaceDesc::UnitInterval, 2).unwrap()), 2.0, 4).unwrap();
    let grid = GridSpec::new(q(1, 4), q(2, 1)).unwrap();
    let run = |o: &dyn Oracle| gamma_base(o, &d, 0.5, 4, 2, &grid, &TowerOptions::default());
    let before = f.query_count();
    let (out, t) = record_transcript("gamma", &f, run).unwrap();
    assert_eq!(f.query_count() - before, t.len() as u64);
    assert!(t.finalized);
    let reps: Vec<Point> = (0..4).map(|k| Point::real((2 * k + 1) as f64 / 8.0)).collect();
    assert_eq!(t.entries.iter().map(|e| e.query).collect::<Vec<_>>(), reps);
    assert!(t.entries.iter().all(|e| e.query == e.value));
    let (out2, t2) = record_transcript("gamma", &f, run).unwrap();
    assert_eq!(out, out2);
    assert_eq!(t, t2);
}

#[test]
fn markov_transcript_touches_atoms_only() {
    let spec = MarkovSpec::from_permutation(vec![q(1, 2), q(1, 2)], &[1, 0]).unwrap();
    let f = oracle(spec_space(&spec), BuiltinMap::Cycle(2));
    let (_, t) = record_transcript("markov", &f, |o| markov_tower_with(&spec, o, 0.5, 4, 2.0, &GridSpec::standard(4))).unwrap();
    assert_eq!(t.entries.iter().map(|e| e.query).collect::<Vec<_>>(), vec![Point::atom(0), Point::atom(1)]);
    assert_eq!(t.entries.iter().map(|e| e.value).collect::<Vec<_>>(), vec![Point::atom(1), Point::atom(0)]);
}

#[test]
fn every_lab_algorithm_records_a_finite_exact_transcript() {
    for alg in LabAlgorithm::ALL {
        let map = match alg {
            LabAlgorithm::Markov => BuiltinMap::Cycle(4),
            LabAlgorithm::Sigma1 => BuiltinMap::Rotation(Angle::rational(1, 2)),
            _ => BuiltinMap::Identity,
        };
        let f = oracle(alg.space(), map);
        let before = f.query_count();
        let (_, t) = record_transcript(&format!("{alg:?}"), &f, |o| alg.run(o)).unwrap();
        assert!(!t.is_empty(), "{alg:?}");
        assert_eq!(f.query_count() - before, t.len() as u64, "{alg:?}");
    }
}

#[test]
fn locked_oracle_examples() {
    let base = arc(oracle(SpaceDesc::UnitInterval, BuiltinMap::Identity));
    let alt = arc(oracle(SpaceDesc::UnitInterval, BuiltinMap::Rotation(Angle::Golden)));
    let (out0, t) = record_transcript("gamma", base.as_ref(), |o| LabAlgorithm::GammaP2.run(o)).unwrap();
    let adv = lock_adversary(base.clone(), std::slice::from_ref(&t), alt.clone()).unwrap();
    assert_eq!(adv.locked_points(), 4);
    for k in 0..4 {
        let x = Point::real((2 * k + 1) as f64 / 8.0);
        assert_eq!(adv.evaluate(&x, 53).unwrap(), x);
    }
    for x in [0.1, 0.3, 0.6] {
        let p = Point::real(x);
        assert_eq!(adv.evaluate(&p, 53).unwrap(), alt.evaluate(&p, 53).unwrap());
        assert_ne!(adv.evaluate(&p, 53).unwrap(), p);
    }
    assert_eq!(LabAlgorithm::GammaP2.run(&adv).unwrap(), out0);

    let free = lock_adversary(base, &[], alt.clone()).unwrap();
    assert_eq!(free.locked_points(), 0);
    let x = Point::real(0.375);
    assert_eq!(free.evaluate(&x, 53).unwrap(), alt.evaluate(&x, 53).unwrap());
}

#[test]
fn lock_is_sound_for_every_algorithm() {
    for alg in LabAlgorithm::ALL {
        let (base, alts): (BuiltinMap, Vec<BuiltinMap>) = match alg {
            LabAlgorithm::Markov => (BuiltinMap::Cycle(4), vec![BuiltinMap::AtomPermutation(vec![1, 0, 3, 2])]),
            LabAlgorithm::Sigma1 => (BuiltinMap::Identity, vec![BuiltinMap::Rotation(Angle::rational(1, 4))]),
            _ => (BuiltinMap::Identity, vec![BuiltinMap::Rotation(Angle::Golden), BuiltinMap::Halving]),
        };
        for alt in alts {
            let r = lock_experiment(alg, arc(oracle(alg.space(), base.clone())), arc(oracle(alg.space(), alt))).unwrap();
            assert!(r.outputs_identical, "{alg:?} against {}", r.alt);
            assert!(r.locked_points <= r.transcript_size);
        }
    }
}

#[test]
fn prime_tail_angles() {
    let (under, over) = dyadic_adversary_pair(3, 5).unwrap();
    assert_eq!(under, q(5, 8));
    let bits = angle_bits(&over.approximant(12), 12);
    // 101 followed by ones at the prime positions 5, 7 and 11
    let want: Vec<u8> = (1..=12u32).map(|k| u8::from([1, 3, 5, 7, 11].contains(&k))).collect();
    assert_eq!(bits, want);
    assert_eq!(angle_bits(&under, 3), bits[..3].to_vec());
    // truncations are Cauchy with rate 2^{-k}
    for k in 4..40u32 {
        for j in [k + 1, k + 7, 60] {
            let gap = (over.approximant(k) - over.approximant(j)).abs();
            assert!(gap <= q(1, 1i64 << k), "k = {k}, j = {j}");
        }
    }
    assert!(dyadic_adversary_pair(3, 8).is_err());
}

#[test]
fn probe_examples() {
    let circle: Vec<Complex64> = (0..8192).map(|k| Complex64::from_polar(1.0, k as f64 * std::f64::consts::TAU / 8192.0)).collect();
    for n2 in 1..8 {
        let r = prime_arc_probe(&circle, n2).unwrap();
        assert!(r.beta < 1e-3);
        assert_eq!(r.verdict, Verdict::No);
    }
    let e2 = roots_of_unity(2);
    let r = prime_arc_probe(&e2, 3).unwrap();
    assert_eq!(r.prime, 5);
    let oracle_beta = probe_points(5).iter().map(|z| (z - 1.0).norm().min((z + 1.0).norm())).fold(0.0, f64::max);
    assert!((r.beta - oracle_beta).abs() < 1e-15);
    assert!(r.beta >= 0.4 && r.verdict == Verdict::Yes);
    // β strictly between a and b
    let th = Thresholds::prime_square(5);
    let mid = 0.5 * (th.a + th.b);
    let shell: Vec<Complex64> = probe_points(5).iter().map(|z| z * (1.0 + mid)).collect();
    let r = prime_arc_probe(&shell, 3).unwrap();
    assert!(r.beta > r.a && r.beta < r.b);
    assert_eq!(r.verdict, Verdict::No);
    assert!(prime_arc_probe_with(&[], 3, th).is_err());
}

#[test]
fn thresholds_are_separated() {
    for n2 in 1..40 {
        let p = nth_prime(n2);
        let th = Thresholds::prime_square(p);
        assert!(th.a < th.b);
        let want = 1.0 / (4.0 * (p * p) as f64);
        assert!((th.b - th.a - want).abs() <= 4.0 * f64::EPSILON * want);
    }
}

#[test]
fn probes_stay_away_from_small_root_sets() {
    for n2 in 2..12 {
        let p = nth_prime(n2);
        for d in 1..p.min(12) {
            for qq in 1..=d {
                let r = prime_arc_probe(&roots_of_unity(qq), n2).unwrap();
                assert!(r.beta >= 4.0 / (p * d) as f64, "p = {p}, D = {d}, q = {qq}");
            }
        }
    }
}

#[test]
fn dichotomy_cycles_say_yes() {
    let r = dichotomy_experiment(&[Block::Cycle(2), Block::Cycle(3)], &DichotomySchedule::default()).unwrap();
    assert!(r.verdicts.iter().all(|v| *v == Verdict::Yes), "{:?}", r.beta_trace);
    assert!(r.primes.iter().all(|&p| p > 3));
    assert!(r.transcript_sizes.iter().all(|&n| n > 0));
}

#[test]
fn dichotomy_golden_says_no() {
    for blocks in [vec![Block::GoldenRotation], vec![Block::Cycle(2), Block::GoldenRotation]] {
        let r = dichotomy_experiment(&blocks, &DichotomySchedule::default()).unwrap();
        assert!(r.verdicts.iter().all(|v| *v == Verdict::No), "{blocks:?}: {:?}", r.beta_trace);
    }
}

use std::f64::consts::PI;
use std::sync::Arc;

use koopspec::dictionary::{build_duals, HaarDictionary, IndicatorDictionary};
use koopspec::maps::{Angle, BuiltinMap, MapOracle};
use koopspec::reference::sigma_inf_rotation_exact;
use koopspec::residual::{
    apply_koopman_sampled, compression_matrix, discrete_residual, perturbation_bound, rotation_residual_exact, sample_images, sigma_inf_matrix,
    sigma_inf_net, CompressionMatrix, ResidualMode, ResidualQuery, SampledSection,
};
use koopspec::space::{DyadicTree, SpaceDesc};
use koopspec::step::{truncated_norm, StepFunction};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn tree(space: SpaceDesc, depth: u32) -> Arc<DyadicTree> {
    Arc::new(DyadicTree::build(space, depth).unwrap())
}

fn query(z: Complex64, n2: usize, n1: u32, p: f64, mode: ResidualMode) -> ResidualQuery {
    ResidualQuery { z, n2, n1, p, mode }
}

#[test]
fn truncated_norm_examples() {
    let t = tree(SpaceDesc::uniform_atoms(2), 1);
    for p in [1.2, 2.0, 5.0] {
        assert!((truncated_norm(&StepFunction::new(&t, 1, vec![1.0, 1.0]).unwrap(), &t, p).unwrap() - 1.0).abs() < 1e-15);
    }
    let two = StepFunction::new(&t, 1, vec![2.0, 0.0]).unwrap();
    assert!((truncated_norm(&two, &t, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    let i = tree(SpaceDesc::UnitInterval, 1);
    let w = StepFunction::new(&i, 1, vec![1.0, -1.0]).unwrap();
    for p in [1.5, 3.0] {
        assert!((truncated_norm(&w, &i, p).unwrap() - 1.0).abs() < 1e-15);
    }
}

#[test]
fn koopman_sampling_examples() {
    let t = tree(SpaceDesc::UnitInterval, 3);
    let d = HaarDictionary::build(t.clone(), 2.0, 8).unwrap();
    let id = MapOracle::new(SpaceDesc::UnitInterval, BuiltinMap::Identity).unwrap();
    let coeffs: Vec<Complex64> = (0..8).map(|j| c(j as f64 - 3.5, 0.25 * j as f64)).collect();
    let g = apply_koopman_sampled(&id, &d, &coeffs, 3, 53).unwrap();
    let reps = t.reps(3).unwrap();
    let direct = koopspec::dictionary::Dictionary::sample(&d, 8, &reps).unwrap();
    for (r, v) in g.coeffs.iter().enumerate() {
        let want: Complex64 = (0..8).map(|j| coeffs[j] * direct[r * 8 + j]).sum();
        assert!((v - want).norm() < 1e-12);
    }

    let a = tree(SpaceDesc::uniform_atoms(2), 1);
    let ind = IndicatorDictionary::build(a, 1).unwrap();
    let swap = MapOracle::new(SpaceDesc::uniform_atoms(2), BuiltinMap::Cycle(2)).unwrap();
    let g = apply_koopman_sampled(&swap, &ind, &[c(1.0, 0.0), c(0.0, 0.0)], 1, 53).unwrap();
    assert_eq!(g.coeffs, vec![c(0.0, 0.0), c(1.0, 0.0)]);

    // 1_[0,1/4)(x + 1/4) at the midpoints 1/8, 3/8, 5/8, 7/8 is 1 only at 7/8
    let circle = tree(SpaceDesc::Circle, 2);
    let ind = IndicatorDictionary::build(circle, 2).unwrap();
    let r = MapOracle::new(SpaceDesc::Circle, BuiltinMap::Rotation(Angle::rational(1, 4))).unwrap();
    let one = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
    let g = apply_koopman_sampled(&r, &ind, &one, 2, 53).unwrap();
    assert_eq!(g.coeffs, vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
}

#[test]
fn cycle_residual_examples() {
    let a = tree(SpaceDesc::uniform_atoms(2), 1);
    let d = IndicatorDictionary::build(a, 1).unwrap();
    let f = MapOracle::new(SpaceDesc::uniform_atoms(2), BuiltinMap::Cycle(2)).unwrap();
    for mode in [ResidualMode::RatioNetSearch, ResidualMode::P2Oracle] {
        let h0 = discrete_residual(&f, &d, &query(c(0.0, 0.0), 2, 1, 2.0, mode), 53).unwrap();
        assert!((h0.h - 1.0).abs() <= h0.err.max(1e-12));
        let h1 = discrete_residual(&f, &d, &query(c(1.0, 0.0), 2, 1, 2.0, mode), 53).unwrap();
        assert!(h1.h.abs() <= h1.err.max(1e-12));
    }
    // eigenvalues ±1 of the swap: min |λ − i| = √2
    let hi = discrete_residual(&f, &d, &query(c(0.0, 1.0), 2, 1, 2.0, ResidualMode::P2Oracle), 53).unwrap();
    let want = [1.0, -1.0].iter().map(|l| (c(*l, 0.0) - c(0.0, 1.0)).norm()).fold(f64::INFINITY, f64::min);
    assert!((hi.h - want).abs() < 1e-12);
}

#[test]
fn compression_matrix_examples() {
    let t = tree(SpaceDesc::UnitInterval, 3);
    let d = HaarDictionary::build(t, 2.0, 8).unwrap();
    let du = build_duals(&d, 8).unwrap();
    let id = MapOracle::new(SpaceDesc::UnitInterval, BuiltinMap::Identity).unwrap();
    let m = compression_matrix(&id, &d, &du, 8, 3, 53).unwrap();
    assert!((m.data - DMatrix::<Complex64>::identity(8, 8)).norm() < 1e-12);

    let a = tree(SpaceDesc::uniform_atoms(2), 1);
    let ind = IndicatorDictionary::build(a, 1).unwrap();
    let du = build_duals(&ind, 2).unwrap();
    let f = MapOracle::new(SpaceDesc::uniform_atoms(2), BuiltinMap::Cycle(2)).unwrap();
    let m = compression_matrix(&f, &ind, &du, 2, 1, 53).unwrap();
    assert_eq!(m, CompressionMatrix::new(m.data.clone(), m.provenance));
    assert!((m.data - CompressionMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).data).norm() < 1e-15);

    let circle = tree(SpaceDesc::Circle, 2);
    let h = HaarDictionary::build(circle, 2.0, 2).unwrap();
    let du = build_duals(&h, 2).unwrap();
    let r = MapOracle::new(SpaceDesc::Circle, BuiltinMap::Rotation(Angle::rational(1, 2))).unwrap();
    for n1 in 1..=2 {
        let m = compression_matrix(&r, &h, &du, 2, n1, 53).unwrap();
        assert!((m.data - CompressionMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).data).norm() < 1e-15);
    }
}

#[test]
fn sigma_inf_matrix_examples() {
    let id = CompressionMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    for p in [1.5, 2.0, 3.0] {
        let v = sigma_inf_matrix(&id, c(0.0, 0.0), p, 10).unwrap();
        assert!((v.h - 1.0).abs() <= v.err.max(1e-12));
    }
    let d = CompressionMatrix::from_real(2, 2, &[2.0, 0.0, 0.0, 3.0]);
    assert!((sigma_inf_matrix(&d, c(0.0, 0.0), 2.0, 10).unwrap().h - 2.0).abs() < 1e-12);
    let s = CompressionMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    assert!((sigma_inf_matrix(&s, c(0.5, 0.0), 2.0, 10).unwrap().h - 0.5).abs() < 1e-12);
}

#[test]
fn perturbation_bound_examples() {
    let m = CompressionMatrix::from_real(2, 2, &[0.3, -1.0, 2.0, 0.5]);
    assert_eq!(perturbation_bound(&m, &m, 2.0).unwrap(), 0.0);
    let n = CompressionMatrix::from_real(2, 2, &[0.2, -1.0, 2.0, 0.5]);
    assert!((perturbation_bound(&m, &n, 2.0).unwrap() - 0.1).abs() < 1e-12);
    // dense sampling of ‖Ax‖_3/‖x‖_3 stays below the interpolation bound
    let a = CompressionMatrix::from_real(3, 3, &[1.0, -2.0, 0.5, 0.0, 1.5, 1.0, -0.7, 0.2, 0.9]);
    let zero = CompressionMatrix::from_real(3, 3, &[0.0; 9]);
    let bound = perturbation_bound(&a, &zero, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let norm3 = |v: &[f64]| v.iter().map(|x| x.abs().powi(3)).sum::<f64>().cbrt();
    let mut best: f64 = 0.0;
    for _ in 0..20000 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ax: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a.data[(i, j)].re * x[j]).sum()).collect();
        best = best.max(norm3(&ax) / norm3(&x));
    }
    assert!(bound >= best);
}

#[test]
fn isometries_have_unit_residual_at_zero() {
    let circle = tree(SpaceDesc::Circle, 3);
    let h = HaarDictionary::build(circle, 2.0, 8).unwrap();
    for (num, den) in [(1, 2), (1, 4), (3, 8)] {
        let f = MapOracle::new(SpaceDesc::Circle, BuiltinMap::Rotation(Angle::rational(num, den))).unwrap();
        for mode in [ResidualMode::P2Oracle, ResidualMode::RatioNetSearch] {
            let v = discrete_residual(&f, &h, &query(c(0.0, 0.0), 8, 3, 2.0, mode), 53).unwrap();
            assert!((v.h - 1.0).abs() <= v.err.max(1e-12), "{num}/{den} {mode}: {}", v.h);
        }
    }
    let a = tree(SpaceDesc::uniform_atoms(5), 3);
    let d = IndicatorDictionary::build(a, 3).unwrap();
    let f = MapOracle::new(SpaceDesc::uniform_atoms(5), BuiltinMap::Cycle(5)).unwrap();
    let v = discrete_residual(&f, &d, &query(c(0.0, 0.0), 5, 3, 3.0, ResidualMode::RatioNetSearch), 53).unwrap();
    assert!((v.h - 1.0).abs() <= v.err.max(1e-12));
}

#[test]
fn characters_are_eigenfunctions_at_representatives() {
    for (num, den) in [(1i64, 2i64), (1, 4), (3, 8), (5, 16)] {
        let theta = num as f64 / den as f64;
        let t = tree(SpaceDesc::Circle, 4);
        let f = MapOracle::new(SpaceDesc::Circle, BuiltinMap::Rotation(Angle::rational(num, den))).unwrap();
        let reps = t.reps(4).unwrap();
        let imgs = sample_images(&f, &t, 4, 53).unwrap();
        for n in -3i32..=3 {
            let e = |x: f64| Complex64::from_polar(1.0, 2.0 * PI * n as f64 * x);
            let lambda = Complex64::from_polar(1.0, 2.0 * PI * n as f64 * theta);
            for (x, y) in reps.iter().zip(&imgs) {
                let (x, y) = (x.as_real().unwrap(), y.as_real().unwrap());
                assert!((e(y) - lambda * e(x)).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn exact_rotation_residuals_decrease_and_stay_above_the_floor() {
    let theta = (5f64.sqrt() - 1.0) / 2.0;
    let circle = tree(SpaceDesc::Circle, 6);
    let d = HaarDictionary::build(circle, 2.0, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let z = c(rng.gen_range(-1.6..1.6), rng.gen_range(-1.6..1.6));
        let floor = sigma_inf_rotation_exact(z);
        let mut prev = f64::INFINITY;
        for n in [1, 2, 4, 8, 16, 32, 64] {
            let v = rotation_residual_exact(theta, &d, n, z, 2.0).unwrap();
            assert!(v.h >= floor - v.err, "n = {n}");
            assert!(v.h <= prev + 1e-12, "n = {n}");
            prev = v.h;
        }
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CompressionMatrix {
    let e: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    CompressionMatrix::from_real(n, n, &e)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn residual_is_one_lipschitz_in_z(a in (-2.0f64..2.0, -2.0f64..2.0), b in (-2.0f64..2.0, -2.0f64..2.0), num in 0i64..16) {
        let circle = tree(SpaceDesc::Circle, 4);
        let h = HaarDictionary::build(circle, 2.0, 8).unwrap();
        let f = MapOracle::new(SpaceDesc::Circle, BuiltinMap::Rotation(Angle::rational(num, 16))).unwrap();
        let sec = SampledSection::build(&f, &h, 8, 4, 2.0, 53).unwrap();
        let (z1, z2) = (c(a.0, a.1), c(b.0, b.1));
        let h1 = sec.residual(z1, ResidualMode::P2Oracle, 12).unwrap();
        let h2 = sec.residual(z2, ResidualMode::P2Oracle, 12).unwrap();
        prop_assert!((h1.h - h2.h).abs() <= (z1 - z2).norm() + h1.err + h2.err);
    }

    #[test]
    fn net_search_sits_above_the_singular_value(seed in any::<u64>(), zr in -1.5f64..1.5, zi in -1.5f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, 4);
        let z = c(zr, zi);
        let exact = sigma_inf_matrix(&m, z, 2.0, 10).unwrap().h;
        let mut prev_gap = f64::INFINITY;
        for res in [6, 8, 10] {
            let v = sigma_inf_net(&m, z, 2.0, res, Vec::new()).unwrap();
            prop_assert!(v.h >= exact - v.err - 1e-12);
            prop_assert!(v.h - exact <= v.err + 1e-12);
            prev_gap = prev_gap.min(v.h - exact);
        }
        prop_assert!(prev_gap <= 1e-2);
    }
}

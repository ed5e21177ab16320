//! Step functions on tree levels, truncated norms and cell averages.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num_complex::Complex64;
use num_traits::{Signed, Zero};

use crate::error::{KoopError, Result};
use crate::rational::{self, Q};
use crate::space::{Atom, DyadicTree, Point};

/// Scalars usable as step-function coefficients.
pub trait StepScalar:
    Clone + PartialEq + Debug + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn mass_of(atom: &Atom) -> Self;
    fn modulus(&self) -> f64;
}

impl StepScalar for f64 {
    fn mass_of(atom: &Atom) -> f64 {
        atom.mass_f64
    }
    fn modulus(&self) -> f64 {
        self.abs()
    }
}

impl StepScalar for Q {
    fn mass_of(atom: &Atom) -> Q {
        atom.mass.clone()
    }
    fn modulus(&self) -> f64 {
        rational::to_f64(&self.abs())
    }
}

impl StepScalar for Complex64 {
    fn mass_of(atom: &Atom) -> Complex64 {
        Complex64::new(atom.mass_f64, 0.0)
    }
    fn modulus(&self) -> f64 {
        self.norm()
    }
}

/// `ξ = Σ_P a_P 1_P` over the atoms of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<T = f64> {
    pub level: u32,
    pub coeffs: Vec<T>,
}

impl<T: StepScalar> StepFunction<T> {
    pub fn new(tree: &DyadicTree, level: u32, coeffs: Vec<T>) -> Result<Self> {
        let n = tree.count(level)?;
        if coeffs.len() != n {
            return Err(KoopError::InvalidParameter(format!("level {level} has {n} atoms, got {} coefficients", coeffs.len())));
        }
        Ok(StepFunction { level, coeffs })
    }

    pub fn constant(tree: &DyadicTree, level: u32, value: T) -> Result<Self> {
        Ok(StepFunction { level, coeffs: vec![value; tree.count(level)?] })
    }

    pub fn eval(&self, tree: &DyadicTree, x: &Point) -> Result<T> {
        Ok(self.coeffs[tree.locate(self.level, x)?].clone())
    }

    /// Same function written on a finer level.
    pub fn refine(&self, tree: &DyadicTree, level: u32) -> Result<Self> {
        if level < self.level {
            return Err(KoopError::InvalidParameter("refinement target is coarser".into()));
        }
        let n = tree.count(level)?;
        let coeffs = (0..n).map(|i| self.coeffs[tree.ancestor(level, i, self.level)].clone()).collect();
        Ok(StepFunction { level, coeffs })
    }

    /// Cell averages on level `m`: `a_P = ω(P)^{-1} ∫_P f dω`.
    pub fn conditional_expectation(&self, tree: &DyadicTree, m: u32) -> Result<Self> {
        if m >= self.level {
            return self.refine(tree, m);
        }
        let coarse = tree.level(m)?;
        let fine = tree.level(self.level)?;
        let mut acc = vec![T::zero(); coarse.len()];
        for (i, a) in fine.iter().enumerate() {
            let k = tree.ancestor(self.level, i, m);
            acc[k] = acc[k].clone() + self.coeffs[i].clone() * T::mass_of(a);
        }
        let coeffs = acc.into_iter().zip(coarse).map(|(s, a)| s / T::mass_of(a)).collect();
        Ok(StepFunction { level: m, coeffs })
    }

    pub fn integral(&self, tree: &DyadicTree) -> Result<T> {
        let atoms = tree.level(self.level)?;
        Ok(self.coeffs.iter().zip(atoms).fold(T::zero(), |s, (c, a)| s + c.clone() * T::mass_of(a)))
    }

    pub fn map_coeffs<U: StepScalar>(&self, f: impl Fn(&T) -> U) -> StepFunction<U> {
        StepFunction { level: self.level, coeffs: self.coeffs.iter().map(f).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        StepFunction { level: self.level, coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() - b.clone()).collect() }
    }
}

/// `‖ξ‖_{p,n} = (Σ_P |a_P|^p ω(P))^{1/p}` over the function's own level.
pub fn truncated_norm<T: StepScalar>(f: &StepFunction<T>, tree: &DyadicTree, p: f64) -> Result<f64> {
    let atoms = tree.level(f.level)?;
    let s: f64 = f.coeffs.iter().zip(atoms).map(|(c, a)| c.modulus().powf(p) * a.mass_f64).sum();
    Ok(s.powf(1.0 / p))
}

/// Exact `Σ_P |a_P|^p ω(P)` for integer exponents.
pub fn truncated_norm_pow_exact(f: &StepFunction<Q>, tree: &DyadicTree, p: u32) -> Result<Q> {
    let atoms = tree.level(f.level)?;
    Ok(f.coeffs.iter().zip(atoms).fold(Q::zero(), |s, (c, a)| s + rational::powi(&c.abs(), p) * &a.mass))
}

/// Cell averages of a sampled function, integrated by the midpoint rule on
/// `quad_level` and then averaged up to level `m`.
pub fn conditional_expectation_sampled(tree: &DyadicTree, m: u32, quad_level: u32, f: impl Fn(&Point) -> f64) -> Result<StepFunction<f64>> {
    if quad_level < m {
        return Err(KoopError::UnresolvableInput(format!("quadrature level {quad_level} is coarser than target {m}")));
    }
    let atoms = tree.level(quad_level)?;
    let fine = StepFunction { level: quad_level, coeffs: atoms.iter().map(|a| f(&a.rep)).collect() };
    fine.conditional_expectation(tree, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::space::SpaceDesc;

    fn interval(depth: u32) -> DyadicTree {
        DyadicTree::build(SpaceDesc::UnitInterval, depth).unwrap()
    }

    #[test]
    fn norm_examples() {
        let t = interval(2);
        let one = StepFunction::new(&t, 1, vec![1.0, 1.0]).unwrap();
        for p in [1.5, 2.0, 3.0] {
            assert!((truncated_norm(&one, &t, p).unwrap() - 1.0).abs() < 1e-15);
        }
        let two = StepFunction::new(&t, 1, vec![2.0, 0.0]).unwrap();
        assert!((truncated_norm(&two, &t, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let haar = StepFunction::new(&t, 1, vec![1.0, -1.0]).unwrap();
        assert_eq!(truncated_norm(&haar, &t, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn cell_averages_of_identity_function() {
        let t = interval(6);
        let e = conditional_expectation_sampled(&t, 2, 6, |x| x.as_real().unwrap()).unwrap();
        assert_eq!(e.coeffs, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn aligned_functions_are_fixed_and_wavelets_vanish() {
        let t = interval(4);
        let f = StepFunction::new(&t, 2, vec![q(1, 3), q(-2, 1), q(5, 7), q(0, 1)]).unwrap();
        assert_eq!(f.refine(&t, 4).unwrap().conditional_expectation(&t, 2).unwrap(), f);
        let w = StepFunction::new(&t, 3, vec![q(1, 1), q(-1, 1), q(0, 1), q(0, 1), q(2, 1), q(-2, 1), q(0, 1), q(0, 1)]).unwrap();
        let e = w.conditional_expectation(&t, 2).unwrap();
        assert!(e.coeffs.iter().all(|c| c.is_zero()));
    }

    #[test]
    fn exact_norm_is_level_independent() {
        let t = interval(5);
        let f = StepFunction::new(&t, 2, vec![q(1, 2), q(-3, 1), q(2, 5), q(7, 3)]).unwrap();
        let base = truncated_norm_pow_exact(&f, &t, 3).unwrap();
        for l in 2..=5 {
            assert_eq!(truncated_norm_pow_exact(&f.refine(&t, l).unwrap(), &t, 3).unwrap(), base);
        }
    }
}

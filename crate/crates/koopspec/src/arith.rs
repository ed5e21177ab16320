//! Arithmetic residuals over `ℚ(i)`: exact tables, floor/ceiling power
//! approximants at scale `2^{-n0}` and the two arithmetic towers.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::dictionary::StepDictionary;
use crate::error::{KoopError, Result};
use crate::linalg::generalized_min_p2;
use crate::maps::Oracle;
use crate::netsearch::{NetOptions, RatioProblem};
use crate::rational::{self, Q};
use crate::residual::DEFAULT_RESOLUTION;
use crate::tower::{make_grid, CompactSet, GridPoint, GridSpec, Stage};

/// Exact complex rational.
#[derive(Debug, Clone, PartialEq)]
pub struct CQ {
    pub re: Q,
    pub im: Q,
}

impl CQ {
    pub fn new(re: Q, im: Q) -> CQ {
        CQ { re, im }
    }

    pub fn real(re: Q) -> CQ {
        CQ { re, im: Q::zero() }
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(rational::to_f64(&self.re), rational::to_f64(&self.im))
    }
}

/// Exponent `p = a/b` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exponent {
    pub a: u32,
    pub b: u32,
}

impl Exponent {
    pub fn from_f64(p: f64) -> Result<Exponent> {
        let bad = || KoopError::InvalidParameter(format!("exponent {p} is not a rational a/b with b ≤ 64 and 1 < p < ∞"));
        if !(p > 1.0 && p.is_finite()) {
            return Err(bad());
        }
        let r = rational::from_f64(p);
        let (a, b) = (r.numer().to_u32().ok_or_else(bad)?, r.denom().to_u32().ok_or_else(bad)?);
        if b > 64 {
            return Err(bad());
        }
        Ok(Exponent { a, b })
    }

    pub fn value(&self) -> f64 {
        self.a as f64 / self.b as f64
    }
}

/// `⌊2^{n0} y^{p/2}⌋` and `⌈2^{n0} y^{p/2}⌉` for rational `y ≥ 0`, as integers.
pub fn pow_bounds(y: &Q, e: Exponent, n0: u32) -> (BigInt, BigInt) {
    if y.is_zero() {
        return (BigInt::zero(), BigInt::zero());
    }
    let k = 2 * e.b;
    let num = y.numer().pow(e.a) << (k as usize * n0 as usize);
    let den = y.denom().pow(e.a);
    let x = &num / &den;
    let r = x.nth_root(k);
    let exact = &den * r.pow(k) == num;
    let up = if exact { r.clone() } else { &r + 1 };
    (r, up)
}

/// `Pow_{p,n0}(|ζ|)`: the lower `2^{-n0}` approximant of `|ζ|^p`.
pub fn pow_low(y: &Q, e: Exponent, n0: u32) -> Q {
    Q::new(pow_bounds(y, e, n0).0, BigInt::one() << n0 as usize)
}

/// Exact tables `φ_j(x_P)`, `φ_j(F x_P)` of the dictionary shapes with masses.
pub struct ArithTable {
    pub n: usize,
    pub masses: Vec<Q>,
    pub s: Vec<Vec<Q>>,
    pub t: Vec<Vec<Q>>,
}

impl ArithTable {
    pub fn build(f: &dyn Oracle, dict: &dyn StepDictionary, n2: usize, n1: u32, precision: u32) -> Result<ArithTable> {
        if !f.space().is_rational() {
            return Err(KoopError::IrrationalMassModel);
        }
        dict.check_count(n2)?;
        let tree = dict.tree().clone();
        let reps = tree.reps(n1)?;
        let masses: Vec<Q> = tree.level(n1)?.iter().map(|a| a.mass.clone()).collect();
        let shapes: Vec<_> = (0..n2).map(|j| dict.shape(j)).collect();
        let mut s = Vec::with_capacity(reps.len());
        let mut t = Vec::with_capacity(reps.len());
        for x in &reps {
            let y = f.evaluate(x, precision)?;
            s.push(shapes.iter().map(|sh| sh.eval(&tree, x)).collect::<Result<Vec<Q>>>()?);
            t.push(shapes.iter().map(|sh| sh.eval(&tree, &y)).collect::<Result<Vec<Q>>>()?);
        }
        Ok(ArithTable { n: n2, masses, s, t })
    }

    fn float_rows(&self, z: Complex64) -> (nalgebra::DMatrix<Complex64>, nalgebra::DMatrix<Complex64>, Vec<f64>) {
        let rows = self.s.len();
        let sm = nalgebra::DMatrix::from_fn(rows, self.n, |i, j| Complex64::new(rational::to_f64(&self.s[i][j]), 0.0));
        let tm = nalgebra::DMatrix::from_fn(rows, self.n, |i, j| Complex64::new(rational::to_f64(&self.t[i][j]), 0.0));
        let w = self.masses.iter().map(rational::to_f64).collect();
        (tm - &sm * z, sm, w)
    }

    /// Fixed candidate set: the rounded floating minimiser, its lattice
    /// neighbours and the basis vectors, each with dyadic entries.
    pub fn candidates(&self, z: Complex64, p: f64, n1: u32) -> Result<Vec<Vec<CQ>>> {
        let (num, den, w) = self.float_rows(z);
        let minimiser: Vec<Complex64> = if p == 2.0 {
            let mut nw = num.clone();
            let mut dw = den.clone();
            for (i, wi) in w.iter().enumerate() {
                nw.row_mut(i).scale_mut(wi.sqrt());
                dw.row_mut(i).scale_mut(wi.sqrt());
            }
            generalized_min_p2(&nw, &dw)?.1.iter().cloned().collect()
        } else {
            let pr = RatioProblem { num, num_w: w.clone(), den, den_w: w, p };
            pr.minimize(&NetOptions { resolution: DEFAULT_RESOLUTION, ..NetOptions::default() })?.coeffs
        };
        let big = minimiser.iter().map(|c| c.re.abs().max(c.im.abs())).fold(0.0, f64::max);
        let scale = (n1 as f64).exp2();
        let lattice: Vec<(i64, i64)> = minimiser
            .iter()
            .map(|c| {
                let c = if big > 0.0 { c / big } else { *c };
                ((c.re * scale).round() as i64, (c.im * scale).round() as i64)
            })
            .collect();
        let to_cq = |v: &[(i64, i64)]| -> Vec<CQ> {
            v.iter().map(|&(r, i)| CQ::new(rational::q(r, 1) / rational::pow2(n1 as i32), rational::q(i, 1) / rational::pow2(n1 as i32))).collect()
        };
        let mut out = vec![to_cq(&lattice)];
        for j in 0..self.n {
            for part in 0..2 {
                for d in [-1i64, 1] {
                    let mut v = lattice.clone();
                    if part == 0 {
                        v[j].0 += d;
                    } else {
                        v[j].1 += d;
                    }
                    out.push(to_cq(&v));
                }
            }
        }
        for j in 0..self.n {
            let mut v = vec![(0, 0); self.n];
            v[j] = (1, 0);
            out.push(to_cq(&v));
        }
        Ok(out)
    }

    fn cells(&self, z: &CQ, c: &[CQ]) -> Vec<(Q, Q)> {
        self.s
            .iter()
            .zip(&self.t)
            .map(|(srow, trow)| {
                let mut sr = Q::zero();
                let mut si = Q::zero();
                let mut tr = Q::zero();
                let mut ti = Q::zero();
                for ((cj, sv), tv) in c.iter().zip(srow).zip(trow) {
                    sr += &cj.re * sv;
                    si += &cj.im * sv;
                    tr += &cj.re * tv;
                    ti += &cj.im * tv;
                }
                // ζ = T c − z S c
                let zr = &tr - (&z.re * &sr - &z.im * &si);
                let zi = &ti - (&z.re * &si + &z.im * &sr);
                (&zr * &zr + &zi * &zi, &sr * &sr + &si * &si)
            })
            .collect()
    }
}

/// Exact p-power residual and its floating counterpart on the same candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct ArithValue {
    /// `min N_low / D_up` over the candidates, in `ℚ`.
    pub value: Q,
    /// `min N / D` over the candidates in floating point.
    pub float: f64,
    pub candidates: usize,
}

impl ArithValue {
    pub fn value_f64(&self) -> f64 {
        rational::to_f64(&self.value)
    }
}

/// Rescales a candidate by `2^s` so that its floating denominator is at
/// least `1 + ratio`; keeps the approximation error below `2^{1-n0}`.
fn dyadic_lift(c: &[CQ], d: f64, ratio: f64, p: f64) -> Vec<CQ> {
    if !(d > 0.0) || d >= 1.0 + ratio {
        return c.to_vec();
    }
    let s = (((1.0 + ratio) / d).log2() / p).ceil().max(0.0) as i32;
    let k = rational::pow2(s);
    c.iter().map(|x| CQ::new(&x.re * &k, &x.im * &k)).collect()
}

pub fn arithmetic_residual_table(table: &ArithTable, z: &CQ, n1: u32, n0: u32, p: f64) -> Result<ArithValue> {
    let e = Exponent::from_f64(p)?;
    let zf = z.to_complex();
    let mut best: Option<Q> = None;
    let mut best_f = f64::INFINITY;
    let cands = table.candidates(zf, p, n1)?;
    let one_n0 = BigInt::one() << n0 as usize;
    for c in &cands {
        let cells = table.cells(z, c);
        let mut nf = 0.0;
        let mut df = 0.0;
        for ((y, x), m) in cells.iter().zip(&table.masses) {
            let mf = rational::to_f64(m);
            nf += mf * rational::to_f64(y).powf(p / 2.0);
            df += mf * rational::to_f64(x).powf(p / 2.0);
        }
        if !(df > 0.0) {
            continue;
        }
        let ratio = nf / df;
        best_f = best_f.min(ratio);
        let c = dyadic_lift(c, df, ratio, p);
        let cells = table.cells(z, &c);
        let mut n_low = Q::zero();
        let mut d_up = Q::zero();
        for ((y, x), m) in cells.iter().zip(&table.masses) {
            let (lo, _) = pow_bounds(y, e, n0);
            let (_, hi) = pow_bounds(x, e, n0);
            n_low += m * Q::new(lo, one_n0.clone());
            d_up += m * Q::new(hi, one_n0.clone());
        }
        if d_up.is_positive() {
            let v = n_low / d_up;
            if best.as_ref().is_none_or(|b| v < *b) {
                best = Some(v);
            }
        }
    }
    let value = best.ok_or(KoopError::EmptyCandidate)?;
    Ok(ArithValue { value, float: best_f, candidates: cands.len() })
}

/// `h_{n2,n1,n0}(z; F)^p` in exact arithmetic.
pub fn arithmetic_residual(
    f: &dyn Oracle,
    dict: &dyn StepDictionary,
    z: &CQ,
    n2: usize,
    n1: u32,
    n0: u32,
    p: f64,
) -> Result<ArithValue> {
    let table = ArithTable::build(f, dict, n2, n1, 53)?;
    arithmetic_residual_table(&table, z, n1, n0, p)
}

/// Exact test `value < t^p` for rational `t ≥ 0`, `p = a/b`.
pub fn below_power(value: &Q, t: &Q, e: Exponent) -> bool {
    if !t.is_positive() {
        return false;
    }
    rational::powi(value, e.b) < rational::powi(t, e.a)
}

/// Exact test `value ≤ t^p`.
pub fn at_most_power(value: &Q, t: &Q, e: Exponent) -> bool {
    t.is_positive() && rational::powi(value, e.b) <= rational::powi(t, e.a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithTower {
    /// Modulus classes: single `n1`, inner limit in `n0`.
    Sigma2,
    /// General classes: inner limits in `n1` and `n0`.
    Sigma3,
}

/// Threshold `ε − 2^{-(n2+2)}` of the arithmetic towers.
pub fn lower_band(eps: &Q, n2: u32) -> Q {
    eps - rational::pow2(-(n2 as i32 + 2))
}

/// Upper threshold `ε + 2^{-(n2+2)}`.
pub fn upper_band(eps: &Q, n2: u32) -> Q {
    eps + rational::pow2(-(n2 as i32 + 2))
}

fn grid_cq(mesh: &Q, g: &GridPoint) -> CQ {
    CQ::new(mesh * Q::from_integer(g.k.into()), mesh * Q::from_integer(g.l.into()))
}

/// Arithmetic base sets at outer index `n2` (`n2` dictionary elements and
/// band exponent `n2`). `Sigma2` yields one stage per `n0` at `n1s[0]`;
/// `Sigma3` yields one stage per `n1` at the last `n0`.
pub fn arithmetic_tower(
    f: &dyn Oracle,
    dict: &dyn StepDictionary,
    tower: ArithTower,
    eps: &Q,
    n2: usize,
    n1s: &[u32],
    n0s: &[u32],
    grid: &GridSpec,
    p: f64,
) -> Result<Vec<Stage>> {
    let e = Exponent::from_f64(p)?;
    if n1s.is_empty() || n0s.is_empty() {
        return Err(KoopError::InvalidParameter("empty index schedule".into()));
    }
    let band = lower_band(eps, n2 as u32);
    let mut warnings = Vec::new();
    if !band.is_positive() {
        warnings.push(format!("lower band ε − 2^-(n2+2) = {} is not positive; the output set is empty", rational::to_string(&band)));
    }
    let pts = make_grid(grid);
    let runs: Vec<(u32, u32)> = match tower {
        ArithTower::Sigma2 => n0s.iter().map(|&n0| (n1s[0], n0)).collect(),
        ArithTower::Sigma3 => n1s.iter().map(|&n1| (n1, *n0s.last().expect("nonempty"))).collect(),
    };
    let mut tables: BTreeMap<u32, ArithTable> = BTreeMap::new();
    let mut out = Vec::new();
    for (n1, n0) in runs {
        if !tables.contains_key(&n1) {
            tables.insert(n1, ArithTable::build(f, dict, n2, n1, 53)?);
        }
        let table = &tables[&n1];
        let accepted: Vec<bool> = pts
            .par_iter()
            .map(|(g, _)| {
                let z = grid_cq(&grid.mesh, g);
                let v = arithmetic_residual_table(table, &z, n1, n0, p)?;
                Ok(match tower {
                    ArithTower::Sigma2 => below_power(&v.value, &band, e),
                    ArithTower::Sigma3 => at_most_power(&v.value, &band, e),
                })
            })
            .collect::<Result<_>>()?;
        let points = pts.iter().zip(&accepted).filter(|(_, &a)| a).map(|((g, _), _)| *g).collect();
        out.push(Stage { set: CompactSet { mesh: grid.mesh.clone(), points }, warnings: warnings.clone() });
    }
    Ok(out)
}

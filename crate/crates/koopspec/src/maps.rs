//! Dynamical maps exposed only through point evaluation.

use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{KoopError, Result};
use crate::rational::{self, Q};
use crate::space::{Coord, DyadicTree, Point, SpaceDesc};

/// Rotation angle: exact rational or an irrational target reached through
/// rational approximants `θ_k` with `|θ − θ_k| ≤ 2^{-k}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Angle {
    Rational(Q),
    /// `(√5 − 1)/2` through Fibonacci convergents.
    Golden,
    /// `β/2^m + Σ_{k>m, k prime} 2^{-k}`.
    PrimeTail { beta: u64, m: u32 },
}

fn fib_pair(precision: u32) -> (u64, u64) {
    // smallest convergent F_j / F_{j+1} with 1/F_{j+1}^2 <= 2^-precision
    let (mut a, mut b) = (1u64, 1u64);
    while (b as f64).powi(2) < 2f64.powi(precision as i32) {
        let c = a + b;
        a = b;
        b = c;
        if b > (1u64 << 40) {
            break;
        }
    }
    (a, b)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Angle {
    pub fn rational(n: i64, d: i64) -> Angle {
        Angle::Rational(rational::q(n, d))
    }

    pub fn is_irrational(&self) -> bool {
        !matches!(self, Angle::Rational(_))
    }

    /// Exact rational approximant within `2^{-precision}` of the angle.
    pub fn approximant(&self, precision: u32) -> Q {
        match self {
            Angle::Rational(t) => t.clone(),
            Angle::Golden => {
                let (a, b) = fib_pair(precision);
                Q::new(BigInt::from(a), BigInt::from(b))
            }
            Angle::PrimeTail { beta, m } => {
                let last = precision.max(*m);
                let mut v = Q::new(BigInt::from(*beta), BigInt::one() << *m as usize);
                for k in (m + 1)..=last {
                    if is_prime(k as u64) {
                        v += rational::dyadic(1, k);
                    }
                }
                v
            }
        }
    }

    pub fn approximant_f64(&self, precision: u32) -> f64 {
        match self {
            Angle::Golden => {
                let (a, b) = fib_pair(precision);
                a as f64 / b as f64
            }
            _ => rational::to_f64(&self.approximant(precision.min(60))),
        }
    }

    pub fn value_f64(&self) -> f64 {
        match self {
            Angle::Golden => (5f64.sqrt() - 1.0) / 2.0,
            _ => self.approximant_f64(60),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinMap {
    Identity,
    Rotation(Angle),
    /// `j ↦ j+1 mod q` on `q` atoms.
    Cycle(usize),
    AtomPermutation(Vec<usize>),
    /// `x ↦ x/2` on the unit interval.
    Halving,
    /// One map per component of a disjoint union.
    BlockUnion(Vec<BuiltinMap>),
}

/// Upper bound `α̂(r)` on the modulus of continuity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulus {
    Linear(f64),
}

impl Modulus {
    pub fn bound(&self, r: f64) -> f64 {
        match self {
            Modulus::Linear(a) => a * r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MapFlags {
    pub measure_preserving: bool,
    pub modulus: Option<Modulus>,
    pub density_sup: Option<f64>,
}

/// Point-evaluation access to a map. The query counter is owned by the
/// oracle and advances by one on every call.
pub trait Oracle: Send + Sync {
    fn space(&self) -> &SpaceDesc;
    fn flags(&self) -> &MapFlags;
    fn evaluate(&self, x: &Point, precision: u32) -> Result<Point>;
    fn query_count(&self) -> u64;
    fn name(&self) -> String;
}

#[derive(Debug)]
pub struct MapOracle {
    space: SpaceDesc,
    map: BuiltinMap,
    flags: MapFlags,
    count: AtomicU64,
}

fn rotate(x: f64, theta: f64) -> f64 {
    let gap = 1.0 - theta;
    let mut r = if x >= gap { x - gap } else { x + theta };
    if r >= 1.0 {
        r -= 1.0;
    }
    r.max(0.0)
}

fn angle_reduced(a: &Angle) -> Angle {
    match a {
        Angle::Rational(t) => {
            let f = t - Q::from_integer(t.floor().to_integer());
            Angle::Rational(f)
        }
        other => other.clone(),
    }
}

impl MapOracle {
    pub fn new(space: SpaceDesc, map: BuiltinMap) -> Result<MapOracle> {
        space.validate()?;
        let map = match map {
            BuiltinMap::Rotation(a) => BuiltinMap::Rotation(angle_reduced(&a)),
            other => other,
        };
        let flags = Self::derive_flags(&space, &map)?;
        Ok(MapOracle { space, map, flags, count: AtomicU64::new(0) })
    }

    pub fn with_flags(mut self, flags: MapFlags) -> MapOracle {
        self.flags = flags;
        self
    }

    pub fn map(&self) -> &BuiltinMap {
        &self.map
    }

    fn derive_flags(space: &SpaceDesc, map: &BuiltinMap) -> Result<MapFlags> {
        let bad = |what: &str| Err(KoopError::Config(format!("map {what} does not act on space {space}")));
        match (map, space) {
            (BuiltinMap::Identity, _) => Ok(MapFlags {
                measure_preserving: true,
                modulus: Some(Modulus::Linear(1.0)),
                density_sup: Some(1.0),
            }),
            (BuiltinMap::Rotation(_), SpaceDesc::Circle) => Ok(MapFlags {
                measure_preserving: true,
                modulus: Some(Modulus::Linear(1.0)),
                density_sup: Some(1.0),
            }),
            (BuiltinMap::Rotation(_), SpaceDesc::UnitInterval) => {
                Ok(MapFlags { measure_preserving: true, modulus: None, density_sup: Some(1.0) })
            }
            (BuiltinMap::Halving, SpaceDesc::UnitInterval) => Ok(MapFlags {
                measure_preserving: false,
                modulus: Some(Modulus::Linear(0.5)),
                density_sup: Some(2.0),
            }),
            (BuiltinMap::Cycle(q), SpaceDesc::FiniteAtoms { masses, .. }) => {
                if *q != masses.len() || *q == 0 {
                    return bad("cycle");
                }
                let perm: Vec<usize> = (0..*q).map(|j| (j + 1) % q).collect();
                Ok(Self::perm_flags(masses, &perm))
            }
            (BuiltinMap::AtomPermutation(perm), SpaceDesc::FiniteAtoms { masses, .. }) => {
                let mut seen = vec![false; masses.len()];
                if perm.len() != masses.len() || perm.iter().any(|&j| j >= masses.len() || std::mem::replace(&mut seen[j], true)) {
                    return bad("permutation");
                }
                Ok(Self::perm_flags(masses, perm))
            }
            (BuiltinMap::BlockUnion(maps), SpaceDesc::DisjointUnion(parts)) => {
                if maps.len() != parts.len() {
                    return bad("block union");
                }
                let mut flags = MapFlags { measure_preserving: true, modulus: Some(Modulus::Linear(1.0)), density_sup: Some(1.0) };
                for (m, c) in maps.iter().zip(parts) {
                    let f = Self::derive_flags(&c.space, m)?;
                    flags.measure_preserving &= f.measure_preserving;
                    flags.modulus = match (flags.modulus, f.modulus) {
                        (Some(Modulus::Linear(a)), Some(Modulus::Linear(b))) => Some(Modulus::Linear(a.max(b).max(1.0))),
                        _ => None,
                    };
                    flags.density_sup = match (flags.density_sup, f.density_sup) {
                        (Some(a), Some(b)) => Some(a.max(b)),
                        _ => None,
                    };
                }
                Ok(flags)
            }
            (BuiltinMap::Rotation(_), _) => bad("rotation"),
            (BuiltinMap::Halving, _) => bad("halving"),
            (BuiltinMap::Cycle(_), _) => bad("cycle"),
            (BuiltinMap::AtomPermutation(_), _) => bad("permutation"),
            (BuiltinMap::BlockUnion(_), _) => bad("block union"),
        }
    }

    fn perm_flags(masses: &[Q], perm: &[usize]) -> MapFlags {
        // push-forward density on atom perm[j] is mass(j)/mass(perm[j])
        let mp = (0..perm.len()).all(|j| masses[perm[j]] == masses[j]);
        let dens = (0..perm.len())
            .map(|j| rational::to_f64(&(masses[j].clone() / masses[perm[j]].clone())))
            .fold(0.0, f64::max);
        MapFlags { measure_preserving: mp, modulus: Some(Modulus::Linear(1.0)), density_sup: Some(dens) }
    }

    fn apply(map: &BuiltinMap, x: &Point, precision: u32) -> Point {
        match map {
            BuiltinMap::Identity => *x,
            BuiltinMap::Rotation(a) => {
                let t = x.as_real().expect("validated point");
                Point { component: x.component, coord: Coord::Real(rotate(t, a.approximant_f64(precision))) }
            }
            BuiltinMap::Halving => {
                let t = x.as_real().expect("validated point");
                Point { component: x.component, coord: Coord::Real(t / 2.0) }
            }
            BuiltinMap::Cycle(q) => {
                let j = x.as_atom().expect("validated point");
                Point { component: x.component, coord: Coord::Atom((j + 1) % q) }
            }
            BuiltinMap::AtomPermutation(perm) => {
                let j = x.as_atom().expect("validated point");
                Point { component: x.component, coord: Coord::Atom(perm[j]) }
            }
            BuiltinMap::BlockUnion(maps) => Self::apply(&maps[x.component], x, precision),
        }
    }
}

impl Oracle for MapOracle {
    fn space(&self) -> &SpaceDesc {
        &self.space
    }

    fn flags(&self) -> &MapFlags {
        &self.flags
    }

    fn evaluate(&self, x: &Point, precision: u32) -> Result<Point> {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.space.check(x)?;
        Ok(Self::apply(&self.map, x, precision))
    }

    fn query_count(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }

    fn name(&self) -> String {
        format!("{:?}", self.map)
    }
}

/// `‖𝒦_F‖ = ‖ρ_F‖_∞^{1/p}`; equals 1 for measure-preserving maps.
pub fn koopman_norm_bound(map: &dyn Oracle, p: f64) -> Result<f64> {
    let f = map.flags();
    if f.measure_preserving {
        return Ok(1.0);
    }
    f.density_sup.map(|d| d.powf(1.0 / p)).ok_or(KoopError::UnknownDensity)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreservationReport {
    pub level: u32,
    pub samples: usize,
    /// `(ω(A), estimated ω(F^{-1}A))` per atom in enumeration order.
    pub atoms: Vec<(f64, f64)>,
    pub max_deviation: f64,
}

/// Estimates `ω(F^{-1}A)` for each atom `A` at `level` by stratified
/// midpoint sampling of every continuous component and exact weighting
/// of finite atoms.
pub fn check_measure_preservation(map: &dyn Oracle, tree: &DyadicTree, level: u32, samples: usize) -> Result<PreservationReport> {
    let atoms = tree.level(level)?;
    let space = tree.space();
    let mut hits = vec![0.0f64; atoms.len()];
    let n = samples.max(1);
    for c in 0..space.num_components() {
        let (desc, w) = space.component(c);
        let w = rational::to_f64(&w);
        let pts: Vec<(Point, f64)> = match desc {
            SpaceDesc::FiniteAtoms { masses, .. } => masses
                .iter()
                .enumerate()
                .map(|(j, m)| (Point::in_component(c, Coord::Atom(j)), w * rational::to_f64(m)))
                .collect(),
            _ => (0..n).map(|i| (Point::in_component(c, Coord::Real((i as f64 + 0.5) / n as f64)), w / n as f64)).collect(),
        };
        for (x, mass) in pts {
            let y = map.evaluate(&x, 52)?;
            let k = tree.locate(level, &y)?;
            hits[k] += mass;
        }
    }
    let rows: Vec<(f64, f64)> = atoms.iter().zip(&hits).map(|(a, h)| (a.mass_f64, *h)).collect();
    let max_deviation = rows.iter().map(|(a, h)| (a - h).abs()).fold(0.0, f64::max);
    Ok(PreservationReport { level, samples: n, atoms: rows, max_deviation })
}

/// Sanity check used by configuration parsing.
pub fn angle_in_lowest_terms(a: &Angle) -> bool {
    match a {
        Angle::Rational(t) => num_integer::Integer::gcd(t.numer(), t.denom()).is_one() || t.is_zero(),
        _ => true,
    }
}

//! Model probability spaces and their nested binary partition trees.
//!
//! Four model kinds are supported: the unit interval with Lebesgue measure,
//! the circle in arc coordinate `[0,1)`, finitely many weighted atoms, and a
//! weighted disjoint union of those. Levels are indexed from 0; level 0 is
//! the whole space. Every atom that can be split has exactly two children;
//! a singleton atom of a finite space cannot be split and is carried
//! unchanged to the next level.

use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{KoopError, Result};
use crate::rational::{self, dyadic, q, Q};

/// Default cap on the number of atoms materialised at a single level.
pub const DEFAULT_ATOM_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupNode {
    Leaf(usize),
    Pair(Box<GroupNode>, Box<GroupNode>),
}

impl GroupNode {
    fn halving(lo: usize, hi: usize) -> GroupNode {
        if hi - lo == 1 {
            GroupNode::Leaf(lo)
        } else {
            let mid = lo + (hi - lo).div_ceil(2);
            GroupNode::Pair(Box::new(Self::halving(lo, mid)), Box::new(Self::halving(mid, hi)))
        }
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<usize>) {
        match self {
            GroupNode::Leaf(j) => out.push(*j),
            GroupNode::Pair(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }
}

/// How the atoms of a finite space are grouped into a binary tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Grouping {
    /// Balanced halving; the atom count must be a power of two.
    Dyadic,
    /// Contiguous halving with the larger half first, for any count.
    Halving,
    /// A user-supplied binary grouping.
    Explicit(GroupNode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: Q,
    pub space: SpaceDesc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceDesc {
    UnitInterval,
    Circle,
    FiniteAtoms { masses: Vec<Q>, grouping: Grouping },
    DisjointUnion(Vec<Component>),
}

impl SpaceDesc {
    /// Atoms with the given masses under balanced halving.
    pub fn atoms(masses: Vec<Q>) -> SpaceDesc {
        SpaceDesc::FiniteAtoms { masses, grouping: Grouping::Dyadic }
    }

    /// `n` atoms of equal mass; counts that are not powers of two use halving.
    pub fn uniform_atoms(n: usize) -> SpaceDesc {
        let grouping = if n.is_power_of_two() { Grouping::Dyadic } else { Grouping::Halving };
        SpaceDesc::FiniteAtoms { masses: vec![q(1, n as i64); n], grouping }
    }

    pub fn union(parts: Vec<(Q, SpaceDesc)>) -> SpaceDesc {
        SpaceDesc::DisjointUnion(parts.into_iter().map(|(weight, space)| Component { weight, space }).collect())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceDesc::UnitInterval | SpaceDesc::Circle => Ok(()),
            SpaceDesc::FiniteAtoms { masses, grouping: _ } => {
                if masses.is_empty() {
                    return Err(KoopError::Config("finite space needs at least one atom".into()));
                }
                if masses.iter().any(|m| *m <= Q::zero()) {
                    return Err(KoopError::Config("atom masses must be positive".into()));
                }
                if rational::sum(masses) != Q::one() {
                    return Err(KoopError::Config("atom masses must sum to 1".into()));
                }
                self.group_root().map(|_| ())
            }
            SpaceDesc::DisjointUnion(parts) => {
                if parts.is_empty() {
                    return Err(KoopError::Config("union needs at least one component".into()));
                }
                let mut total = Q::zero();
                for c in parts {
                    if c.weight <= Q::zero() {
                        return Err(KoopError::Config("component weights must be positive".into()));
                    }
                    if matches!(c.space, SpaceDesc::DisjointUnion(_)) {
                        return Err(KoopError::UnsupportedSpace("nested unions".into()));
                    }
                    c.space.validate()?;
                    total += &c.weight;
                }
                if total != Q::one() {
                    return Err(KoopError::Config("component weights must sum to 1".into()));
                }
                Ok(())
            }
        }
    }

    fn group_root(&self) -> Result<GroupNode> {
        let SpaceDesc::FiniteAtoms { masses, grouping } = self else {
            unreachable!("group_root on a non-atomic space")
        };
        let n = masses.len();
        match grouping {
            Grouping::Dyadic => {
                if !n.is_power_of_two() {
                    return Err(KoopError::NonDyadicAtomCount(n));
                }
                Ok(GroupNode::halving(0, n))
            }
            Grouping::Halving => Ok(GroupNode::halving(0, n)),
            Grouping::Explicit(node) => {
                let mut leaves = node.leaves();
                leaves.sort_unstable();
                if leaves != (0..n).collect::<Vec<_>>() {
                    return Err(KoopError::Config("grouping must list every atom exactly once".into()));
                }
                Ok(node.clone())
            }
        }
    }

    pub fn num_components(&self) -> usize {
        match self {
            SpaceDesc::DisjointUnion(parts) => parts.len(),
            _ => 1,
        }
    }

    /// Component description and weight.
    pub fn component(&self, c: usize) -> (&SpaceDesc, Q) {
        match self {
            SpaceDesc::DisjointUnion(parts) => (&parts[c].space, parts[c].weight.clone()),
            other => (other, Q::one()),
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        if x.component >= self.num_components() {
            return false;
        }
        let (desc, _) = self.component(x.component);
        match (desc, x.coord) {
            (SpaceDesc::UnitInterval, Coord::Real(t)) => (0.0..=1.0).contains(&t),
            (SpaceDesc::Circle, Coord::Real(t)) => (0.0..1.0).contains(&t),
            (SpaceDesc::FiniteAtoms { masses, .. }, Coord::Atom(j)) => j < masses.len(),
            _ => false,
        }
    }

    pub fn check(&self, x: &Point) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(KoopError::PointOutsideSpace(x.to_string()))
        }
    }

    /// Metric: Euclidean on the interval, arc length on the circle (total
    /// length 1), discrete on atoms, and distance 1 across components.
    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        if a.component != b.component {
            return 1.0;
        }
        match (a.coord, b.coord) {
            (Coord::Real(x), Coord::Real(y)) => {
                let d = (x - y).abs();
                match self.component(a.component).0 {
                    SpaceDesc::Circle => d.min(1.0 - d),
                    _ => d,
                }
            }
            (Coord::Atom(i), Coord::Atom(j)) => {
                if i == j {
                    0.0
                } else {
                    1.0
                }
            }
            _ => 1.0,
        }
    }

    /// True when every mass in the model is an exact rational.
    pub fn is_rational(&self) -> bool {
        true
    }

    fn root_region(&self) -> Result<Region> {
        match self {
            SpaceDesc::DisjointUnion(parts) if parts.len() > 1 => Ok(Region::Group { comps: (0..parts.len()).collect() }),
            SpaceDesc::DisjointUnion(_) => self.component_root(0),
            _ => self.component_root(0),
        }
    }

    fn component_root(&self, c: usize) -> Result<Region> {
        let (desc, _) = self.component(c);
        Ok(match desc {
            SpaceDesc::UnitInterval => Region::Interval { comp: c, k: 0, level: 0 },
            SpaceDesc::Circle => Region::Arc { comp: c, k: 0, level: 0 },
            SpaceDesc::FiniteAtoms { .. } => {
                let node = desc.group_root()?;
                let members = node.leaves();
                Region::Atoms { comp: c, node, members }
            }
            SpaceDesc::DisjointUnion(_) => return Err(KoopError::UnsupportedSpace("nested unions".into())),
        })
    }
}

impl fmt::Display for SpaceDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceDesc::UnitInterval => write!(f, "interval"),
            SpaceDesc::Circle => write!(f, "circle"),
            SpaceDesc::FiniteAtoms { masses, .. } => write!(f, "atoms({})", masses.len()),
            SpaceDesc::DisjointUnion(parts) => {
                write!(f, "union(")?;
                for (i, c) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}:{}", rational::to_string(&c.weight), c.space)?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Coord {
    Real(f64),
    Atom(usize),
}

/// A point of a model space: a component index and a coordinate in it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub component: usize,
    pub coord: Coord,
}

/// Bitwise identity of a point, used for caches and locked adversaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointKey(pub usize, pub u8, pub u64);

impl Point {
    pub fn real(x: f64) -> Point {
        Point { component: 0, coord: Coord::Real(x) }
    }

    pub fn atom(j: usize) -> Point {
        Point { component: 0, coord: Coord::Atom(j) }
    }

    pub fn in_component(component: usize, coord: Coord) -> Point {
        Point { component, coord }
    }

    pub fn key(&self) -> PointKey {
        match self.coord {
            Coord::Real(x) => PointKey(self.component, 0, x.to_bits()),
            Coord::Atom(j) => PointKey(self.component, 1, j as u64),
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self.coord {
            Coord::Real(x) => Some(x),
            Coord::Atom(_) => None,
        }
    }

    pub fn as_atom(&self) -> Option<usize> {
        match self.coord {
            Coord::Atom(j) => Some(j),
            Coord::Real(_) => None,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.coord {
            Coord::Real(x) => write!(f, "{}:{x:?}", self.component),
            Coord::Atom(j) => write!(f, "{}:#{j}", self.component),
        }
    }
}

/// Geometric description of one atom.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// A group of at least two whole components of a union.
    Group { comps: Vec<usize> },
    /// `[k/2^level, (k+1)/2^level)`, closed at 1 for the last interval.
    Interval { comp: usize, k: u64, level: u32 },
    /// Half-open dyadic arc `[k/2^level, (k+1)/2^level)` of the circle.
    Arc { comp: usize, k: u64, level: u32 },
    /// A group of atoms of a finite component.
    Atoms { comp: usize, node: GroupNode, members: Vec<usize> },
}

impl Region {
    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Region::Group { comps } => comps.contains(&x.component),
            Region::Interval { comp, k, level } => {
                if x.component != *comp {
                    return false;
                }
                let Coord::Real(t) = x.coord else { return false };
                let scale = (1u64 << level) as f64;
                let lo = *k as f64 / scale;
                let hi = (*k + 1) as f64 / scale;
                (lo <= t && t < hi) || (t == 1.0 && hi == 1.0)
            }
            Region::Arc { comp, k, level } => {
                if x.component != *comp {
                    return false;
                }
                let Coord::Real(t) = x.coord else { return false };
                let scale = (1u64 << level) as f64;
                *k as f64 / scale <= t && t < (*k + 1) as f64 / scale
            }
            Region::Atoms { comp, members, .. } => {
                x.component == *comp && matches!(x.coord, Coord::Atom(j) if members.contains(&j))
            }
        }
    }

    /// End points `(lo, hi)` of an interval or arc region.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Region::Interval { k, level, .. } | Region::Arc { k, level, .. } => {
                let scale = (1u64 << level) as f64;
                Some((*k as f64 / scale, (*k + 1) as f64 / scale))
            }
            _ => None,
        }
    }

    fn split(&self, space: &SpaceDesc) -> Result<Option<(Region, Region)>> {
        Ok(match self {
            Region::Group { comps } => {
                let mid = comps.len().div_ceil(2);
                let side = |c: &[usize]| -> Result<Region> {
                    if c.len() == 1 {
                        space.component_root(c[0])
                    } else {
                        Ok(Region::Group { comps: c.to_vec() })
                    }
                };
                Some((side(&comps[..mid])?, side(&comps[mid..])?))
            }
            Region::Interval { comp, k, level } => Some((
                Region::Interval { comp: *comp, k: 2 * k, level: level + 1 },
                Region::Interval { comp: *comp, k: 2 * k + 1, level: level + 1 },
            )),
            Region::Arc { comp, k, level } => Some((
                Region::Arc { comp: *comp, k: 2 * k, level: level + 1 },
                Region::Arc { comp: *comp, k: 2 * k + 1, level: level + 1 },
            )),
            Region::Atoms { comp, node, .. } => match node {
                GroupNode::Leaf(_) => None,
                GroupNode::Pair(a, b) => Some((
                    Region::Atoms { comp: *comp, node: (**a).clone(), members: a.leaves() },
                    Region::Atoms { comp: *comp, node: (**b).clone(), members: b.leaves() },
                )),
            },
        })
    }

    fn mass(&self, space: &SpaceDesc) -> Q {
        match self {
            Region::Group { comps } => comps.iter().map(|&c| space.component(c).1).fold(Q::zero(), |a, b| a + b),
            Region::Interval { comp, level, .. } | Region::Arc { comp, level, .. } => {
                space.component(*comp).1 * dyadic(1, *level)
            }
            Region::Atoms { comp, members, .. } => {
                let (desc, w) = space.component(*comp);
                let SpaceDesc::FiniteAtoms { masses, .. } = desc else { unreachable!() };
                w * rational::sum(members.iter().map(|&j| &masses[j]))
            }
        }
    }

    fn rep(&self, space: &SpaceDesc) -> Point {
        match self {
            Region::Group { comps } => {
                let root = space.component_root(comps[0]).expect("validated space");
                root.rep(space)
            }
            Region::Interval { comp, k, level } | Region::Arc { comp, k, level } => {
                let x = (2 * k + 1) as f64 / (1u64 << (level + 1)) as f64;
                Point::in_component(*comp, Coord::Real(x))
            }
            Region::Atoms { comp, members, .. } => Point::in_component(*comp, Coord::Atom(members[0])),
        }
    }

    fn diam(&self) -> Q {
        match self {
            Region::Group { .. } => Q::one(),
            Region::Interval { level, .. } => dyadic(1, *level),
            Region::Arc { level, .. } => {
                let d = dyadic(1, *level);
                if d > q(1, 2) {
                    q(1, 2)
                } else {
                    d
                }
            }
            Region::Atoms { members, .. } => {
                if members.len() > 1 {
                    Q::one()
                } else {
                    Q::zero()
                }
            }
        }
    }
}

/// Binary path from the root; lexicographic order is the enumeration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Path(pub Vec<bool>);

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "root");
        }
        for b in &self.0 {
            write!(f, "{}", if *b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub path: Path,
    pub level: u32,
    pub region: Region,
    pub mass: Q,
    pub mass_f64: f64,
    pub rep: Point,
    pub diam: Q,
}

impl Atom {
    fn new(space: &SpaceDesc, region: Region, path: Path, level: u32) -> Atom {
        let mass = region.mass(space);
        Atom {
            mass_f64: rational::to_f64(&mass),
            rep: region.rep(space),
            diam: region.diam(),
            path,
            level,
            region,
            mass,
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.region.contains(x)
    }
}

/// How an atom continues at the next level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Children {
    Split(usize, usize),
    Carried(usize),
    Leaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AtomId {
    pub level: u32,
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct DyadicTree {
    space: SpaceDesc,
    levels: Vec<Vec<Atom>>,
    children: Vec<Vec<Children>>,
    parents: Vec<Vec<usize>>,
}

impl DyadicTree {
    pub fn build(space: SpaceDesc, depth: u32) -> Result<DyadicTree> {
        Self::build_with_limit(space, depth, DEFAULT_ATOM_LIMIT)
    }

    pub fn build_with_limit(space: SpaceDesc, depth: u32, limit: usize) -> Result<DyadicTree> {
        space.validate()?;
        let root = Atom::new(&space, space.root_region()?, Path::default(), 0);
        let mut levels = vec![vec![root]];
        let mut children = Vec::new();
        let mut parents = vec![vec![]];
        for level in 0..depth {
            let prev = &levels[level as usize];
            let mut next = Vec::with_capacity(prev.len() * 2);
            let mut kids = Vec::with_capacity(prev.len());
            let mut par = Vec::with_capacity(prev.len() * 2);
            for (i, atom) in prev.iter().enumerate() {
                match atom.region.split(&space)? {
                    Some((a, b)) => {
                        let mut pa = atom.path.clone();
                        pa.0.push(false);
                        let mut pb = atom.path.clone();
                        pb.0.push(true);
                        kids.push(Children::Split(next.len(), next.len() + 1));
                        next.push(Atom::new(&space, a, pa, level + 1));
                        next.push(Atom::new(&space, b, pb, level + 1));
                        par.push(i);
                        par.push(i);
                    }
                    None => {
                        kids.push(Children::Carried(next.len()));
                        let mut carried = atom.clone();
                        carried.level = level + 1;
                        next.push(carried);
                        par.push(i);
                    }
                }
                if next.len() > limit {
                    return Err(KoopError::DepthOverflow { level: level + 1, atoms: next.len(), limit });
                }
            }
            children.push(kids);
            parents.push(par);
            levels.push(next);
        }
        children.push(vec![Children::Leaf; levels[depth as usize].len()]);
        Ok(DyadicTree { space, levels, children, parents })
    }

    pub fn space(&self) -> &SpaceDesc {
        &self.space
    }

    pub fn depth(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    pub fn level(&self, m: u32) -> Result<&[Atom]> {
        self.levels
            .get(m as usize)
            .map(|v| v.as_slice())
            .ok_or(KoopError::LevelOutOfRange { level: m, depth: self.depth() })
    }

    pub fn atom(&self, id: AtomId) -> Result<&Atom> {
        self.level(id.level)?
            .get(id.index)
            .ok_or(KoopError::UnknownAtom { level: id.level, index: id.index })
    }

    pub fn atom_mass(&self, id: AtomId) -> Result<Q> {
        Ok(self.atom(id)?.mass.clone())
    }

    pub fn children(&self, id: AtomId) -> Result<Children> {
        self.atom(id)?;
        Ok(self.children[id.level as usize][id.index])
    }

    pub fn parent(&self, id: AtomId) -> Result<Option<usize>> {
        self.atom(id)?;
        Ok(if id.level == 0 { None } else { Some(self.parents[id.level as usize][id.index]) })
    }

    /// Index at level `ancestor_level` of the ancestor of atom `index` at `level`.
    pub fn ancestor(&self, level: u32, index: usize, ancestor_level: u32) -> usize {
        let mut i = index;
        for l in (ancestor_level + 1..=level).rev() {
            i = self.parents[l as usize][i];
        }
        i
    }

    /// Largest atom diameter at level `m`.
    pub fn mesh(&self, m: u32) -> Result<Q> {
        Ok(self.level(m)?.iter().map(|a| a.diam.clone()).max().unwrap_or_else(Q::zero))
    }

    /// Index of the atom at level `m` that contains `x`.
    pub fn locate(&self, m: u32, x: &Point) -> Result<usize> {
        self.level(m)?;
        if !self.space.contains(x) {
            return Err(KoopError::PointOutsideSpace(x.to_string()));
        }
        let mut i = 0usize;
        for l in 0..m {
            i = match self.children[l as usize][i] {
                Children::Split(a, b) => {
                    if self.levels[l as usize + 1][a].contains(x) {
                        a
                    } else {
                        b
                    }
                }
                Children::Carried(c) => c,
                Children::Leaf => unreachable!("leaf below depth"),
            };
        }
        Ok(i)
    }

    /// Number of atoms at level `m`.
    pub fn count(&self, m: u32) -> Result<usize> {
        Ok(self.level(m)?.len())
    }

    /// Masses of level `m` as floats, in enumeration order.
    pub fn masses_f64(&self, m: u32) -> Result<Vec<f64>> {
        Ok(self.level(m)?.iter().map(|a| a.mass_f64).collect())
    }

    pub fn reps(&self, m: u32) -> Result<Vec<Point>> {
        Ok(self.level(m)?.iter().map(|a| a.rep).collect())
    }

    /// Whether atom `index` at level `m` is split at the next level.
    pub fn is_split(&self, m: u32, index: usize) -> bool {
        matches!(self.children[m as usize][index], Children::Split(..))
    }
}

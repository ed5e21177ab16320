//! Markov-partition data, invariant-partition refinement, the averaging
//! operator `E_F` and the single-limit Markov tower.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::dictionary::HaarDictionary;
use crate::error::{KoopError, Result};
use crate::maps::{BuiltinMap, MapOracle, Oracle};
use crate::rational::{self, Q};
use crate::space::{DyadicTree, Grouping, SpaceDesc};
use crate::tower::{build_section, make_grid, residual_field, threshold_set, CompactSet, GridSpec, Stage, TowerOptions};

/// Atoms with masses and, for each atom `k`, the index set `I(k)` with
/// `F(P_k) = ∪_{j ∈ I(k)} P_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSpec {
    pub masses: Vec<Q>,
    pub images: Vec<Vec<usize>>,
}

/// Serialised form `{"atoms": [...], "images": [[...], ...]}`; masses are
/// strings such as `"1/4"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovSpecJson {
    pub atoms: Vec<String>,
    pub images: Vec<Vec<usize>>,
}

impl MarkovSpec {
    pub fn new(masses: Vec<Q>, images: Vec<Vec<usize>>) -> Result<MarkovSpec> {
        let spec = MarkovSpec { masses, images };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_permutation(masses: Vec<Q>, perm: &[usize]) -> Result<MarkovSpec> {
        MarkovSpec::new(masses, perm.iter().map(|&j| vec![j]).collect())
    }

    pub fn from_json(j: &MarkovSpecJson) -> Result<MarkovSpec> {
        let masses = j.atoms.iter().map(|s| rational::parse(s)).collect::<Result<Vec<Q>>>()?;
        MarkovSpec::new(masses, j.images.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.masses.len();
        if n == 0 {
            return Err(KoopError::Config("Markov spec has no atoms".into()));
        }
        if self.images.len() != n {
            return Err(KoopError::Config(format!("{} image sets for {n} atoms", self.images.len())));
        }
        if self.masses.iter().any(|m| !m.is_positive()) || rational::sum(&self.masses) != Q::from_integer(1.into()) {
            return Err(KoopError::Config("atom masses must be positive and sum to 1".into()));
        }
        for (k, img) in self.images.iter().enumerate() {
            if img.is_empty() || img.iter().any(|&j| j >= n) {
                return Err(KoopError::Config(format!("image set of atom {k} is empty or out of range")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// The permutation when every image is a single atom and the map is bijective.
    pub fn permutation(&self) -> Option<Vec<usize>> {
        let perm: Vec<usize> = self.images.iter().map(|img| if img.len() == 1 { img[0] } else { usize::MAX }).collect();
        let mut seen = vec![false; perm.len()];
        for &j in &perm {
            if j == usize::MAX || std::mem::replace(&mut seen[j], true) {
                return None;
            }
        }
        Some(perm)
    }
}

/// A partition of the atom indices into blocks, with block masses.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantPartition {
    pub blocks: Vec<Vec<usize>>,
    pub block_masses: Vec<Q>,
    pub atom_masses: Vec<Q>,
    /// `block_of[k]` is the block containing atom `k`.
    pub block_of: Vec<usize>,
}

impl InvariantPartition {
    pub fn from_blocks(mut blocks: Vec<Vec<usize>>, atom_masses: Vec<Q>) -> Result<InvariantPartition> {
        let n = atom_masses.len();
        for b in blocks.iter_mut() {
            b.sort_unstable();
        }
        blocks.sort();
        let mut block_of = vec![usize::MAX; n];
        for (i, b) in blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(KoopError::InvalidParameter("empty block".into()));
            }
            for &k in b {
                if k >= n || block_of[k] != usize::MAX {
                    return Err(KoopError::InvalidParameter(format!("atom {k} is missing or repeated in the blocks")));
                }
                block_of[k] = i;
            }
        }
        if block_of.contains(&usize::MAX) {
            return Err(KoopError::InvalidParameter("blocks do not cover every atom".into()));
        }
        let block_masses = blocks.iter().map(|b| rational::sum(b.iter().map(|&k| &atom_masses[k]))).collect();
        Ok(InvariantPartition { blocks, block_masses, atom_masses, block_of })
    }

    pub fn singletons(atom_masses: Vec<Q>) -> InvariantPartition {
        let n = atom_masses.len();
        Self::from_blocks((0..n).map(|k| vec![k]).collect(), atom_masses).expect("singletons partition")
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// True when every block equals its preimage under the spec's map.
    pub fn is_invariant(&self, spec: &MarkovSpec) -> bool {
        (0..spec.len()).all(|k| spec.images[k].iter().all(|&j| self.block_of[j] == self.block_of[k]))
    }

    pub fn is_block_constant(&self, g: &[Q]) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|&k| g[k] == g[b[0]]))
    }
}

/// Join `𝒫 ∨ F^{-1}𝒫 ∨ F^{-2}𝒫 ∨ …` of the initial blocks, computed on
/// index sets until the block count is stable.
pub fn refine_invariant_partition(spec: &MarkovSpec, initial: &InvariantPartition, bound: usize) -> Result<InvariantPartition> {
    spec.validate()?;
    if initial.atom_masses != spec.masses {
        return Err(KoopError::InvalidParameter("partition and spec disagree on atom masses".into()));
    }
    if bound < initial.len() {
        return Err(KoopError::InvalidParameter(format!("bound {bound} is below the initial block count {}", initial.len())));
    }
    let n = spec.len();
    let mut label: Vec<usize> = initial.block_of.clone();
    let mut count = initial.len();
    loop {
        // atoms stay together when their labels and the label sets of their images agree
        let mut words: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let keys: Vec<(usize, Vec<usize>)> = (0..n)
            .map(|k| {
                let mut img: Vec<usize> = spec.images[k].iter().map(|&j| label[j]).collect();
                img.sort_unstable();
                img.dedup();
                (label[k], img)
            })
            .collect();
        for key in &keys {
            let next = words.len();
            words.entry(key.clone()).or_insert(next);
        }
        if words.len() > bound {
            return Err(KoopError::InfiniteRefinement(bound));
        }
        let next: Vec<usize> = keys.iter().map(|key| words[key]).collect();
        if words.len() == count {
            break;
        }
        count = words.len();
        label = next;
    }
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, &l) in label.iter().enumerate() {
        blocks.entry(l).or_default().push(k);
    }
    InvariantPartition::from_blocks(blocks.into_values().collect(), spec.masses.clone())
}

/// One block per cycle of the permutation.
pub fn invariant_blocks_from_cycles(perm: &[usize], masses: Vec<Q>) -> Result<InvariantPartition> {
    let n = perm.len();
    if masses.len() != n {
        return Err(KoopError::InvalidParameter("permutation and masses differ in length".into()));
    }
    let mut seen = vec![false; n];
    for &j in perm {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(KoopError::InvalidParameter("not a permutation".into()));
        }
    }
    let mut done = vec![false; n];
    let mut blocks = Vec::new();
    for s in 0..n {
        if done[s] {
            continue;
        }
        let mut b = Vec::new();
        let mut k = s;
        while !done[k] {
            done[k] = true;
            b.push(k);
            k = perm[k];
        }
        blocks.push(b);
    }
    InvariantPartition::from_blocks(blocks, masses)
}

/// `(E_F g)(x) = Σ_A 1_A(x) a_A^{-1} ∫_A g dω` on atom step functions.
pub fn conditional_expectation_ef(part: &InvariantPartition, g: &[Q]) -> Result<Vec<Q>> {
    if g.len() != part.atom_masses.len() {
        return Err(KoopError::ShapeMismatch((g.len(), 1), (part.atom_masses.len(), 1)));
    }
    let avg: Vec<Q> = part
        .blocks
        .iter()
        .zip(&part.block_masses)
        .map(|(b, a)| {
            let mut s = Q::zero();
            for &k in b {
                s += &g[k] * &part.atom_masses[k];
            }
            s / a
        })
        .collect();
    Ok((0..g.len()).map(|k| avg[part.block_of[k]].clone()).collect())
}

/// Koopman action `g ↦ g ∘ F` for permutation dynamics.
pub fn compose(g: &[Q], perm: &[usize]) -> Vec<Q> {
    perm.iter().map(|&j| g[j].clone()).collect()
}

/// `Σ_k ω_k |g_k|^p`, the `p`-th power of the norm, in floating point.
pub fn norm_pow(g: &[Q], masses: &[Q], p: f64) -> f64 {
    g.iter().zip(masses).map(|(x, m)| rational::to_f64(m) * rational::to_f64(x).abs().powf(p)).sum()
}

/// Atom space with the spec's masses; non-power-of-two counts use halving.
pub fn spec_space(spec: &MarkovSpec) -> SpaceDesc {
    let grouping = if spec.len().is_power_of_two() { Grouping::Dyadic } else { Grouping::Halving };
    SpaceDesc::FiniteAtoms { masses: spec.masses.clone(), grouping }
}

fn leaf_depth(n: usize) -> u32 {
    n.next_power_of_two().trailing_zeros()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovRun {
    pub partition: InvariantPartition,
    /// Number of Haar elements actually used, `min(n, #atoms)`.
    pub n2: usize,
    pub stage: Stage,
}

/// `Γ_n = {z ∈ grid : h_n(z) < ε − 1/n}` with exact residuals on the atoms.
pub fn markov_tower(spec: &MarkovSpec, eps: f64, n: usize, p: f64, grid: &GridSpec) -> Result<MarkovRun> {
    spec.validate()?;
    let perm = spec
        .permutation()
        .ok_or_else(|| KoopError::UnsupportedSpace("the Markov tower runs on permutation dynamics only".into()))?;
    let f = MapOracle::new(spec_space(spec), BuiltinMap::AtomPermutation(perm))?;
    markov_tower_with(spec, &f, eps, n, p, grid)
}

/// The Markov tower run against an arbitrary oracle on the spec's atom space.
pub fn markov_tower_with(spec: &MarkovSpec, f: &dyn Oracle, eps: f64, n: usize, p: f64, grid: &GridSpec) -> Result<MarkovRun> {
    let partition = refine_invariant_partition(spec, &InvariantPartition::singletons(spec.masses.clone()), spec.len())?;
    let space = spec_space(spec);
    if f.space() != &space {
        return Err(KoopError::UnsupportedSpace(format!("oracle acts on {}, the spec on {space}", f.space())));
    }
    let depth = leaf_depth(spec.len());
    let tree = Arc::new(DyadicTree::build(space, depth)?);
    let n2 = n.min(spec.len());
    let dict = HaarDictionary::build(tree, p, n2)?;
    let threshold = eps - 1.0 / n as f64;
    let mut warnings = Vec::new();
    if threshold <= 0.0 {
        warnings.push(format!("threshold ε − 1/n = {threshold} is not positive at n = {n}; the output set is empty"));
        let stage = Stage { set: CompactSet { mesh: grid.mesh.clone(), points: Vec::new() }, warnings };
        return Ok(MarkovRun { partition, n2, stage });
    }
    let mode = if p == 2.0 { crate::residual::ResidualMode::P2Oracle } else { crate::residual::ResidualMode::RatioNetSearch };
    let opts = TowerOptions { p, mode, ..TowerOptions::default() };
    let sec = build_section(f, &dict, n2, depth, &opts)?;
    let pts = make_grid(grid);
    let vals = residual_field(&sec, &pts)?;
    Ok(MarkovRun { partition, n2, stage: Stage { set: threshold_set(&pts, &vals, threshold, &grid.mesh), warnings } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn uniform(n: usize) -> Vec<Q> {
        vec![q(1, n as i64); n]
    }

    #[test]
    fn identity_refinement_is_idle() {
        let spec = MarkovSpec::from_permutation(uniform(4), &[0, 1, 2, 3]).unwrap();
        let p = InvariantPartition::singletons(uniform(4));
        assert_eq!(refine_invariant_partition(&spec, &p, 4).unwrap(), p);
    }

    #[test]
    fn four_cycle_refines_to_singletons() {
        let spec = MarkovSpec::from_permutation(uniform(4), &[1, 2, 3, 0]).unwrap();
        let p = InvariantPartition::from_blocks(vec![vec![0, 1], vec![2, 3]], uniform(4)).unwrap();
        let r = refine_invariant_partition(&spec, &p, 4).unwrap();
        assert_eq!(r.blocks, vec![vec![0], vec![1], vec![2], vec![3]]);
        assert_eq!(refine_invariant_partition(&spec, &p, 3).unwrap_err(), KoopError::InfiniteRefinement(3));
    }

    #[test]
    fn cycle_blocks() {
        let b = invariant_blocks_from_cycles(&[1, 0, 3, 2], uniform(4)).unwrap();
        assert_eq!(b.blocks, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(invariant_blocks_from_cycles(&[0, 1, 2, 3], uniform(4)).unwrap().len(), 4);
        let c = invariant_blocks_from_cycles(&[1, 2, 3, 0], uniform(4)).unwrap();
        assert_eq!(c.blocks, vec![vec![0, 1, 2, 3]]);
        let spec = MarkovSpec::from_permutation(uniform(4), &[1, 0, 3, 2]).unwrap();
        assert!(b.is_invariant(&spec));
    }

    #[test]
    fn averaging_examples() {
        let p = InvariantPartition::from_blocks(vec![vec![0, 1]], uniform(2)).unwrap();
        assert_eq!(conditional_expectation_ef(&p, &[q(1, 1), q(3, 1)]).unwrap(), vec![q(2, 1), q(2, 1)]);
        let s = InvariantPartition::singletons(uniform(2));
        assert_eq!(conditional_expectation_ef(&s, &[q(1, 1), q(3, 1)]).unwrap(), vec![q(1, 1), q(3, 1)]);
        let w = InvariantPartition::from_blocks(vec![vec![0, 1]], vec![q(1, 4), q(3, 4)]).unwrap();
        assert_eq!(conditional_expectation_ef(&w, &[q(4, 1), q(0, 1)]).unwrap(), vec![q(1, 1), q(1, 1)]);
    }

    #[test]
    fn set_valued_images_are_rejected_by_the_tower() {
        let spec = MarkovSpec::new(uniform(2), vec![vec![0, 1], vec![0]]).unwrap();
        let grid = GridSpec::standard(4);
        assert!(matches!(markov_tower(&spec, 0.5, 4, 2.0, &grid), Err(KoopError::UnsupportedSpace(_))));
    }

    #[test]
    fn two_cycle_tower_hits_both_roots() {
        let spec = MarkovSpec::from_permutation(uniform(2), &[1, 0]).unwrap();
        let grid = GridSpec::with_radius(8, q(2, 1));
        let run = markov_tower(&spec, 0.5, 8, 2.0, &grid).unwrap();
        let pts = run.stage.set.complex();
        assert!(pts.iter().any(|z| (z.re - 1.0).abs() < 1e-12 && z.im == 0.0));
        assert!(pts.iter().any(|z| (z.re + 1.0).abs() < 1e-12 && z.im == 0.0));
        assert!(pts.iter().all(|z| (z - 1.0).norm().min((z + 1.0).norm()) < 0.375));
    }
}

//! Grids, base sets `Γ_{n2,n1}`, the stabilisation filter, the `ε ↓ 0`
//! cascade and Hausdorff traces.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{build_duals, StepDictionary};
use crate::error::{KoopError, Result};
use crate::maps::Oracle;
use crate::rational::{self, Q};
use crate::reference::hausdorff;
use crate::residual::{compression_matrix, sigma_inf_matrix, CompressionMatrix, ResidualMode, SampledSection};

pub const SCHEMA_VERSION: u32 = 1;

/// Square lattice `mesh·(ℤ + iℤ)` intersected with the closed disk of `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub mesh: Q,
    pub radius: Q,
}

impl GridSpec {
    pub fn new(mesh: Q, radius: Q) -> Result<GridSpec> {
        if !mesh.is_positive() || radius.is_negative() {
            return Err(KoopError::InvalidParameter("grid needs mesh > 0 and radius ≥ 0".into()));
        }
        Ok(GridSpec { mesh, radius })
    }

    /// Defaults `mesh = 1/n`, `radius = n`.
    pub fn standard(n: usize) -> GridSpec {
        GridSpec { mesh: rational::q(1, n as i64), radius: rational::qi(n as i64) }
    }

    pub fn with_radius(n: usize, radius: Q) -> GridSpec {
        GridSpec { mesh: rational::q(1, n as i64), radius }
    }
}

/// A lattice point `(k + iℓ)·mesh`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPoint {
    pub k: i64,
    pub l: i64,
}

/// Lattice points sorted by `(k, ℓ)`; membership decided exactly.
pub fn make_grid(spec: &GridSpec) -> Vec<(GridPoint, Complex64)> {
    let ratio = &spec.radius / &spec.mesh;
    let bound = ratio.floor().to_integer().to_i64().unwrap_or(0);
    let r2 = &ratio * &ratio;
    let mesh = rational::to_f64(&spec.mesh);
    let mut out = Vec::new();
    for k in -bound..=bound {
        for l in -bound..=bound {
            if Q::from_integer((k * k + l * l).into()) <= r2 {
                out.push((GridPoint { k, l }, Complex64::new(k as f64 * mesh, l as f64 * mesh)));
            }
        }
    }
    out
}

/// Residual evaluator for one section.
pub enum Section {
    Sampled(SampledSection, ResidualMode, u32),
    Matrix(CompressionMatrix, f64, u32),
}

impl Section {
    pub fn residual(&self, z: Complex64) -> Result<f64> {
        match self {
            Section::Sampled(s, mode, res) => Ok(s.residual(z, *mode, *res)?.h),
            Section::Matrix(m, p, res) => Ok(sigma_inf_matrix(m, z, *p, *res)?.h),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerOptions {
    pub p: f64,
    pub mode: ResidualMode,
    pub precision: u32,
    pub resolution: u32,
}

impl Default for TowerOptions {
    fn default() -> Self {
        TowerOptions { p: 2.0, mode: ResidualMode::P2Oracle, precision: 53, resolution: crate::residual::DEFAULT_RESOLUTION }
    }
}

/// Section of size `n2` sampled at level `n1`.
pub fn build_section(f: &dyn Oracle, dict: &dyn StepDictionary, n2: usize, n1: u32, opts: &TowerOptions) -> Result<Section> {
    match opts.mode {
        ResidualMode::MatrixSigmaInf => {
            let duals = build_duals(dict, n2)?;
            let m = compression_matrix(f, dict, &duals, n2, n1, opts.precision)?;
            Ok(Section::Matrix(m, opts.p, opts.resolution))
        }
        mode => Ok(Section::Sampled(SampledSection::build(f, dict, n2, n1, opts.p, opts.precision)?, mode, opts.resolution)),
    }
}

/// Residuals of a section over a grid, in grid order.
pub fn residual_field(sec: &Section, grid: &[(GridPoint, Complex64)]) -> Result<Vec<f64>> {
    residual_field_with(grid, |z| sec.residual(z))
}

/// Evaluates `h` on every grid point in parallel, keeping grid order.
pub fn residual_field_with(grid: &[(GridPoint, Complex64)], h: impl Fn(Complex64) -> Result<f64> + Sync) -> Result<Vec<f64>> {
    grid.par_iter().map(|(_, z)| h(*z)).collect()
}

/// Finite set of grid points produced by one tower stage.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactSet {
    pub mesh: Q,
    pub points: Vec<GridPoint>,
}

impl CompactSet {
    pub fn complex(&self) -> Vec<Complex64> {
        let m = rational::to_f64(&self.mesh);
        self.points.iter().map(|p| Complex64::new(p.k as f64 * m, p.l as f64 * m)).collect()
    }

    pub fn pairs(&self) -> Vec<[f64; 2]> {
        self.complex().into_iter().map(|z| [z.re, z.im]).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn contains(&self, p: &GridPoint) -> bool {
        self.points.binary_search(p).is_ok()
    }
}

/// Margin below the threshold that a floating-point residual must clear.
pub const ROUNDING_GUARD: f64 = 1e-9;

/// Strict acceptance `h < threshold`, decided with the rounding guard.
pub fn accepts(h: f64, threshold: f64) -> bool {
    h < threshold - ROUNDING_GUARD
}

/// Accepted grid points `{z : h(z) < threshold}`.
pub fn threshold_set(grid: &[(GridPoint, Complex64)], values: &[f64], threshold: f64, mesh: &Q) -> CompactSet {
    let points = grid.iter().zip(values).filter(|(_, &h)| accepts(h, threshold)).map(|((g, _), _)| *g).collect();
    CompactSet { mesh: mesh.clone(), points }
}

fn degenerate_warning(eps: f64, n: usize) -> Option<String> {
    let t = eps - 1.0 / n as f64;
    (t <= 0.0).then(|| format!("threshold ε − 1/n = {t} is not positive at n = {n}; the output set is empty"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub set: CompactSet,
    pub warnings: Vec<String>,
}

/// `Γ_{n2,n1} = {z ∈ grid : h_{n2,n1}(z) < ε − 1/n2}`.
pub fn gamma_base(
    f: &dyn Oracle,
    dict: &dyn StepDictionary,
    eps: f64,
    n2: usize,
    n1: u32,
    grid: &GridSpec,
    opts: &TowerOptions,
) -> Result<Stage> {
    let pts = make_grid(grid);
    let threshold = eps - 1.0 / n2 as f64;
    let warnings: Vec<String> = degenerate_warning(eps, n2).into_iter().collect();
    if threshold <= 0.0 {
        return Ok(Stage { set: CompactSet { mesh: grid.mesh.clone(), points: Vec::new() }, warnings });
    }
    let sec = build_section(f, dict, n2, n1, opts)?;
    let vals = residual_field(&sec, &pts)?;
    Ok(Stage { set: threshold_set(&pts, &vals, threshold, &grid.mesh), warnings })
}

/// Running membership under the filter `∃ k ≤ j : h_k < threshold`.
pub fn stabilized_membership(values: &[f64], threshold: f64) -> Vec<bool> {
    let mut acc = false;
    values
        .iter()
        .map(|&h| {
            acc |= accepts(h, threshold);
            acc
        })
        .collect()
}

/// Stabilised set `{z : ∃ k ≤ n1, h_{n2,k}(z) < ε − 1/n2}` together with the
/// intermediate sets for `k = k0..=n1`.
pub fn gamma_stabilized(
    f: &dyn Oracle,
    dict: &dyn StepDictionary,
    eps: f64,
    n2: usize,
    k0: u32,
    n1: u32,
    grid: &GridSpec,
    opts: &TowerOptions,
) -> Result<Vec<Stage>> {
    let pts = make_grid(grid);
    let threshold = eps - 1.0 / n2 as f64;
    let warnings: Vec<String> = degenerate_warning(eps, n2).into_iter().collect();
    let mut accepted = vec![false; pts.len()];
    let mut out = Vec::new();
    for k in k0..=n1 {
        if threshold > 0.0 {
            let sec = build_section(f, dict, n2, k, opts)?;
            let vals = residual_field(&sec, &pts)?;
            for (a, h) in accepted.iter_mut().zip(&vals) {
                *a |= accepts(*h, threshold);
            }
        }
        let points = pts.iter().zip(&accepted).filter(|(_, &a)| a).map(|((g, _), _)| *g).collect();
        out.push(Stage { set: CompactSet { mesh: grid.mesh.clone(), points }, warnings: warnings.clone() });
    }
    Ok(out)
}

/// One tower output per index `n` in `schedule`, with `n2 = n`.
pub fn sigma2_schedule(
    f: &dyn Oracle,
    dict_for: &dyn Fn(usize) -> Result<Box<dyn StepDictionary>>,
    eps: f64,
    schedule: &[(usize, u32)],
    grid_for: &dyn Fn(usize) -> GridSpec,
    opts: &TowerOptions,
) -> Result<Vec<Stage>> {
    schedule
        .iter()
        .map(|&(n2, n1)| {
            let dict = dict_for(n2)?;
            gamma_base(f, dict.as_ref(), eps, n2, n1, &grid_for(n2), opts)
        })
        .collect()
}

/// Outputs at `ε_m = ε0/2^m` for `m = 0..levels`, with nesting violations.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    pub epsilons: Vec<f64>,
    pub stages: Vec<Stage>,
    /// `(m, point)` with the point in `Γ(ε_{m+1})` but not in `Γ(ε_m)`.
    pub violations: Vec<(usize, GridPoint)>,
}

pub fn sigma_ap_cascade(
    f: &dyn Oracle,
    dict: &dyn StepDictionary,
    eps0: f64,
    levels: usize,
    n2: usize,
    n1: u32,
    grid: &GridSpec,
    opts: &TowerOptions,
) -> Result<Cascade> {
    let pts = make_grid(grid);
    let sec = build_section(f, dict, n2, n1, opts)?;
    let vals = residual_field(&sec, &pts)?;
    let mut epsilons = Vec::new();
    let mut stages: Vec<Stage> = Vec::new();
    for m in 0..levels {
        let eps = eps0 / (1u64 << m) as f64;
        let threshold = eps - 1.0 / n2 as f64;
        let mut warnings: Vec<String> = degenerate_warning(eps, n2).into_iter().collect();
        if eps < rational::to_f64(&grid.mesh) {
            warnings.push(format!("ε = {eps} is below the grid mesh"));
        }
        let set = if threshold > 0.0 { threshold_set(&pts, &vals, threshold, &grid.mesh) } else { CompactSet { mesh: grid.mesh.clone(), points: Vec::new() } };
        epsilons.push(eps);
        stages.push(Stage { set, warnings });
    }
    let mut violations = Vec::new();
    for m in 0..stages.len().saturating_sub(1) {
        for p in &stages[m + 1].set.points {
            if !stages[m].set.contains(p) {
                violations.push((m, *p));
            }
        }
    }
    Ok(Cascade { epsilons, stages, violations })
}

/// `d_H` of each set to the reference; `None` for an empty set.
pub fn hausdorff_trace(sets: &[CompactSet], reference: &[Complex64]) -> Result<Vec<Option<f64>>> {
    if reference.is_empty() {
        return Err(KoopError::EmptyInput);
    }
    sets.iter().map(|s| if s.is_empty() { Ok(None) } else { hausdorff(&s.complex(), reference).map(Some) }).collect()
}

/// Serialised tower output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerReport {
    pub schema_version: u32,
    pub tower: String,
    pub epsilon: f64,
    pub indices: BTreeMap<String, Vec<u64>>,
    pub sets: Vec<Vec<[f64; 2]>>,
    pub hausdorff_trace: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

impl TowerReport {
    pub fn new(tower: &str, epsilon: f64, indices: BTreeMap<String, Vec<u64>>, stages: &[Stage], reference: Option<&[Complex64]>) -> Result<TowerReport> {
        let sets: Vec<CompactSet> = stages.iter().map(|s| s.set.clone()).collect();
        let mut warnings: Vec<String> = stages.iter().flat_map(|s| s.warnings.iter().cloned()).collect();
        let hausdorff_trace = match reference {
            Some(r) => hausdorff_trace(&sets, r)?,
            None => Vec::new(),
        };
        if hausdorff_trace.iter().any(|d| d.is_none()) {
            warnings.push("empty output set: Hausdorff distance is infinite and reported as null".into());
        }
        warnings.dedup();
        Ok(TowerReport {
            schema_version: SCHEMA_VERSION,
            tower: tower.to_string(),
            epsilon,
            indices,
            sets: sets.iter().map(|s| s.pairs()).collect(),
            hausdorff_trace,
            warnings,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dictionary::{HaarDictionary, IndicatorDictionary};
    use crate::maps::{BuiltinMap, MapOracle};
    use crate::rational::q;
    use crate::space::{DyadicTree, SpaceDesc};

    #[test]
    fn grid_counts() {
        assert_eq!(make_grid(&GridSpec::new(q(1, 1), q(1, 1)).unwrap()).len(), 5);
        assert_eq!(make_grid(&GridSpec::new(q(1, 2), q(1, 1)).unwrap()).len(), 13);
        let g = make_grid(&GridSpec::new(q(1, 4), q(0, 1)).unwrap());
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].1, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn identity_base_sets() {
        let tree = Arc::new(DyadicTree::build(SpaceDesc::UnitInterval, 2).unwrap());
        let dict = HaarDictionary::build(tree, 2.0, 4).unwrap();
        let f = MapOracle::new(SpaceDesc::UnitInterval, BuiltinMap::Identity).unwrap();
        let grid = GridSpec::new(q(1, 4), q(2, 1)).unwrap();
        let s = gamma_base(&f, &dict, 0.5, 4, 2, &grid, &TowerOptions::default()).unwrap();
        assert_eq!(s.set.complex(), vec![Complex64::new(1.0, 0.0)]);
        let tree = Arc::new(DyadicTree::build(SpaceDesc::UnitInterval, 3).unwrap());
        let dict = HaarDictionary::build(tree, 2.0, 8).unwrap();
        let s = gamma_base(&f, &dict, 0.125, 8, 3, &GridSpec::standard(8), &TowerOptions::default()).unwrap();
        assert!(s.set.is_empty() && !s.warnings.is_empty());
    }

    #[test]
    fn cycle_base_set_matches_eigenvalue_distance() {
        let space = SpaceDesc::uniform_atoms(2);
        let tree = Arc::new(DyadicTree::build(space.clone(), 1).unwrap());
        let dict = IndicatorDictionary::build(tree, 1).unwrap();
        let f = MapOracle::new(space, BuiltinMap::Cycle(2)).unwrap();
        let grid = GridSpec::new(q(1, 4), q(2, 1)).unwrap();
        let s = gamma_base(&f, &dict, 0.6, 2, 1, &grid, &TowerOptions::default()).unwrap();
        let expect: Vec<Complex64> = make_grid(&grid)
            .into_iter()
            .map(|(_, z)| z)
            .filter(|z| (z - 1.0).norm().min((z + 1.0).norm()) < 0.6 - 0.5)
            .collect();
        assert_eq!(s.set.complex(), expect);
    }

    #[test]
    fn stabilisation_is_existential() {
        assert_eq!(stabilized_membership(&[0.3, 0.5, 0.3], 0.4), vec![true, true, true]);
        assert_eq!(stabilized_membership(&[0.5, 0.3, 0.5], 0.4), vec![false, true, true]);
    }

    #[test]
    fn trace_handles_empty_sets() {
        let s = CompactSet { mesh: q(1, 1), points: vec![] };
        let t = CompactSet { mesh: q(1, 1), points: vec![GridPoint { k: 0, l: 0 }] };
        let r = hausdorff_trace(&[s, t], &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        assert_eq!(r, vec![None, Some(1.0)]);
    }
}

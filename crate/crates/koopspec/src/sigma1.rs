//! Single-limit tower for maps with a modulus of continuity: Lipschitz
//! dictionary, midpoint quadrature at a level `m(n, R)` chosen so that the
//! integrand oscillates by at most `1/(4n)` on every cell.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{KoopError, Result};
use crate::lipschitz::LipschitzDictionary;
use crate::maps::Oracle;
use crate::netsearch::{NetOptions, RatioProblem};
use crate::residual::{P2Section, DEFAULT_RESOLUTION};
use crate::space::Point;
use crate::tower::{make_grid, residual_field_with, threshold_set, CompactSet, GridSpec, Stage};

/// Cells per parallel work unit.
const CHUNK: u64 = 1 << 15;
/// Coarse quadrature offset used for the norm-equivalence estimate.
const ALPHA_OFFSET: u32 = 6;
/// Largest level the search for `m(n, R)` will consider.
const MAX_LEVEL: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigma1Options {
    pub p: f64,
    /// Radius `R` bounding `|z|` in the quadrature lemma.
    pub radius: f64,
    pub precision: u32,
    /// Replaces the computed quadrature level.
    pub quad_level: Option<u32>,
    /// Largest admissible number of quadrature cells.
    pub cell_limit: u64,
    /// Net resolution for `p ≠ 2`.
    pub resolution: u32,
}

impl Default for Sigma1Options {
    fn default() -> Self {
        Sigma1Options { p: 2.0, radius: 2.0, precision: 53, quad_level: None, cell_limit: 1 << 28, resolution: DEFAULT_RESOLUTION }
    }
}

/// Constants behind the choice of `m(n, R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadLevel {
    pub m: u32,
    /// Lower bound used for `‖Θ_n c‖_p ≥ α̂ ‖c‖_p`.
    pub alpha_hat: f64,
    /// Bound on `‖c‖_1` over the unit sphere of `V_n`.
    pub coeff_bound: f64,
    /// `C_n` in `|w(x) − w(y)| ≤ C_n (α(d) + d)`.
    pub c_n: f64,
}

fn cell_mid(k: u64, m: u32) -> f64 {
    (k as f64 + 0.5) / (m as f64).exp2()
}

/// Rows `(θ_j(x), θ_j(F x))` for the midpoint of cell `k` at level `m`.
fn cell_row(f: &dyn Oracle, dict: &LipschitzDictionary, k: u64, m: u32, precision: u32, s: &mut Vec<(usize, f64)>, t: &mut Vec<(usize, f64)>) -> Result<()> {
    let x = cell_mid(k, m);
    let y = f.evaluate(&Point::real(x), precision)?;
    dict.weights_at(x, s);
    dict.weights_at(y.as_real().ok_or_else(|| KoopError::UnsupportedSpace("image is not a real point".into()))?, t);
    Ok(())
}

/// Gram matrix of `[S, T]` under the level-`m` midpoint rule, summed in a
/// fixed chunk order.
fn quadrature_gram(f: &dyn Oracle, dict: &LipschitzDictionary, m: u32, precision: u32) -> Result<DMatrix<f64>> {
    let n = dict_len(dict);
    let cells = 1u64 << m;
    let w = 1.0 / cells as f64;
    let chunks = cells.div_ceil(CHUNK);
    let partial: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut g = vec![0.0; 4 * n * n];
            let mut s = Vec::with_capacity(5);
            let mut t = Vec::with_capacity(5);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(10);
            for k in c * CHUNK..((c + 1) * CHUNK).min(cells) {
                cell_row(f, dict, k, m, precision, &mut s, &mut t)?;
                row.clear();
                row.extend(s.iter().cloned());
                row.extend(t.iter().map(|&(j, v)| (n + j, v)));
                for &(a, va) in &row {
                    for &(b, vb) in &row {
                        g[a * 2 * n + b] += w * va * vb;
                    }
                }
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    for part in &partial {
        for a in 0..2 * n {
            for b in 0..2 * n {
                g[(a, b)] += part[a * 2 * n + b];
            }
        }
    }
    Ok(g)
}

fn dict_len(dict: &LipschitzDictionary) -> usize {
    crate::dictionary::Dictionary::len(dict)
}

/// Square factor `R` with `RᵀR = G` for a symmetric positive semidefinite `G`.
fn gram_factor(g: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(g);
    let mut r = eig.eigenvectors.transpose();
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        r.row_mut(i).scale_mut(l.max(0.0).sqrt());
    }
    r
}

/// Dense sampled rows at level `m`, for the net-search path.
fn quadrature_rows(f: &dyn Oracle, dict: &LipschitzDictionary, m: u32, precision: u32) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = dict_len(dict);
    let cells = 1usize << m;
    let mut s_mat = DMatrix::zeros(cells, n);
    let mut t_mat = DMatrix::zeros(cells, n);
    let mut s = Vec::new();
    let mut t = Vec::new();
    for k in 0..cells {
        cell_row(f, dict, k as u64, m, precision, &mut s, &mut t)?;
        for &(j, v) in &s {
            s_mat[(k, j)] = v;
        }
        for &(j, v) in &t {
            t_mat[(k, j)] = v;
        }
    }
    Ok((s_mat, t_mat))
}

/// Quadrature residual `ĥ_n(z)` at a fixed level.
pub enum QuadSection {
    P2(P2Section),
    Net { s: DMatrix<f64>, t: DMatrix<f64>, p: f64, resolution: u32 },
}

impl QuadSection {
    pub fn build(f: &dyn Oracle, dict: &LipschitzDictionary, m: u32, opts: &Sigma1Options) -> Result<QuadSection> {
        let cells = 1u64.checked_shl(m).unwrap_or(u64::MAX);
        if opts.p == 2.0 {
            if cells > opts.cell_limit {
                return Err(KoopError::QuadratureTooFine { level: m, cells, limit: opts.cell_limit });
            }
            let g = quadrature_gram(f, dict, m, opts.precision)?;
            return Ok(QuadSection::P2(P2Section::from_factor(dict_len(dict), gram_factor(g))));
        }
        // dense rows are kept in memory on this path
        let limit = opts.cell_limit.min(1 << 14);
        if cells > limit {
            return Err(KoopError::QuadratureTooFine { level: m, cells, limit });
        }
        let (s, t) = quadrature_rows(f, dict, m, opts.precision)?;
        Ok(QuadSection::Net { s, t, p: opts.p, resolution: opts.resolution })
    }

    pub fn residual(&self, z: Complex64) -> Result<f64> {
        match self {
            QuadSection::P2(sec) => Ok(sec.residual(z)?.0),
            QuadSection::Net { s, t, p, resolution } => {
                let sc = s.map(|x| Complex64::new(x, 0.0));
                let tc = t.map(|x| Complex64::new(x, 0.0));
                let w = vec![1.0 / s.nrows() as f64; s.nrows()];
                let pr = RatioProblem { num: tc - &sc * z, num_w: w.clone(), den: sc, den_w: w, p: *p };
                Ok(pr.minimize(&NetOptions { resolution: *resolution, ..NetOptions::default() })?.value)
            }
        }
    }
}

/// Halved estimate of `min ‖Θ_n c‖_p / ‖c‖_p` from a coarse quadrature.
pub fn alpha_estimate(f: &dyn Oracle, dict: &LipschitzDictionary, p: f64, precision: u32) -> Result<f64> {
    let n = dict_len(dict);
    let m = dict.level() + ALPHA_OFFSET;
    let est = if p == 2.0 {
        let g = quadrature_gram(f, dict, m, precision)?;
        let gs = g.view((0, 0), (n, n)).into_owned();
        SymmetricEigen::new(gs).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0).sqrt()
    } else {
        let (s, _) = quadrature_rows(f, dict, m, precision)?;
        let w = vec![1.0 / s.nrows() as f64; s.nrows()];
        let pr = RatioProblem {
            num: s.map(|x| Complex64::new(x, 0.0)),
            num_w: w,
            den: DMatrix::identity(n, n),
            den_w: vec![1.0; n],
            p,
        };
        pr.minimize(&NetOptions { resolution: 6, starts: 1, ..NetOptions::default() })?.value
    };
    Ok(0.5 * est)
}

/// Smallest level `m` with `C_n (α̂(2^{-m}) + 2^{-m}) ≤ 1/(4n)`.
pub fn quadrature_level(f: &dyn Oracle, dict: &LipschitzDictionary, p: f64, radius: f64, precision: u32) -> Result<QuadLevel> {
    let modulus = f.flags().modulus.ok_or(KoopError::ModulusMissing)?;
    let n = dict_len(dict);
    let alpha_hat = alpha_estimate(f, dict, p, precision)?;
    if !(alpha_hat > 0.0) {
        return Err(KoopError::Numeric("dictionary elements are numerically dependent".into()));
    }
    let coeff_bound = (n as f64).powf(1.0 - 1.0 / p) / alpha_hat;
    let lip = dict.max_lip();
    let c_n = p * ((1.0 + radius) * coeff_bound).powf(p - 1.0) * coeff_bound * lip * radius.max(1.0);
    let target = 1.0 / (4.0 * n as f64);
    let m = (dict.level()..=MAX_LEVEL)
        .find(|&m| {
            let d = (-(m as f64)).exp2();
            c_n * (modulus.bound(d) + d) <= target
        })
        .ok_or_else(|| KoopError::Numeric(format!("no quadrature level up to {MAX_LEVEL} meets the 1/(4n) bound")))?;
    Ok(QuadLevel { m, alpha_hat, coeff_bound, c_n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sigma1Run {
    pub level: QuadLevel,
    /// Quadrature level actually used.
    pub m: u32,
    pub stage: Stage,
    pub values: Vec<f64>,
}

/// `Γ_n = {z ∈ grid : ĥ_n(z) < ε − 1/n}` with `n` the dictionary size.
pub fn run_sigma1_modulus(f: &dyn Oracle, dict: &LipschitzDictionary, eps: f64, grid: &GridSpec, opts: &Sigma1Options) -> Result<Sigma1Run> {
    let n = dict_len(dict);
    let level = quadrature_level(f, dict, opts.p, opts.radius, opts.precision)?;
    let m = opts.quad_level.unwrap_or(level.m);
    let pts = make_grid(grid);
    let threshold = eps - 1.0 / n as f64;
    if threshold <= 0.0 {
        let warning = format!("threshold ε − 1/n = {threshold} is not positive at n = {n}; the output set is empty");
        let stage = Stage { set: CompactSet { mesh: grid.mesh.clone(), points: Vec::new() }, warnings: vec![warning] };
        return Ok(Sigma1Run { level, m, stage, values: Vec::new() });
    }
    let sec = QuadSection::build(f, dict, m, opts)?;
    let values = residual_field_with(&pts, |z| sec.residual(z))?;
    let mut warnings = Vec::new();
    let rmax = pts.iter().map(|(_, z)| z.norm()).fold(0.0, f64::max);
    if rmax > opts.radius {
        warnings.push(format!("grid reaches |z| = {rmax}, beyond the quadrature radius {}", opts.radius));
    }
    Ok(Sigma1Run { level, m, stage: Stage { set: threshold_set(&pts, &values, threshold, &grid.mesh), warnings }, values })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::maps::{Angle, BuiltinMap, MapOracle};
    use crate::rational::q;
    use crate::space::{DyadicTree, SpaceDesc};

    fn lip(space: SpaceDesc, level: u32) -> LipschitzDictionary {
        LipschitzDictionary::standard(Arc::new(DyadicTree::build(space, level).unwrap()), level).unwrap()
    }

    #[test]
    fn identity_residual_vanishes_at_one() {
        let f = MapOracle::new(SpaceDesc::UnitInterval, BuiltinMap::Identity).unwrap();
        let d = lip(SpaceDesc::UnitInterval, 2);
        let opts = Sigma1Options::default();
        let sec = QuadSection::build(&f, &d, 10, &opts).unwrap();
        assert!(sec.residual(Complex64::new(1.0, 0.0)).unwrap() < 1e-7);
        assert!((sec.residual(Complex64::new(0.25, 0.0)).unwrap() - 0.75).abs() < 1e-7);
    }

    #[test]
    fn level_needs_a_modulus() {
        let f = MapOracle::new(SpaceDesc::UnitInterval, BuiltinMap::Rotation(Angle::rational(1, 3))).unwrap();
        let d = lip(SpaceDesc::UnitInterval, 2);
        assert_eq!(quadrature_level(&f, &d, 2.0, 2.0, 53).unwrap_err(), KoopError::ModulusMissing);
    }

    #[test]
    fn degenerate_threshold_is_empty_with_warning() {
        let f = MapOracle::new(SpaceDesc::Circle, BuiltinMap::Identity).unwrap();
        let d = lip(SpaceDesc::Circle, 3);
        let grid = GridSpec::new(q(1, 4), q(1, 1)).unwrap();
        let run = run_sigma1_modulus(&f, &d, 0.1, &grid, &Sigma1Options::default()).unwrap();
        assert!(run.stage.set.is_empty());
        assert_eq!(run.stage.warnings.len(), 1);
    }

    #[test]
    fn level_grows_with_radius() {
        let f = MapOracle::new(SpaceDesc::Circle, BuiltinMap::Identity).unwrap();
        let d = lip(SpaceDesc::Circle, 2);
        let a = quadrature_level(&f, &d, 2.0, 1.0, 53).unwrap();
        let b = quadrature_level(&f, &d, 2.0, 4.0, 53).unwrap();
        assert!(a.m <= b.m && a.c_n < b.c_n);
    }
}

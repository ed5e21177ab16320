//! Discrete finite-section residuals, compression matrices and lower norms.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, DualSystem, StepDictionary};
use crate::error::{KoopError, Result};
use crate::linalg::{generalized_min_p2, induced_norm_bound, range_basis, smallest_singular, CMat, StreamingQr};
use crate::maps::{MapFlags, Oracle};
use crate::netsearch::{net_error_bar, NetOptions, RatioProblem};
use crate::space::{DyadicTree, Point, PointKey, SpaceDesc};
use crate::step::StepFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    NetSearch,
    RatioNetSearch,
    MatrixSigmaInf,
    P2Oracle,
}

impl fmt::Display for ResidualMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ResidualMode::NetSearch => "net_search",
            ResidualMode::RatioNetSearch => "ratio_net_search",
            ResidualMode::MatrixSigmaInf => "matrix_sigma_inf",
            ResidualMode::P2Oracle => "p2_oracle",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualQuery {
    pub z: Complex64,
    pub n2: usize,
    pub n1: u32,
    pub p: f64,
    pub mode: ResidualMode,
}

/// A residual value and a bound on its deviation from the section infimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualValue {
    pub h: f64,
    pub err: f64,
}

/// Net resolution used by the net-search modes.
pub const DEFAULT_RESOLUTION: u32 = 12;

/// Oracle wrapper that queries each `(point, precision)` pair once.
pub struct CachedOracle<'a> {
    inner: &'a dyn Oracle,
    cache: Mutex<HashMap<(PointKey, u32), Point>>,
}

impl<'a> CachedOracle<'a> {
    pub fn new(inner: &'a dyn Oracle) -> CachedOracle<'a> {
        CachedOracle { inner, cache: Mutex::new(HashMap::new()) }
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

impl Oracle for CachedOracle<'_> {
    fn space(&self) -> &SpaceDesc {
        self.inner.space()
    }

    fn flags(&self) -> &MapFlags {
        self.inner.flags()
    }

    fn evaluate(&self, x: &Point, precision: u32) -> Result<Point> {
        let key = (x.key(), precision);
        let mut cache = self.cache.lock().expect("cache lock");
        if let Some(y) = cache.get(&key) {
            return Ok(*y);
        }
        let y = self.inner.evaluate(x, precision)?;
        cache.insert(key, y);
        Ok(y)
    }

    fn query_count(&self) -> u64 {
        self.inner.query_count()
    }

    fn name(&self) -> String {
        self.inner.name()
    }
}

/// Images `F(x_P)` of the level-`n1` representatives, one query per atom.
pub fn sample_images(f: &dyn Oracle, tree: &DyadicTree, n1: u32, precision: u32) -> Result<Vec<Point>> {
    tree.reps(n1)?.iter().map(|x| f.evaluate(x, precision)).collect()
}

/// Samples `g(F(x_P))` of `g = Σ c_j φ_j` on the level-`n1` representatives.
pub fn apply_koopman_sampled(
    f: &dyn Oracle,
    dict: &dyn Dictionary,
    c: &[Complex64],
    n1: u32,
    precision: u32,
) -> Result<StepFunction<Complex64>> {
    let tree = dict.tree().clone();
    let n = c.len();
    let images = sample_images(f, &tree, n1, precision)?;
    let vals = dict.sample(n, &images)?;
    let coeffs = vals.chunks(n.max(1)).map(|row| row.iter().zip(c).map(|(v, cj)| cj * v).sum()).collect();
    Ok(StepFunction { level: n1, coeffs })
}

/// `R`-factors of `[W^{1/2} S, W^{1/2} T]` for the `p = 2` oracle.
#[derive(Debug, Clone)]
pub struct P2Section {
    rs: CMat,
    rt: CMat,
    reduced: OnceLock<Result<Reduced>>,
}

/// Data shared by every `z`: a range basis of `rs`, its images and the norms
/// of the two factors.
#[derive(Debug, Clone)]
struct Reduced {
    basis: CMat,
    a: CMat,
    b: CMat,
    /// `aᴴa`, `bᴴa`, `bᴴb`.
    aa: CMat,
    ba: CMat,
    bb: CMat,
    norm_t: f64,
    norm_s: f64,
}

impl P2Section {
    /// Reduces weighted rows `(w, s_row, t_row)` to a `2n × 2n` triangular factor.
    pub fn from_rows<'r>(n: usize, rows: impl Iterator<Item = (f64, &'r [f64], &'r [f64])>) -> P2Section {
        let mut qr = StreamingQr::new(2 * n);
        let mut buf = vec![0.0; 2 * n];
        for (w, s, t) in rows {
            let r = w.sqrt();
            for j in 0..n {
                buf[j] = r * s[j];
                buf[n + j] = r * t[j];
            }
            qr.push_row(&buf);
        }
        Self::from_factor(n, qr.finish())
    }

    pub fn from_factor(n: usize, r: DMatrix<f64>) -> P2Section {
        let rs = r.columns(0, n).map(|x| Complex64::new(x, 0.0));
        let rt = r.columns(n, n).map(|x| Complex64::new(x, 0.0));
        P2Section { rs, rt, reduced: OnceLock::new() }
    }

    /// `min ‖T c − z S c‖ / ‖S c‖` with a minimiser.
    pub fn residual(&self, z: Complex64) -> Result<(f64, Vec<Complex64>)> {
        let r = self.reduced()?;
        // smallest eigenvector of MᴴM for M = a − z b, then ‖M y‖ evaluated directly
        let g = &r.aa - &r.ba * z.conj() - r.ba.adjoint() * z + &r.bb * Complex64::new(z.norm_sqr(), 0.0);
        let eig = SymmetricEigen::new(g);
        let k = eig.eigenvalues.imin();
        let y = eig.eigenvectors.column(k).into_owned();
        let h = (&r.a * &y - &r.b * (&y * z)).norm() / y.norm();
        Ok((h, (&r.basis * y).iter().cloned().collect()))
    }

    fn reduced(&self) -> Result<&Reduced> {
        self.reduced
            .get_or_init(|| {
                let basis = range_basis(&self.rs)?;
                let (a, b) = (&self.rt * &basis, &self.rs * &basis);
                let (aa, ba, bb) = (a.adjoint() * &a, b.adjoint() * &a, b.adjoint() * &b);
                Ok(Reduced { basis, a, b, aa, ba, bb, norm_t: induced_norm_bound(&self.rt, 2.0), norm_s: induced_norm_bound(&self.rs, 2.0) })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn error_bar(&self, z: Complex64) -> f64 {
        let scale = match self.reduced() {
            Ok(r) => r.norm_t + z.norm() * r.norm_s,
            Err(_) => induced_norm_bound(&self.rt, 2.0) + z.norm() * induced_norm_bound(&self.rs, 2.0),
        };
        1e-12 * (1.0 + scale)
    }
}

/// Sampled section `S_{Pj} = φ_j(x_P)`, `T_{Pj} = φ_j(F(x_P))` at level `n1`.
pub struct SampledSection {
    pub n: usize,
    pub n1: u32,
    pub p: f64,
    weights: Vec<f64>,
    s: DMatrix<f64>,
    t: DMatrix<f64>,
    p2: OnceLock<P2Section>,
    alpha: OnceLock<(f64, f64)>,
}

impl SampledSection {
    pub fn build(f: &dyn Oracle, dict: &dyn Dictionary, n: usize, n1: u32, p: f64, precision: u32) -> Result<SampledSection> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(KoopError::InvalidParameter(format!("exponent p = {p} must lie in (1, ∞)")));
        }
        dict.check_count(n)?;
        if n == 0 {
            return Err(KoopError::EmptyInput);
        }
        let tree = dict.tree().clone();
        let reps = tree.reps(n1)?;
        let images = sample_images(f, &tree, n1, precision)?;
        let s = DMatrix::from_row_slice(reps.len(), n, &dict.sample(n, &reps)?);
        let t = DMatrix::from_row_slice(reps.len(), n, &dict.sample(n, &images)?);
        Ok(SampledSection { n, n1, p, weights: tree.masses_f64(n1)?, s, t, p2: OnceLock::new(), alpha: OnceLock::new() })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    fn p2(&self) -> &P2Section {
        self.p2.get_or_init(|| {
            let rows = self.weights.iter().enumerate().map(|(i, &w)| (w, i));
            let srows: Vec<Vec<f64>> = (0..self.s.nrows()).map(|i| self.s.row(i).iter().cloned().collect()).collect();
            let trows: Vec<Vec<f64>> = (0..self.t.nrows()).map(|i| self.t.row(i).iter().cloned().collect()).collect();
            P2Section::from_rows(self.n, rows.map(|(w, i)| (w, srows[i].as_slice(), trows[i].as_slice())))
        })
    }

    fn problem(&self, z: Complex64) -> RatioProblem {
        let s = self.s.map(|x| Complex64::new(x, 0.0));
        let t = self.t.map(|x| Complex64::new(x, 0.0));
        RatioProblem { num: t - &s * z, num_w: self.weights.clone(), den: s, den_w: self.weights.clone(), p: self.p }
    }

    /// Numerical surrogate for `α` with `‖Φ c‖_{p,n1} ≥ α ‖c‖_p`, halved
    /// as a safety factor, and the norm of `c ↦ Φ c`.
    pub fn alpha(&self) -> (f64, f64) {
        *self.alpha.get_or_init(|| {
            let s = self.s.map(|x| Complex64::new(x, 0.0));
            let n = self.n;
            let pr = RatioProblem {
                num: s.clone(),
                num_w: self.weights.clone(),
                den: CMat::identity(n, n),
                den_w: vec![1.0; n],
                p: self.p,
            };
            let norm_d = pr.operator_norms().0;
            let est = if self.p == 2.0 {
                let mut w = s.clone();
                for (i, wi) in self.weights.iter().enumerate() {
                    w.row_mut(i).scale_mut(wi.sqrt());
                }
                smallest_singular(&w).map(|x| x.0).unwrap_or(0.0)
            } else {
                let opts = NetOptions { resolution: 6, starts: 1, ..NetOptions::default() };
                pr.minimize(&opts).map(|r| r.value).unwrap_or(0.0)
            };
            (0.5 * est, norm_d)
        })
    }

    fn seeds(&self, z: Complex64) -> Vec<Vec<Complex64>> {
        match self.p2().residual(z) {
            Ok((_, c)) => vec![c],
            Err(_) => Vec::new(),
        }
    }

    /// Residual at `z` in one of the sampled modes.
    pub fn residual(&self, z: Complex64, mode: ResidualMode, resolution: u32) -> Result<ResidualValue> {
        match mode {
            ResidualMode::P2Oracle => {
                if self.p != 2.0 {
                    return Err(KoopError::InvalidParameter(format!("the p = 2 oracle was asked for p = {}", self.p)));
                }
                let p2 = self.p2();
                let (h, _) = p2.residual(z)?;
                Ok(ResidualValue { h, err: p2.error_bar(z) })
            }
            ResidualMode::RatioNetSearch => {
                let pr = self.problem(z);
                let opts = NetOptions { resolution, seeds: self.seeds(z), ..NetOptions::default() };
                let r = pr.minimize(&opts)?;
                let (nn, nd) = pr.operator_norms();
                let (alpha, _) = self.alpha();
                Ok(ResidualValue { h: r.value, err: net_error_bar(r.value, nn, nd, alpha, self.n, self.p, r.level) })
            }
            ResidualMode::NetSearch => {
                let pr = self.problem(z);
                let opts = NetOptions { resolution, seeds: self.seeds(z), ..NetOptions::default() };
                let r = pr.minimize(&opts)?;
                let (_, dn) = pr.norms(&r.coeffs);
                if !(dn > 0.0) {
                    return Err(KoopError::EmptyNet);
                }
                // rescale to the unit sphere and round to the 2^{-n1} net
                let step = (-(self.n1 as f64)).exp2();
                let c: Vec<Complex64> = r
                    .coeffs
                    .iter()
                    .map(|x| {
                        let y = x / dn;
                        Complex64::new((y.re / step).round() * step, (y.im / step).round() * step)
                    })
                    .collect();
                let (nn, dn) = pr.norms(&c);
                if (dn - 1.0).abs() > step {
                    return Err(KoopError::EmptyNet);
                }
                let (on, od) = pr.operator_norms();
                let (alpha, _) = self.alpha();
                let err = net_error_bar(r.value, on, od, alpha, self.n, self.p, r.level) + (on + r.value * od) * step;
                Ok(ResidualValue { h: nn, err })
            }
            ResidualMode::MatrixSigmaInf => Err(KoopError::DualsMissing),
        }
    }
}

/// `h_{n2,n1}(z, F)` for one query.
pub fn discrete_residual(f: &dyn Oracle, dict: &dyn Dictionary, q: &ResidualQuery, precision: u32) -> Result<ResidualValue> {
    let sec = SampledSection::build(f, dict, q.n2, q.n1, q.p, precision)?;
    sec.residual(q.z, q.mode, DEFAULT_RESOLUTION)
}

/// Matrix residual `σ_inf(Ã − zI)` for one query with duals.
pub fn discrete_residual_matrix(
    f: &dyn Oracle,
    dict: &dyn StepDictionary,
    duals: Option<&DualSystem>,
    q: &ResidualQuery,
    precision: u32,
) -> Result<ResidualValue> {
    let duals = duals.ok_or(KoopError::DualsMissing)?;
    let m = compression_matrix(f, dict, duals, q.n2, q.n1, precision)?;
    sigma_inf_matrix(&m, q.z, q.p, DEFAULT_RESOLUTION)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ExactIntegral,
    Riemann(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionMatrix {
    pub data: CMat,
    pub provenance: Provenance,
}

impl CompressionMatrix {
    pub fn new(data: CMat, provenance: Provenance) -> CompressionMatrix {
        CompressionMatrix { data, provenance }
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> CompressionMatrix {
        let data = CMat::from_row_slice(rows, cols, &entries.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>());
        CompressionMatrix { data, provenance: Provenance::ExactIntegral }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }
}

/// `Ã_ij = Σ_P θ_j(F(x_P)) θ_i^#(x_P) ω(P)` on the level-`n1` atoms.
pub fn compression_matrix(
    f: &dyn Oracle,
    dict: &dyn StepDictionary,
    duals: &DualSystem,
    n2: usize,
    n1: u32,
    precision: u32,
) -> Result<CompressionMatrix> {
    if duals.len() < n2 {
        return Err(KoopError::DualsMissing);
    }
    dict.check_count(n2)?;
    let tree = dict.tree().clone();
    let reps = tree.reps(n1)?;
    let masses = tree.masses_f64(n1)?;
    let images = sample_images(f, &tree, n1, precision)?;
    let t = dict.sample(n2, &images)?;
    let mut a = CMat::zeros(n2, n2);
    for (r, x) in reps.iter().enumerate() {
        let loc = tree.locate(duals.level, x)?;
        for i in 0..n2 {
            let d = duals.duals[i].coeffs[loc];
            if d == 0.0 {
                continue;
            }
            for j in 0..n2 {
                a[(i, j)] += Complex64::new(t[r * n2 + j] * d * masses[r], 0.0);
            }
        }
    }
    Ok(CompressionMatrix { data: a, provenance: Provenance::Riemann(n1) })
}

fn check_square(m: &CompressionMatrix) -> Result<usize> {
    let (r, c) = m.shape();
    if r != c {
        return Err(KoopError::NonSquare { rows: r, cols: c });
    }
    Ok(r)
}

/// Ratio problem `‖(M − zI) c‖_p / ‖c‖_p`.
pub fn matrix_problem(m: &CompressionMatrix, z: Complex64, p: f64) -> Result<RatioProblem> {
    let n = check_square(m)?;
    Ok(RatioProblem {
        num: &m.data - CMat::identity(n, n) * z,
        num_w: vec![1.0; n],
        den: CMat::identity(n, n),
        den_w: vec![1.0; n],
        p,
    })
}

/// Net-search lower norm without any singular-value seeding.
pub fn sigma_inf_net(m: &CompressionMatrix, z: Complex64, p: f64, resolution: u32, seeds: Vec<Vec<Complex64>>) -> Result<ResidualValue> {
    let pr = matrix_problem(m, z, p)?;
    let n = pr.dim();
    let r = pr.minimize(&NetOptions { resolution, seeds, ..NetOptions::default() })?;
    let (nn, _) = pr.operator_norms();
    Ok(ResidualValue { h: r.value, err: net_error_bar(r.value, nn, 1.0, 1.0, n, p, r.level) })
}

/// `σ_inf(M − zI)` in `ℓ^p`: singular values for `p = 2`, net search otherwise.
pub fn sigma_inf_matrix(m: &CompressionMatrix, z: Complex64, p: f64, resolution: u32) -> Result<ResidualValue> {
    let n = check_square(m)?;
    let a = &m.data - CMat::identity(n, n) * z;
    let (s, v) = smallest_singular(&a)?;
    if p == 2.0 {
        return Ok(ResidualValue { h: s, err: 1e-13 * (1.0 + induced_norm_bound(&a, 2.0)) });
    }
    sigma_inf_net(m, z, p, resolution, vec![v.iter().cloned().collect()])
}

/// Upper bound on `‖M − N‖_{ℓ^p → ℓ^p}`.
pub fn perturbation_bound(m: &CompressionMatrix, n: &CompressionMatrix, p: f64) -> Result<f64> {
    if m.shape() != n.shape() {
        return Err(KoopError::ShapeMismatch(m.shape(), n.shape()));
    }
    Ok(induced_norm_bound(&(&m.data - &n.data), p))
}

/// Exact-integral section for a rotation `x ↦ x + θ mod 1` and a step
/// dictionary: the level-`L` cells split at the breakpoints of the shift.
pub fn rotation_exact_problem(theta: f64, dict: &dyn StepDictionary, n2: usize, z: Complex64, p: f64) -> Result<RatioProblem> {
    dict.check_count(n2)?;
    let tree = dict.tree().clone();
    match tree.space() {
        SpaceDesc::UnitInterval | SpaceDesc::Circle => {}
        other => return Err(KoopError::UnsupportedSpace(format!("rotation sections need an interval or circle, got {other}"))),
    }
    let level = dict.step_level(n2).unwrap_or(0);
    let cells = tree.count(level)?;
    let h = 1.0 / cells as f64;
    let elems: Vec<StepFunction<f64>> = (0..n2).map(|j| dict.element(j).refine(&tree, level)).collect::<Result<_>>()?;
    let shift = theta.rem_euclid(1.0) / h;
    let s = shift.floor() as usize % cells;
    let frac = shift - shift.floor();
    let mut rows: Vec<(f64, usize, usize)> = Vec::new();
    // cell i splits into [ih, (i+1-frac)h) -> shifted cell i+s and the rest -> i+s+1
    for i in 0..cells {
        if frac < 1.0 {
            rows.push(((1.0 - frac) * h, i, (i + s) % cells));
        }
        if frac > 0.0 {
            rows.push((frac * h, i, (i + s + 1) % cells));
        }
    }
    let mut num = CMat::zeros(rows.len(), n2);
    let mut den = CMat::zeros(rows.len(), n2);
    for (r, &(_, i, k)) in rows.iter().enumerate() {
        for (j, e) in elems.iter().enumerate() {
            let g = e.coeffs[i];
            num[(r, j)] = Complex64::new(e.coeffs[k], 0.0) - z * g;
            den[(r, j)] = Complex64::new(g, 0.0);
        }
    }
    let w: Vec<f64> = rows.iter().map(|r| r.0).collect();
    Ok(RatioProblem { num, num_w: w.clone(), den, den_w: w, p })
}

/// Exact-integral rotation residual: `p = 2` by singular values, other
/// exponents by ratio net search.
pub fn rotation_residual_exact(theta: f64, dict: &dyn StepDictionary, n2: usize, z: Complex64, p: f64) -> Result<ResidualValue> {
    let pr = rotation_exact_problem(theta, dict, n2, z, p)?;
    let weigh = |m: &CMat, w: &[f64]| {
        let mut s = m.clone();
        for (i, wi) in w.iter().enumerate() {
            s.row_mut(i).scale_mut(wi.sqrt());
        }
        s
    };
    let num = weigh(&pr.num, &pr.num_w);
    let den = weigh(&pr.den, &pr.den_w);
    let (h2, c) = generalized_min_p2(&num, &den)?;
    if p == 2.0 {
        let scale = induced_norm_bound(&num, 2.0) + induced_norm_bound(&den, 2.0);
        return Ok(ResidualValue { h: h2, err: 1e-12 * (1.0 + scale) });
    }
    let r = pr.minimize(&NetOptions { resolution: DEFAULT_RESOLUTION, seeds: vec![c.iter().cloned().collect()], ..NetOptions::default() })?;
    let (nn, nd) = pr.operator_norms();
    let alpha = 0.5 * smallest_singular(&den).map(|x| x.0).unwrap_or(0.0);
    Ok(ResidualValue { h: r.value, err: net_error_bar(r.value, nn, nd, alpha, n2, p, r.level) })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dictionary::{build_duals, HaarDictionary, IndicatorDictionary};
    use crate::maps::{Angle, BuiltinMap, MapOracle};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn atoms2() -> (MapOracle, IndicatorDictionary) {
        let space = SpaceDesc::uniform_atoms(2);
        let tree = Arc::new(DyadicTree::build(space.clone(), 1).unwrap());
        (MapOracle::new(space, BuiltinMap::Cycle(2)).unwrap(), IndicatorDictionary::build(tree, 1).unwrap())
    }

    #[test]
    fn identity_ratio_is_exact() {
        let tree = Arc::new(DyadicTree::build(SpaceDesc::UnitInterval, 3).unwrap());
        let dict = HaarDictionary::build(tree, 3.0, 8).unwrap();
        let f = MapOracle::new(SpaceDesc::UnitInterval, BuiltinMap::Identity).unwrap();
        let sec = SampledSection::build(&f, &dict, 8, 3, 3.0, 0).unwrap();
        for z in [c(0.0), Complex64::new(0.5, 1.5), c(-2.0)] {
            let h = sec.residual(z, ResidualMode::RatioNetSearch, 8).unwrap().h;
            assert!((h - (c(1.0) - z).norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn cycle_two_on_atoms() {
        let (f, dict) = atoms2();
        let q = |z, mode, p| ResidualQuery { z, n2: 2, n1: 1, p, mode };
        let h0 = discrete_residual(&f, &dict, &q(c(0.0), ResidualMode::RatioNetSearch, 3.0), 0).unwrap().h;
        assert!((h0 - 1.0).abs() < 1e-12);
        let h1 = discrete_residual(&f, &dict, &q(c(1.0), ResidualMode::RatioNetSearch, 3.0), 0).unwrap().h;
        assert!(h1.abs() < 1e-12);
        let hi = discrete_residual(&f, &dict, &q(Complex64::i(), ResidualMode::P2Oracle, 2.0), 0).unwrap().h;
        assert!((hi - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sampled_koopman_images() {
        let (f, dict) = atoms2();
        let g = apply_koopman_sampled(&f, &dict, &[c(1.0), c(0.0)], 1, 0).unwrap();
        assert_eq!(g.coeffs, vec![c(0.0), c(1.0)]);
        let tree = Arc::new(DyadicTree::build(SpaceDesc::Circle, 2).unwrap());
        let ind = IndicatorDictionary::build(tree, 2).unwrap();
        let rot = MapOracle::new(SpaceDesc::Circle, BuiltinMap::Rotation(Angle::rational(1, 4))).unwrap();
        let g = apply_koopman_sampled(&rot, &ind, &[c(1.0), c(0.0), c(0.0), c(0.0)], 2, 0).unwrap();
        assert_eq!(g.coeffs, vec![c(0.0), c(0.0), c(0.0), c(1.0)]);
    }

    #[test]
    fn compression_examples() {
        let (f, dict) = atoms2();
        let duals = build_duals(&dict, 2).unwrap();
        let m = compression_matrix(&f, &dict, &duals, 2, 1, 0).unwrap();
        assert_eq!(m.data, CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]));
        let tree = Arc::new(DyadicTree::build(SpaceDesc::Circle, 2).unwrap());
        let haar = HaarDictionary::build(tree, 2.0, 2).unwrap();
        let hd = build_duals(&haar, 2).unwrap();
        let rot = MapOracle::new(SpaceDesc::Circle, BuiltinMap::Rotation(Angle::rational(1, 2))).unwrap();
        let m = compression_matrix(&rot, &haar, &hd, 2, 2, 0).unwrap();
        assert_eq!(m.data, CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]));
        let id = MapOracle::new(SpaceDesc::Circle, BuiltinMap::Identity).unwrap();
        let m = compression_matrix(&id, &haar, &hd, 2, 1, 0).unwrap();
        assert_eq!(m.data, CMat::identity(2, 2));
    }

    #[test]
    fn sigma_inf_examples() {
        let id = CompressionMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        for p in [1.5, 2.0, 3.0] {
            assert!((sigma_inf_matrix(&id, c(0.0), p, 10).unwrap().h - 1.0).abs() < 1e-12);
        }
        let d = CompressionMatrix::from_real(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        assert!((sigma_inf_matrix(&d, c(0.0), 2.0, 10).unwrap().h - 2.0).abs() < 1e-12);
        let s = CompressionMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((sigma_inf_matrix(&s, c(0.5), 2.0, 10).unwrap().h - 0.5).abs() < 1e-12);
        assert!(matches!(
            sigma_inf_matrix(&CompressionMatrix::from_real(1, 2, &[1.0, 2.0]), c(0.0), 2.0, 4),
            Err(KoopError::NonSquare { .. })
        ));
    }

    #[test]
    fn perturbation_examples() {
        let m = CompressionMatrix::from_real(2, 2, &[0.3, 0.1, -0.2, 0.5]);
        assert_eq!(perturbation_bound(&m, &m, 3.0).unwrap(), 0.0);
        let n = CompressionMatrix::from_real(2, 2, &[0.2, 0.1, -0.2, 0.5]);
        assert!((perturbation_bound(&m, &n, 2.0).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn exact_rotation_at_origin_is_one() {
        let tree = Arc::new(DyadicTree::build(SpaceDesc::Circle, 4).unwrap());
        let dict = HaarDictionary::build(tree, 2.0, 16).unwrap();
        let theta = Angle::Golden.value_f64();
        let r = rotation_residual_exact(theta, &dict, 16, c(0.0), 2.0).unwrap();
        assert!((r.h - 1.0).abs() < 1e-12);
    }
}

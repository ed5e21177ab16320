//! Enumerated dictionaries: the adjusted unbalanced Haar system, atom
//! indicators, and their biorthogonal step-function duals.

use std::io::Write;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::error::{KoopError, Result};
use crate::rational::{self, Q};
use crate::space::{AtomId, DyadicTree, Point};
use crate::step::StepFunction;

/// A finite enumerated family of real functions with point evaluation.
pub trait Dictionary: Send + Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn eval(&self, j: usize, x: &Point) -> Result<f64>;

    /// Values of the first `n` elements at each point, row-major by point.
    fn sample(&self, n: usize, pts: &[Point]) -> Result<Vec<f64>> {
        self.check_count(n)?;
        let mut out = Vec::with_capacity(n * pts.len());
        for x in pts {
            for j in 0..n {
                out.push(self.eval(j, x)?);
            }
        }
        Ok(out)
    }

    fn check_count(&self, n: usize) -> Result<()> {
        if n > self.len() {
            Err(KoopError::IndexOutOfRange { index: n, len: self.len() })
        } else {
            Ok(())
        }
    }

    fn tree(&self) -> &Arc<DyadicTree>;

    /// Level on which the first `n` elements are all step functions, if any.
    fn step_level(&self, n: usize) -> Option<u32>;

    fn label(&self) -> String;
}

/// Dictionaries whose elements are `normalizer · shape` with exact
/// rational step shapes.
pub trait StepDictionary: Dictionary {
    fn generating_level(&self, j: usize) -> u32;
    fn shape(&self, j: usize) -> StepFunction<Q>;
    fn normalizer(&self, j: usize) -> f64;

    fn element(&self, j: usize) -> StepFunction<f64> {
        let n = self.normalizer(j);
        self.shape(j).map_coeffs(|c| n * rational::to_f64(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Scaling,
    Wavelet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HaarElement {
    pub kind: ElementKind,
    /// Level of the atoms the element is constant on.
    pub level: u32,
    pub parent: AtomId,
    pub pos: AtomId,
    pub neg: Option<AtomId>,
    pub shape_pos: Q,
    pub shape_neg: Q,
    pub normalizer: f64,
    pub coeff_pos: f64,
    pub coeff_neg: f64,
}

#[derive(Debug, Clone)]
pub struct HaarDictionary {
    tree: Arc<DyadicTree>,
    p: f64,
    elements: Vec<HaarElement>,
}

impl HaarDictionary {
    pub fn build(tree: Arc<DyadicTree>, p: f64, count: usize) -> Result<HaarDictionary> {
        if p <= 1.0 || !p.is_finite() {
            return Err(KoopError::InvalidParameter(format!("exponent p = {p} must lie in (1, ∞)")));
        }
        let available = tree.count(tree.depth())?;
        if count > available {
            return Err(KoopError::CountExceedsTree { requested: count, available });
        }
        let mut elements = Vec::with_capacity(count);
        let root = AtomId { level: 0, index: 0 };
        // ω(X) = 1, so the scaling element is the constant 1
        elements.push(HaarElement {
            kind: ElementKind::Scaling,
            level: 0,
            parent: root,
            pos: root,
            neg: None,
            shape_pos: Q::one(),
            shape_neg: Q::zero(),
            normalizer: 1.0,
            coeff_pos: 1.0,
            coeff_neg: 0.0,
        });
        'levels: for m in 0..tree.depth() {
            for (i, _) in tree.level(m)?.iter().enumerate() {
                if elements.len() >= count {
                    break 'levels;
                }
                let crate::space::Children::Split(a, b) = tree.children(AtomId { level: m, index: i })? else {
                    continue;
                };
                let pa = AtomId { level: m + 1, index: a };
                let na = AtomId { level: m + 1, index: b };
                let mp = tree.atom(pa)?.mass.clone();
                let mn = tree.atom(na)?.mass.clone();
                let (fp, fn_) = (rational::to_f64(&mp), rational::to_f64(&mn));
                let normalizer = (fp.powf(1.0 - p) + fn_.powf(1.0 - p)).powf(-1.0 / p);
                elements.push(HaarElement {
                    kind: ElementKind::Wavelet,
                    level: m + 1,
                    parent: AtomId { level: m, index: i },
                    pos: pa,
                    neg: Some(na),
                    coeff_pos: normalizer / fp,
                    coeff_neg: -normalizer / fn_,
                    shape_pos: Q::one() / mp,
                    shape_neg: -(Q::one() / mn),
                    normalizer,
                });
            }
        }
        elements.truncate(count);
        Ok(HaarDictionary { tree, p, elements })
    }

    /// Dictionary size `N(m) = #𝒫_m` spanning the level-`m` step functions.
    pub fn cutoff(tree: &DyadicTree, m: u32) -> Result<usize> {
        tree.count(m)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn elements(&self) -> &[HaarElement] {
        &self.elements
    }
}

impl Dictionary for HaarDictionary {
    fn len(&self) -> usize {
        self.elements.len()
    }

    fn eval(&self, j: usize, x: &Point) -> Result<f64> {
        let e = self.elements.get(j).ok_or(KoopError::IndexOutOfRange { index: j, len: self.len() })?;
        self.tree.space().check(x)?;
        if e.kind == ElementKind::Scaling {
            return Ok(1.0);
        }
        if self.tree.atom(e.pos)?.contains(x) {
            Ok(e.coeff_pos)
        } else if self.tree.atom(e.neg.expect("wavelet"))?.contains(x) {
            Ok(e.coeff_neg)
        } else {
            Ok(0.0)
        }
    }

    fn sample(&self, n: usize, pts: &[Point]) -> Result<Vec<f64>> {
        self.check_count(n)?;
        let top = self.step_level(n).unwrap_or(0);
        let mut out = Vec::with_capacity(n * pts.len());
        for x in pts {
            let loc = self.tree.locate(top, x)?;
            for e in &self.elements[..n] {
                let v = match e.kind {
                    ElementKind::Scaling => 1.0,
                    ElementKind::Wavelet => {
                        let a = self.tree.ancestor(top, loc, e.level);
                        if a == e.pos.index {
                            e.coeff_pos
                        } else if Some(a) == e.neg.map(|n| n.index) {
                            e.coeff_neg
                        } else {
                            0.0
                        }
                    }
                };
                out.push(v);
            }
        }
        Ok(out)
    }

    fn tree(&self) -> &Arc<DyadicTree> {
        &self.tree
    }

    fn step_level(&self, n: usize) -> Option<u32> {
        Some(self.elements[..n].iter().map(|e| e.level).max().unwrap_or(0))
    }

    fn label(&self) -> String {
        format!("haar(p={}, n={})", self.p, self.len())
    }
}

impl StepDictionary for HaarDictionary {
    fn generating_level(&self, j: usize) -> u32 {
        self.elements[j].level
    }

    fn shape(&self, j: usize) -> StepFunction<Q> {
        let e = &self.elements[j];
        let count = self.tree.count(e.level).expect("built level");
        let mut coeffs = vec![Q::zero(); count];
        match e.kind {
            ElementKind::Scaling => coeffs[0] = Q::one(),
            ElementKind::Wavelet => {
                coeffs[e.pos.index] = e.shape_pos.clone();
                coeffs[e.neg.expect("wavelet").index] = e.shape_neg.clone();
            }
        }
        StepFunction { level: e.level, coeffs }
    }

    fn normalizer(&self, j: usize) -> f64 {
        self.elements[j].normalizer
    }
}

/// Indicators `1_P` of the atoms of one level, in enumeration order.
#[derive(Debug, Clone)]
pub struct IndicatorDictionary {
    tree: Arc<DyadicTree>,
    level: u32,
}

impl IndicatorDictionary {
    pub fn build(tree: Arc<DyadicTree>, level: u32) -> Result<IndicatorDictionary> {
        tree.level(level)?;
        Ok(IndicatorDictionary { tree, level })
    }
}

impl Dictionary for IndicatorDictionary {
    fn len(&self) -> usize {
        self.tree.count(self.level).expect("built level")
    }

    fn eval(&self, j: usize, x: &Point) -> Result<f64> {
        let atoms = self.tree.level(self.level)?;
        let a = atoms.get(j).ok_or(KoopError::IndexOutOfRange { index: j, len: atoms.len() })?;
        self.tree.space().check(x)?;
        Ok(if a.contains(x) { 1.0 } else { 0.0 })
    }

    fn sample(&self, n: usize, pts: &[Point]) -> Result<Vec<f64>> {
        self.check_count(n)?;
        let mut out = vec![0.0; n * pts.len()];
        for (r, x) in pts.iter().enumerate() {
            let k = self.tree.locate(self.level, x)?;
            if k < n {
                out[r * n + k] = 1.0;
            }
        }
        Ok(out)
    }

    fn tree(&self) -> &Arc<DyadicTree> {
        &self.tree
    }

    fn step_level(&self, _n: usize) -> Option<u32> {
        Some(self.level)
    }

    fn label(&self) -> String {
        format!("indicators(level={})", self.level)
    }
}

impl StepDictionary for IndicatorDictionary {
    fn generating_level(&self, _j: usize) -> u32 {
        self.level
    }

    fn shape(&self, j: usize) -> StepFunction<Q> {
        let mut coeffs = vec![Q::zero(); self.len()];
        coeffs[j] = Q::one();
        StepFunction { level: self.level, coeffs }
    }

    fn normalizer(&self, _j: usize) -> f64 {
        1.0
    }
}

/// Step-function duals `φ_i^#` with `∫ φ_i^# φ_j dω = δ_ij`.
#[derive(Debug, Clone)]
pub struct DualSystem {
    pub level: u32,
    /// Duals of the exact shapes, on `level`.
    pub shape_duals: Vec<StepFunction<Q>>,
    /// Duals of the normalised elements, on `level`.
    pub duals: Vec<StepFunction<f64>>,
}

impl DualSystem {
    pub fn len(&self) -> usize {
        self.duals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.duals.is_empty()
    }
}

fn inner_exact(tree: &DyadicTree, a: &StepFunction<Q>, b: &StepFunction<Q>) -> Q {
    let atoms = tree.level(a.level).expect("built level");
    a.coeffs
        .iter()
        .zip(&b.coeffs)
        .zip(atoms)
        .filter(|((x, y), _)| !x.is_zero() && !y.is_zero())
        .fold(Q::zero(), |s, ((x, y), at)| s + x * y * &at.mass)
}

fn solve_exact(mut g: Vec<Vec<Q>>) -> Result<Vec<Vec<Q>>> {
    let n = g.len();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || g[i][j].is_zero()));
    if diagonal {
        let mut inv = vec![vec![Q::zero(); n]; n];
        for i in 0..n {
            if g[i][i].is_zero() {
                return Err(KoopError::SingularGram(i));
            }
            inv[i][i] = Q::one() / &g[i][i];
        }
        return Ok(inv);
    }
    let mut inv: Vec<Vec<Q>> = (0..n).map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect()).collect();
    for c in 0..n {
        let r = (c..n).find(|&r| !g[r][c].is_zero()).ok_or(KoopError::SingularGram(c))?;
        g.swap(c, r);
        inv.swap(c, r);
        let piv = g[c][c].clone();
        for j in 0..n {
            g[c][j] = &g[c][j] / &piv;
            inv[c][j] = &inv[c][j] / &piv;
        }
        for r in 0..n {
            if r != c && !g[r][c].is_zero() {
                let f = g[r][c].clone();
                for j in 0..n {
                    let (gc, ic) = (g[c][j].clone(), inv[c][j].clone());
                    g[r][j] -= &f * gc;
                    inv[r][j] -= &f * ic;
                }
            }
        }
    }
    Ok(inv)
}

/// Solves the Gram system of the first `n` shapes on their common level.
pub fn build_duals(dict: &dyn StepDictionary, n: usize) -> Result<DualSystem> {
    dict.check_count(n)?;
    let tree = dict.tree().clone();
    let level = (0..n).map(|j| dict.generating_level(j)).max().unwrap_or(0);
    let shapes: Vec<StepFunction<Q>> = (0..n).map(|j| dict.shape(j).refine(&tree, level)).collect::<Result<_>>()?;
    let gram: Vec<Vec<Q>> = (0..n).map(|i| (0..n).map(|j| inner_exact(&tree, &shapes[i], &shapes[j])).collect()).collect();
    let inv = solve_exact(gram)?;
    let count = tree.count(level)?;
    let mut shape_duals = Vec::with_capacity(n);
    let mut duals = Vec::with_capacity(n);
    for i in 0..n {
        let mut coeffs = vec![Q::zero(); count];
        for (k, s) in shapes.iter().enumerate() {
            if inv[i][k].is_zero() {
                continue;
            }
            for (c, v) in coeffs.iter_mut().zip(&s.coeffs) {
                if !v.is_zero() {
                    *c += &inv[i][k] * v;
                }
            }
        }
        let sd = StepFunction { level, coeffs };
        let scale = 1.0 / dict.normalizer(i);
        duals.push(sd.map_coeffs(|c| scale * rational::to_f64(c)));
        shape_duals.push(sd);
    }
    Ok(DualSystem { level, shape_duals, duals })
}

/// Exact matrix `∫ s_i^# s_j dω` of shape duals against shapes.
pub fn shape_gram(dict: &dyn StepDictionary, duals: &DualSystem) -> Result<Vec<Vec<Q>>> {
    let tree = dict.tree().clone();
    let n = duals.len();
    let shapes: Vec<StepFunction<Q>> = (0..n).map(|j| dict.shape(j).refine(&tree, duals.level)).collect::<Result<_>>()?;
    Ok((0..n).map(|i| (0..n).map(|j| inner_exact(&tree, &duals.shape_duals[i], &shapes[j])).collect()).collect())
}

/// Writes `index,level,atom_path,coefficient` rows for every nonzero
/// coefficient of the first `n` elements.
pub fn dump_csv<W: Write>(dict: &dyn StepDictionary, n: usize, out: W) -> Result<()> {
    dict.check_count(n)?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| KoopError::Io(e.to_string());
    w.write_record(["index", "level", "atom_path", "coefficient"]).map_err(io)?;
    let tree = dict.tree();
    for j in 0..n {
        let e = dict.element(j);
        let atoms = tree.level(e.level)?;
        for (c, a) in e.coeffs.iter().zip(atoms) {
            if *c != 0.0 {
                w.write_record([j.to_string(), e.level.to_string(), a.path.to_string(), format!("{c:?}")]).map_err(io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

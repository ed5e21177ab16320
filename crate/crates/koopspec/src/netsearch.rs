//! Ratio minimisation over Gaussian-dyadic coefficient nets.
//!
//! Minimises `‖N c‖_{p,w} / ‖D c‖_{p,w}` over nonzero `c` whose real and
//! imaginary parts are multiples of `2^{-k}`, by compass search on a
//! sequence of refining lattices started from a set of seeds.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{KoopError, Result};
use crate::linalg::{induced_norm_bound, CMat};

/// Weighted ratio problem. Row `i` of `num` contributes `num_w[i]·|(Nc)_i|^p`.
#[derive(Debug, Clone)]
pub struct RatioProblem {
    pub num: CMat,
    pub num_w: Vec<f64>,
    pub den: CMat,
    pub den_w: Vec<f64>,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct NetOptions {
    /// Finest lattice exponent `k` (spacing `2^{-k}`).
    pub resolution: u32,
    /// Coarse exhaustive net `{-r..r}^{2n}` is tried when it has at most
    /// `exhaustive_limit` points.
    pub exhaustive_radius: i64,
    pub exhaustive_limit: usize,
    /// Number of best seeds refined by compass search.
    pub starts: usize,
    pub seeds: Vec<Vec<Complex64>>,
}

impl Default for NetOptions {
    fn default() -> Self {
        NetOptions { resolution: 10, exhaustive_radius: 1, exhaustive_limit: 20_000, starts: 3, seeds: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetResult {
    pub value: f64,
    /// Integer lattice coordinates, `(re, im)` interleaved, at scale `2^{-level}`.
    pub lattice: Vec<i64>,
    pub level: u32,
    pub coeffs: Vec<Complex64>,
    pub evaluations: u64,
}

const START_LEVEL: u32 = 2;
const MAX_MOVES: usize = 100_000;
const REL_GAIN: f64 = 1e-12;

fn supports(m: &CMat) -> Vec<Vec<usize>> {
    (0..m.ncols()).map(|j| (0..m.nrows()).filter(|&i| m[(i, j)] != Complex64::new(0.0, 0.0)).collect()).collect()
}

struct Side<'a> {
    mat: &'a CMat,
    w: &'a [f64],
    supp: Vec<Vec<usize>>,
    vals: Vec<Complex64>,
    pw: Vec<f64>,
    sum: f64,
}

impl<'a> Side<'a> {
    fn new(mat: &'a CMat, w: &'a [f64]) -> Side<'a> {
        Side { mat, w, supp: supports(mat), vals: vec![Complex64::new(0.0, 0.0); mat.nrows()], pw: vec![0.0; mat.nrows()], sum: 0.0 }
    }

    fn reset(&mut self, c: &[Complex64], p: f64) {
        for i in 0..self.mat.nrows() {
            let mut v = Complex64::new(0.0, 0.0);
            for (j, cj) in c.iter().enumerate() {
                v += self.mat[(i, j)] * cj;
            }
            self.vals[i] = v;
            self.pw[i] = self.w[i] * v.norm().powf(p);
        }
        self.sum = self.pw.iter().sum();
    }

    fn trial(&self, col: usize, delta: Complex64, p: f64) -> f64 {
        let mut s = self.sum;
        for &i in &self.supp[col] {
            s += self.w[i] * (self.vals[i] + delta * self.mat[(i, col)]).norm().powf(p) - self.pw[i];
        }
        s
    }
}

fn lattice_to_coeffs(a: &[i64], k: u32) -> Vec<Complex64> {
    let h = (-(k as f64)).exp2();
    a.chunks(2).map(|ch| Complex64::new(ch[0] as f64 * h, ch[1] as f64 * h)).collect()
}

fn round_to_lattice(c: &[Complex64], k: u32) -> Option<Vec<i64>> {
    let m = c.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
    if !(m > 0.0) || !m.is_finite() {
        return None;
    }
    let s = k as f64;
    let a: Vec<i64> = c.iter().flat_map(|z| [(z.re / m * s.exp2()).round() as i64, (z.im / m * s.exp2()).round() as i64]).collect();
    if a.iter().all(|&x| x == 0) {
        None
    } else {
        Some(a)
    }
}

impl RatioProblem {
    pub fn dim(&self) -> usize {
        self.num.ncols()
    }

    fn validate(&self) -> Result<()> {
        if self.den.ncols() != self.num.ncols() || self.num_w.len() != self.num.nrows() || self.den_w.len() != self.den.nrows() {
            return Err(KoopError::ShapeMismatch(self.num.shape(), self.den.shape()));
        }
        if self.dim() == 0 {
            return Err(KoopError::EmptyInput);
        }
        Ok(())
    }

    fn pnorm(&self, mat: &CMat, w: &[f64], c: &[Complex64]) -> f64 {
        let v = mat * DVector::from_column_slice(c);
        v.iter().zip(w).map(|(x, wi)| wi * x.norm().powf(self.p)).sum::<f64>().powf(1.0 / self.p)
    }

    /// `(‖N c‖, ‖D c‖)` evaluated from scratch.
    pub fn norms(&self, c: &[Complex64]) -> (f64, f64) {
        (self.pnorm(&self.num, &self.num_w, c), self.pnorm(&self.den, &self.den_w, c))
    }

    pub fn ratio(&self, c: &[Complex64]) -> f64 {
        let (a, b) = self.norms(c);
        if b > 0.0 {
            a / b
        } else {
            f64::INFINITY
        }
    }

    /// Weighted induced norms of `N` and `D` as maps from `ℓ^p`.
    pub fn operator_norms(&self) -> (f64, f64) {
        let scale = |m: &CMat, w: &[f64]| {
            let mut s = m.clone();
            for (i, wi) in w.iter().enumerate() {
                let f = wi.powf(1.0 / self.p);
                s.row_mut(i).scale_mut(f);
            }
            induced_norm_bound(&s, self.p)
        };
        (scale(&self.num, &self.num_w), scale(&self.den, &self.den_w))
    }

    fn seed_lattices(&self, opts: &NetOptions) -> Vec<Vec<i64>> {
        let n = self.dim();
        let mut out: Vec<Vec<i64>> = Vec::new();
        let r = opts.exhaustive_radius.max(1);
        let side = (2 * r + 1) as f64;
        let total = side.powi(2 * n as i32);
        if total <= opts.exhaustive_limit as f64 {
            let scale = START_LEVEL as i64;
            let mut a = vec![-r; 2 * n];
            loop {
                if a.iter().any(|&x| x != 0) {
                    // spread the coarse net over the unit box of the start lattice
                    out.push(a.iter().map(|&x| x * (1 << scale) / r).collect());
                }
                let mut i = 0;
                while i < a.len() {
                    if a[i] < r {
                        a[i] += 1;
                        break;
                    }
                    a[i] = -r;
                    i += 1;
                }
                if i == a.len() {
                    break;
                }
            }
        }
        for j in 0..n {
            let mut a = vec![0; 2 * n];
            a[2 * j] = 1 << START_LEVEL;
            out.push(a);
        }
        for s in &opts.seeds {
            if s.len() == n {
                if let Some(a) = round_to_lattice(s, START_LEVEL) {
                    out.push(a);
                }
            }
        }
        out
    }

    /// Compass search from `a` at lattice level `k0` up to `opts.resolution`.
    fn refine(&self, mut a: Vec<i64>, k0: u32, resolution: u32, evals: &mut u64) -> (f64, Vec<i64>, u32) {
        let p = self.p;
        let mut num = Side::new(&self.num, &self.num_w);
        let mut den = Side::new(&self.den, &self.den_w);
        let mut k = k0;
        loop {
            let c = lattice_to_coeffs(&a, k);
            num.reset(&c, p);
            den.reset(&c, p);
            let h = (-(k as f64)).exp2();
            for _ in 0..MAX_MOVES {
                let cur = if den.sum > 0.0 { num.sum / den.sum } else { f64::INFINITY };
                // moves must beat rounding noise in the incremental sums
                let target = cur * (1.0 - REL_GAIN);
                let mut best: Option<(f64, usize, i64)> = None;
                for d in 0..a.len() {
                    let col = d / 2;
                    let unit = if d % 2 == 0 { Complex64::new(h, 0.0) } else { Complex64::new(0.0, h) };
                    for sign in [-1i64, 1] {
                        let delta = unit * sign as f64;
                        let ds = den.trial(col, delta, p);
                        *evals += 1;
                        if !(ds > 0.0) {
                            continue;
                        }
                        let q = num.trial(col, delta, p) / ds;
                        let better = match best {
                            None => q < target,
                            Some((bq, bd, bs)) => q < bq || (q == bq && lex_less(&a, d, sign, bd, bs)),
                        };
                        if better && q < target {
                            best = Some((q, d, sign));
                        }
                    }
                }
                let Some((_, d, sign)) = best else { break };
                a[d] += sign;
                let c = lattice_to_coeffs(&a, k);
                num.reset(&c, p);
                den.reset(&c, p);
            }
            if k >= resolution {
                break;
            }
            for x in a.iter_mut() {
                *x *= 2;
            }
            k += 1;
            let m = a.iter().map(|x| x.abs()).max().unwrap_or(0);
            // keep the largest coordinate in [1/2, 1)
            while m > 0 && a.iter().map(|x| x.abs()).max().unwrap() < (1i64 << (k - 1)) {
                for x in a.iter_mut() {
                    *x *= 2;
                }
            }
        }
        let c = lattice_to_coeffs(&a, k);
        (self.ratio(&c), a, k)
    }

    /// Net minimum at lattice spacing `2^{-opts.resolution}`.
    pub fn minimize(&self, opts: &NetOptions) -> Result<NetResult> {
        self.validate()?;
        let mut evals = 0u64;
        let mut seeds: Vec<(f64, Vec<i64>)> = self
            .seed_lattices(opts)
            .into_iter()
            .map(|a| {
                evals += 1;
                (self.ratio(&lattice_to_coeffs(&a, START_LEVEL)), a)
            })
            .filter(|(v, _)| v.is_finite())
            .collect();
        if seeds.is_empty() {
            return Err(KoopError::EmptyNet);
        }
        seeds.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(&y.1)));
        seeds.dedup_by(|x, y| x.1 == y.1);
        let resolution = opts.resolution.max(START_LEVEL);
        let mut best: Option<(f64, Vec<i64>, u32)> = None;
        for (_, a) in seeds.into_iter().take(opts.starts.max(1)) {
            let (v, a, k) = self.refine(a, START_LEVEL, resolution, &mut evals);
            let replace = match &best {
                None => true,
                Some((bv, ba, _)) => v < *bv || (v == *bv && a < *ba),
            };
            if replace {
                best = Some((v, a, k));
            }
        }
        let (value, lattice, level) = best.expect("at least one start");
        let coeffs = lattice_to_coeffs(&lattice, level);
        Ok(NetResult { value, lattice, level, coeffs, evaluations: evals })
    }
}

fn lex_less(a: &[i64], d1: usize, s1: i64, d2: usize, s2: i64) -> bool {
    // compare a + s1 e_{d1} with a + s2 e_{d2}
    let first = d1.min(d2);
    let v1 = a[first] + if d1 == first { s1 } else { 0 };
    let v2 = a[first] + if d2 == first { s2 } else { 0 };
    if v1 != v2 {
        return v1 < v2;
    }
    if d1 == d2 {
        return false;
    }
    let second = d1.max(d2);
    let w1 = a[second] + if d1 == second { s1 } else { 0 };
    let w2 = a[second] + if d2 == second { s2 } else { 0 };
    w1 < w2
}

/// Worst-case coordinate error `η = n^{1/p} √2 2^{-k-1}` of rounding a
/// vector with `max |c_j| ≤ 1` to the level-`k` lattice.
pub fn rounding_radius(n: usize, p: f64, k: u32) -> f64 {
    (n as f64).powf(1.0 / p) * std::f64::consts::SQRT_2 * (-(k as f64) - 1.0).exp2()
}

/// Bound on `net minimum − true minimum` for a ratio problem whose
/// denominator satisfies `‖D c‖ ≥ α ‖c‖_p`.
pub fn net_error_bar(sigma: f64, norm_num: f64, norm_den: f64, alpha: f64, n: usize, p: f64, k: u32) -> f64 {
    let eta = rounding_radius(n, p, k);
    let denom = 0.5 * alpha - norm_den * eta;
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        (norm_num + sigma * norm_den) * eta / denom
    }
}

//! Lipschitz partition of unity subordinate to a dyadic level.
//!
//! For each atom `P` the thickened set is `U_P = {x : d(x,P) < ρ diam P}`,
//! `δ_P(x) = dist(x, X \ U_P)` and `ϑ_P = δ_P^{p⋆} / Σ_Q δ_Q^{p⋆}`.

use std::sync::Arc;

use crate::dictionary::Dictionary;
use crate::error::{KoopError, Result};
use crate::rational;
use crate::space::{DyadicTree, Point, SpaceDesc};

/// Envelope for the constant `C_{p⋆}` in the Lipschitz bound.
pub const LIP_CONSTANT: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct LipschitzDictionary {
    tree: Arc<DyadicTree>,
    level: u32,
    rho: f64,
    pstar: f64,
    circle: bool,
    bounds: Vec<(f64, f64)>,
    thick: Vec<f64>,
    multiplicity: usize,
    lebesgue: f64,
    lip_bounds: Vec<f64>,
}

impl LipschitzDictionary {
    pub fn build(tree: Arc<DyadicTree>, level: u32, rho: f64, pstar: f64) -> Result<LipschitzDictionary> {
        let circle = match tree.space() {
            SpaceDesc::UnitInterval => false,
            SpaceDesc::Circle => true,
            other => return Err(KoopError::UnsupportedSpace(format!("Lipschitz weights need an interval or circle, got {other}"))),
        };
        if !(rho > 0.0 && rho <= 1.0) || pstar < 1.0 {
            return Err(KoopError::InvalidParameter(format!("need 0 < ρ ≤ 1 and p⋆ ≥ 1, got ρ={rho}, p⋆={pstar}")));
        }
        let atoms = tree.level(level)?;
        let bounds: Vec<(f64, f64)> = atoms.iter().map(|a| a.region.bounds().expect("interval atom")).collect();
        let diams: Vec<f64> = atoms.iter().map(|a| rational::to_f64(&a.diam)).collect();
        let thick: Vec<f64> = diams.iter().map(|d| rho * d).collect();
        let min_diam = diams.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut d = LipschitzDictionary {
            tree: tree.clone(),
            level,
            rho,
            pstar,
            circle,
            bounds,
            thick,
            multiplicity: 1,
            lebesgue: (rho / 2.0) * min_diam,
            lip_bounds: vec![0.0; atoms.len()],
        };
        if level == 0 {
            d.lebesgue = f64::INFINITY;
            return Ok(d);
        }
        d.multiplicity = d.compute_multiplicity();
        let lip = LIP_CONSTANT * 1f64.max(((d.multiplicity - 1) as f64).powf(1.0 / pstar)) / d.lebesgue;
        d.lip_bounds = vec![lip; atoms.len()];
        Ok(d)
    }

    /// Defaults `ρ = 1/2`, `p⋆ = 1`.
    pub fn standard(tree: Arc<DyadicTree>, level: u32) -> Result<LipschitzDictionary> {
        Self::build(tree, level, 0.5, 1.0)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    /// Recorded lower bound on the Lebesgue number of the cover.
    pub fn lebesgue_bound(&self) -> f64 {
        self.lebesgue
    }

    pub fn lip_bounds(&self) -> &[f64] {
        &self.lip_bounds
    }

    pub fn max_lip(&self) -> f64 {
        self.lip_bounds.iter().cloned().fold(0.0, f64::max)
    }

    fn in_thickening(&self, j: usize, x: f64) -> bool {
        self.delta(j, x) > 0.0
    }

    fn compute_multiplicity(&self) -> usize {
        let mut cuts: Vec<f64> = Vec::new();
        for (j, &(a, b)) in self.bounds.iter().enumerate() {
            let t = self.thick[j];
            for c in [a - t, b + t, a, b] {
                cuts.push(if self.circle { c.rem_euclid(1.0) } else { c.clamp(0.0, 1.0) });
            }
        }
        cuts.push(0.0);
        cuts.push(1.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut best = 1;
        for w in cuts.windows(2) {
            let x = 0.5 * (w[0] + w[1]);
            best = best.max((0..self.bounds.len()).filter(|&j| self.in_thickening(j, x)).count());
        }
        best
    }

    /// `δ_P(x) = dist(x, X \ U_P)`.
    fn delta(&self, j: usize, x: f64) -> f64 {
        let (a, b) = self.bounds[j];
        let t = self.thick[j];
        if self.circle {
            let span = b - a + 2.0 * t;
            if span > 1.0 {
                return 0.5;
            }
            // U_P is the open arc of length `span` starting at a - t
            let off = (x - (a - t)).rem_euclid(1.0);
            if off == 0.0 || off >= span {
                return 0.0;
            }
            off.min(span - off)
        } else {
            let lo = a - t;
            let hi = b + t;
            if x <= lo || x >= hi {
                return 0.0;
            }
            let mut d = f64::INFINITY;
            if lo >= 0.0 {
                d = d.min(x - lo);
            }
            if hi <= 1.0 {
                d = d.min(hi - x);
            }
            if d.is_infinite() {
                1.0
            } else {
                d
            }
        }
    }

    /// Nonzero weights at `x` as `(atom index, ϑ)`.
    pub fn weights_at(&self, x: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let n = self.bounds.len();
        if self.level == 0 {
            out.push((0, 1.0));
            return;
        }
        let scale = (1u64 << self.level) as f64;
        let k = ((x * scale).floor() as i64).clamp(0, n as i64 - 1);
        let mut total = 0.0;
        for off in -2i64..=2 {
            let mut j = k + off;
            if self.circle {
                j = j.rem_euclid(n as i64);
            } else if j < 0 || j >= n as i64 {
                continue;
            }
            let j = j as usize;
            if out.iter().any(|(i, _)| *i == j) {
                continue;
            }
            let d = self.delta(j, x);
            if d > 0.0 {
                let w = d.powf(self.pstar);
                total += w;
                out.push((j, w));
            }
        }
        for e in out.iter_mut() {
            e.1 /= total;
        }
    }

    fn value(&self, j: usize, x: f64) -> f64 {
        let mut buf = Vec::with_capacity(5);
        self.weights_at(x, &mut buf);
        buf.iter().find(|(i, _)| *i == j).map(|e| e.1).unwrap_or(0.0)
    }

    /// Largest difference quotient of any weight over consecutive points
    /// of a uniform grid with `samples` points.
    pub fn empirical_lipschitz(&self, samples: usize) -> f64 {
        let n = self.bounds.len();
        let pts: Vec<f64> = (0..samples).map(|i| i as f64 / samples as f64).collect();
        let vals: Vec<Vec<f64>> = pts
            .iter()
            .map(|&x| {
                let mut row = vec![0.0; n];
                let mut buf = Vec::new();
                self.weights_at(x, &mut buf);
                for (j, w) in buf {
                    row[j] = w;
                }
                row
            })
            .collect();
        let mut best: f64 = 0.0;
        for i in 1..samples {
            let d = pts[i] - pts[i - 1];
            for j in 0..n {
                best = best.max((vals[i][j] - vals[i - 1][j]).abs() / d);
            }
        }
        best
    }
}

impl Dictionary for LipschitzDictionary {
    fn len(&self) -> usize {
        self.bounds.len()
    }

    fn eval(&self, j: usize, x: &Point) -> Result<f64> {
        if j >= self.len() {
            return Err(KoopError::IndexOutOfRange { index: j, len: self.len() });
        }
        self.tree.space().check(x)?;
        Ok(self.value(j, x.as_real().expect("checked")))
    }

    fn sample(&self, n: usize, pts: &[Point]) -> Result<Vec<f64>> {
        self.check_count(n)?;
        let mut out = vec![0.0; n * pts.len()];
        let mut buf = Vec::with_capacity(5);
        for (r, x) in pts.iter().enumerate() {
            self.tree.space().check(x)?;
            self.weights_at(x.as_real().expect("checked"), &mut buf);
            for &(j, w) in &buf {
                if j < n {
                    out[r * n + j] = w;
                }
            }
        }
        Ok(out)
    }

    fn tree(&self) -> &Arc<DyadicTree> {
        &self.tree
    }

    fn step_level(&self, _n: usize) -> Option<u32> {
        None
    }

    fn label(&self) -> String {
        format!("lipschitz(level={}, rho={}, pstar={})", self.level, self.rho, self.pstar)
    }
}

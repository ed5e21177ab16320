//! Closed-form spectra of rotations and cycles, Hausdorff distances, the
//! circle-to-roots gap and the Diophantine separation bound.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive};
use rstar::RTree;
use serde::{Deserialize, Serialize};

use crate::error::{KoopError, Result};
use crate::maps::{is_prime, Angle, BuiltinMap};

/// An ideal compact subset of the plane given through a sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpectrum {
    FiniteSet { points: Vec<[f64; 2]> },
    UnitCircle,
    Disk { center: [f64; 2], radius: f64 },
    /// `{z : ||z| − 1| ≤ width}`.
    Annulus { width: f64 },
    Union { parts: Vec<ReferenceSpectrum> },
}

fn c2(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn polar_ring(out: &mut Vec<Complex64>, center: Complex64, radius: f64, step: f64) {
    if radius <= 0.0 {
        out.push(center);
        return;
    }
    let k = ((2.0 * PI * radius / step).ceil() as usize).max(4);
    for j in 0..k {
        out.push(center + Complex64::from_polar(radius, 2.0 * PI * j as f64 / k as f64));
    }
}

impl ReferenceSpectrum {
    /// Finite sample within Hausdorff distance `r` of the ideal set.
    pub fn sample(&self, r: f64) -> Vec<Complex64> {
        let mut out = Vec::new();
        self.sample_into(r, &mut out);
        out
    }

    fn sample_into(&self, r: f64, out: &mut Vec<Complex64>) {
        match self {
            ReferenceSpectrum::FiniteSet { points } => out.extend(points.iter().map(|p| Complex64::new(p[0], p[1]))),
            ReferenceSpectrum::UnitCircle => polar_ring(out, Complex64::new(0.0, 0.0), 1.0, r),
            ReferenceSpectrum::Disk { center, radius } => {
                let c = Complex64::new(center[0], center[1]);
                let mut rho = *radius;
                // concentric rings spaced by r, each with chord spacing below r
                loop {
                    polar_ring(out, c, rho, r);
                    if rho <= 0.0 {
                        break;
                    }
                    rho = (rho - r).max(0.0);
                }
            }
            ReferenceSpectrum::Annulus { width } => {
                let (lo, hi) = ((1.0 - width).max(0.0), 1.0 + width);
                let mut rho = hi;
                loop {
                    polar_ring(out, Complex64::new(0.0, 0.0), rho, r);
                    if rho <= lo {
                        break;
                    }
                    rho = (rho - r).max(lo);
                }
            }
            ReferenceSpectrum::Union { parts } => {
                for p in parts {
                    p.sample_into(r, out);
                }
            }
        }
    }
}

/// `E_q = {e^{2πik/q}}`.
pub fn roots_of_unity(q: u64) -> Vec<Complex64> {
    (0..q).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / q as f64)).collect()
}

/// Rotation spectrum: `E_q + B_ε` for `θ = p/q` in lowest terms, the
/// annulus `𝕋 + B_ε` otherwise.
pub fn rotation_reference(theta: &Angle, eps: f64) -> ReferenceSpectrum {
    match theta {
        Angle::Rational(t) => {
            let t = t - t.floor();
            let q = t.denom().abs().to_u64().unwrap_or(1);
            let pts = roots_of_unity(q);
            if eps == 0.0 {
                ReferenceSpectrum::FiniteSet { points: pts.into_iter().map(c2).collect() }
            } else {
                ReferenceSpectrum::Union { parts: pts.into_iter().map(|z| ReferenceSpectrum::Disk { center: c2(z), radius: eps }).collect() }
            }
        }
        _ if eps == 0.0 => ReferenceSpectrum::UnitCircle,
        _ => ReferenceSpectrum::Annulus { width: eps },
    }
}

/// Spectrum `E_q + B_ε` of a `q`-cycle.
pub fn cycle_reference(q: u64, eps: f64) -> ReferenceSpectrum {
    rotation_reference(&Angle::rational(1, q as i64), eps)
}

/// Cycle lengths of a permutation, sorted and without repeats.
pub fn cycle_lengths(perm: &[usize]) -> Vec<u64> {
    let mut seen = vec![false; perm.len()];
    let mut out = Vec::new();
    for s in 0..perm.len() {
        let mut len = 0;
        let mut j = s;
        while j < perm.len() && !seen[j] {
            seen[j] = true;
            j = perm[j];
            len += 1;
        }
        if len > 0 {
            out.push(len);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Closed-form `σ(𝒦_F) + B_ε` of a builtin map, when one is known.
pub fn map_reference(map: &BuiltinMap, eps: f64) -> Option<ReferenceSpectrum> {
    match map {
        BuiltinMap::Identity => Some(cycle_reference(1, eps)),
        BuiltinMap::Rotation(a) => Some(rotation_reference(a, eps)),
        BuiltinMap::Cycle(q) => Some(cycle_reference(*q as u64, eps)),
        BuiltinMap::AtomPermutation(perm) => {
            Some(ReferenceSpectrum::Union { parts: cycle_lengths(perm).into_iter().map(|q| cycle_reference(q, eps)).collect() })
        }
        BuiltinMap::BlockUnion(maps) => Some(ReferenceSpectrum::Union { parts: maps.iter().map(|m| map_reference(m, eps)).collect::<Option<_>>()? }),
        BuiltinMap::Halving => None,
    }
}

/// `σ_inf(U_θ − z) = ||z| − 1|` for irrational `θ`.
pub fn sigma_inf_rotation_exact(z: Complex64) -> f64 {
    (z.norm() - 1.0).abs()
}

/// `sup_{a∈A} inf_{b∈B} |a − b|`.
pub fn directed_hausdorff(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(KoopError::EmptyInput);
    }
    let tree: RTree<[f64; 2]> = RTree::bulk_load(b.iter().map(|z| [z.re, z.im]).collect());
    Ok(a.iter()
        .map(|z| {
            let w = tree.nearest_neighbor([z.re, z.im]).expect("nonempty tree");
            (z - Complex64::new(w[0], w[1])).norm()
        })
        .fold(0.0, f64::max))
}

/// Exact Hausdorff distance between finite point sets.
pub fn hausdorff(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

/// `d_H(𝕋, E_q + B_ε) = max{ε, (2 sin(π/2q) − ε)_+}`.
pub fn gap_formula(q: u64, eps: f64) -> f64 {
    let rq = 2.0 * (PI / (2.0 * q as f64)).sin();
    eps.max((rq - eps).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiophantineMargin {
    pub bound: f64,
    pub true_min: f64,
}

/// `|e^{2πia/N} − 1|` for the reduced numerator `a`.
fn chord(a: u64, n: u64) -> f64 {
    let k = a.min(n - a);
    2.0 * (PI * k as f64 / n as f64).sin()
}

/// Bound `4/(pD)` and the exhaustive minimum of `|e^{2πim/p} − e^{2πir/q}|`
/// over `1 ≤ m < p`, `1 ≤ q ≤ D`, `0 ≤ r < q`.
pub fn diophantine_margin(p: u64, d: u64) -> Result<DiophantineMargin> {
    if !is_prime(p) {
        return Err(KoopError::NotPrime(p));
    }
    if d == 0 || d >= p {
        return Err(KoopError::InvalidParameter(format!("need 1 ≤ D < p, got D = {d}, p = {p}")));
    }
    let mut best = f64::INFINITY;
    for q in 1..=d {
        best = best.min(min_for_q(p, q));
    }
    Ok(DiophantineMargin { bound: 4.0 / (p * d) as f64, true_min: best })
}

/// Minimum over `m, r` for a single denominator `q`.
pub fn min_for_q(p: u64, q: u64) -> f64 {
    let n = p * q;
    let mut best = f64::INFINITY;
    for m in 1..p {
        for r in 0..q {
            // e^{2πi(mq − rp)/(pq)}
            let a = ((m * q) as i64 - (r * p) as i64).rem_euclid(n as i64) as u64;
            best = best.min(chord(a, n));
        }
    }
    best
}

//! Lower-bound constructions run as experiments: transcripts, locked
//! adversaries, prime-tail angles, prime-arc probes and the dichotomy.

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::{arithmetic_tower, ArithTower};
use crate::dictionary::HaarDictionary;
use crate::error::{KoopError, Result};
use crate::lipschitz::LipschitzDictionary;
use crate::maps::{is_prime, Angle, BuiltinMap, MapFlags, MapOracle, Oracle};
use crate::markov::{markov_tower_with, MarkovSpec};
use crate::rational::{self, q, Q};
use crate::reference::directed_hausdorff;
use crate::residual::{discrete_residual, ResidualMode, ResidualQuery};
use crate::sigma1::{run_sigma1_modulus, Sigma1Options};
use crate::space::{DyadicTree, Point, PointKey, SpaceDesc};
use crate::tower::{
    build_section, gamma_base, gamma_stabilized, make_grid, residual_field, sigma_ap_cascade,
    GridPoint, GridSpec, Section, Stage, TowerOptions, SCHEMA_VERSION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub query: Point,
    pub value: Point,
    pub precision: u32,
}

/// Ordered record of the oracle queries of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub owner: String,
    pub entries: Vec<TranscriptEntry>,
    pub finalized: bool,
}

impl Transcript {
    pub fn new(owner: &str) -> Transcript {
        Transcript { owner: owner.to_string(), entries: Vec::new(), finalized: false }
    }

    pub fn push(&mut self, e: TranscriptEntry) -> Result<()> {
        if self.finalized {
            return Err(KoopError::InvalidParameter("transcript is finalized".into()));
        }
        self.entries.push(e);
        Ok(())
    }

    pub fn finalize(&mut self) {
        self.finalized = true;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct query points `Θ`.
    pub fn points(&self) -> HashSet<PointKey> {
        self.entries.iter().map(|e| e.query.key()).collect()
    }
}

/// Oracle wrapper that appends every query to a transcript.
pub struct RecordingOracle<'a> {
    inner: &'a dyn Oracle,
    log: Mutex<Transcript>,
}

impl<'a> RecordingOracle<'a> {
    pub fn new(inner: &'a dyn Oracle, owner: &str) -> RecordingOracle<'a> {
        RecordingOracle { inner, log: Mutex::new(Transcript::new(owner)) }
    }

    pub fn finish(self) -> Transcript {
        let mut t = self.log.into_inner().expect("transcript lock");
        t.finalize();
        t
    }
}

impl Oracle for RecordingOracle<'_> {
    fn space(&self) -> &SpaceDesc {
        self.inner.space()
    }

    fn flags(&self) -> &MapFlags {
        self.inner.flags()
    }

    fn evaluate(&self, x: &Point, precision: u32) -> Result<Point> {
        let mut log = self.log.lock().expect("transcript lock");
        let y = self.inner.evaluate(x, precision)?;
        log.push(TranscriptEntry { query: *x, value: y, precision })?;
        Ok(y)
    }

    fn query_count(&self) -> u64 {
        self.inner.query_count()
    }

    fn name(&self) -> String {
        self.inner.name()
    }
}

/// Runs `alg` against a recording wrapper on a single worker thread, so the
/// entry order is the query order.
pub fn record_transcript<T: Send>(owner: &str, f: &dyn Oracle, alg: impl FnOnce(&dyn Oracle) -> Result<T> + Send) -> Result<(T, Transcript)> {
    let rec = RecordingOracle::new(f, owner);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| KoopError::Numeric(e.to_string()))?;
    let out = pool.install(|| alg(&rec))?;
    Ok((out, rec.finish()))
}

/// `F₁ = F₀` on the locked set `Θ` and `F₁ = alt` elsewhere.
pub struct LockedAdversary {
    base: Arc<dyn Oracle>,
    alt: Arc<dyn Oracle>,
    locked: HashSet<PointKey>,
    count: AtomicU64,
}

impl LockedAdversary {
    pub fn locked_points(&self) -> usize {
        self.locked.len()
    }

    pub fn is_locked(&self, x: &Point) -> bool {
        self.locked.contains(&x.key())
    }
}

pub fn lock_adversary(base: Arc<dyn Oracle>, transcripts: &[Transcript], alt: Arc<dyn Oracle>) -> Result<LockedAdversary> {
    if base.space() != alt.space() {
        return Err(KoopError::UnsupportedSpace(format!("alternative acts on {}, base on {}", alt.space(), base.space())));
    }
    let locked = transcripts.iter().flat_map(|t| t.points()).collect();
    Ok(LockedAdversary { base, alt, locked, count: AtomicU64::new(0) })
}

impl Oracle for LockedAdversary {
    fn space(&self) -> &SpaceDesc {
        self.base.space()
    }

    /// Declared class data of the base map.
    fn flags(&self) -> &MapFlags {
        self.base.flags()
    }

    fn evaluate(&self, x: &Point, precision: u32) -> Result<Point> {
        self.count.fetch_add(1, Ordering::SeqCst);
        if self.is_locked(x) {
            self.base.evaluate(x, precision)
        } else {
            self.alt.evaluate(x, precision)
        }
    }

    fn query_count(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }

    fn name(&self) -> String {
        format!("locked({} | {})", self.base.name(), self.alt.name())
    }
}

/// `θ_under = β/2^m` and the prime-tail angle `θ_over` sharing its first `m` bits.
pub fn dyadic_adversary_pair(m: u32, beta: u64) -> Result<(Q, Angle)> {
    if m >= 63 || beta >= 1u64 << m {
        return Err(KoopError::InvalidParameter(format!("need β < 2^m, got β = {beta}, m = {m}")));
    }
    Ok((rational::dyadic(beta, m), Angle::PrimeTail { beta, m }))
}

/// Binary digits `b_1 … b_k` of an angle in `[0, 1)`.
pub fn angle_bits(a: &Q, k: u32) -> Vec<u8> {
    let mut x = a.clone() - Q::from_integer(a.floor().to_integer());
    let two = q(2, 1);
    (0..k)
        .map(|_| {
            x *= &two;
            if x >= Q::from_integer(1.into()) {
                x -= Q::from_integer(1.into());
                1
            } else {
                0
            }
        })
        .collect()
}

/// The `n`-th prime, `p_1 = 2`.
pub fn nth_prime(n: usize) -> u64 {
    (2u64..).filter(|&k| is_prime(k)).nth(n.saturating_sub(1)).expect("primes are infinite")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    No,
}

/// Thresholds `a < b` of the vanishing rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub a: f64,
    pub b: f64,
}

impl Thresholds {
    /// `a = 1/(8p²)`, `b = 3/(8p²)`.
    pub fn prime_square(p: u64) -> Thresholds {
        let s = 8.0 * (p as f64).powi(2);
        Thresholds { a: 1.0 / s, b: 3.0 / s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub n2: usize,
    pub prime: u64,
    pub probes: Vec<[f64; 2]>,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub verdict: Verdict,
}

/// The nontrivial `p`-th roots of unity.
pub fn probe_points(p: u64) -> Vec<Complex64> {
    (1..p).map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / p as f64)).collect()
}

/// `β = max_ζ dist(ζ, candidate)` over the probes with the given thresholds.
pub fn prime_arc_probe_with(candidate: &[Complex64], n2: usize, th: Thresholds) -> Result<ProbeResult> {
    if candidate.is_empty() {
        return Err(KoopError::EmptyCandidate);
    }
    let p = nth_prime(n2);
    let probes = probe_points(p);
    let beta = directed_hausdorff(&probes, candidate)?;
    let verdict = if beta >= th.b { Verdict::Yes } else { Verdict::No };
    Ok(ProbeResult { n2, prime: p, probes: probes.iter().map(|z| [z.re, z.im]).collect(), beta, a: th.a, b: th.b, verdict })
}

pub fn prime_arc_probe(candidate: &[Complex64], n2: usize) -> Result<ProbeResult> {
    prime_arc_probe_with(candidate, n2, Thresholds::prime_square(nth_prime(n2)))
}

/// One block of a block-union map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Cycle(usize),
    /// Rotation of the circle by the golden angle.
    GoldenRotation,
}

impl Block {
    fn space(&self) -> SpaceDesc {
        match self {
            Block::Cycle(q) => SpaceDesc::uniform_atoms(*q),
            Block::GoldenRotation => SpaceDesc::Circle,
        }
    }

    fn map(&self) -> BuiltinMap {
        match self {
            Block::Cycle(q) => BuiltinMap::Cycle(*q),
            Block::GoldenRotation => BuiltinMap::Rotation(Angle::Golden),
        }
    }
}

/// Space and map of the block union, components weighted equally.
pub fn block_union(blocks: &[Block]) -> Result<MapOracle> {
    match blocks {
        [] => Err(KoopError::InvalidParameter("no blocks".into())),
        [b] => MapOracle::new(b.space(), b.map()),
        _ => {
            let w = q(1, blocks.len() as i64);
            let space = SpaceDesc::union(blocks.iter().map(|b| (w.clone(), b.space())).collect());
            MapOracle::new(space, BuiltinMap::BlockUnion(blocks.iter().map(Block::map).collect()))
        }
    }
}

/// Tower and probe parameters of the dichotomy experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomySchedule {
    /// Prime indices `n2` of the probe sets.
    pub probe_indices: Vec<usize>,
    pub epsilon: f64,
    /// Haar elements of the section.
    pub elements: usize,
    /// Sampling level.
    pub level: u32,
    /// Grid mesh `1/mesh_den` and radius.
    pub mesh_den: usize,
    pub radius: f64,
}

impl Default for DichotomySchedule {
    fn default() -> Self {
        DichotomySchedule { probe_indices: vec![4, 5, 6, 7, 8], epsilon: 0.24, elements: 128, level: 11, mesh_den: 4, radius: 1.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomyReport {
    pub schema_version: u32,
    pub experiment: String,
    pub blocks: Vec<Block>,
    pub primes: Vec<u64>,
    pub verdicts: Vec<Verdict>,
    pub beta_trace: Vec<f64>,
    pub thresholds: Vec<[f64; 2]>,
    pub transcript_sizes: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Section of the block union with the element count capped by the tree.
fn dichotomy_section(f: &dyn Oracle, s: &DichotomySchedule) -> Result<(Section, usize)> {
    let tree = Arc::new(DyadicTree::build(f.space().clone(), s.level)?);
    let n = s.elements.min(tree.count(tree.depth())?);
    let dict = HaarDictionary::build(tree, 2.0, n)?;
    Ok((build_section(f, &dict, n, s.level, &TowerOptions::default())?, n))
}

/// Runs the tower on the block-union map and applies the prime-arc probe at
/// every scheduled prime index. The section is built once; every probe set
/// is appended to the grid before thresholding.
pub fn dichotomy_experiment(blocks: &[Block], s: &DichotomySchedule) -> Result<DichotomyReport> {
    let f = block_union(blocks)?;
    let mut report = DichotomyReport {
        schema_version: SCHEMA_VERSION,
        experiment: "dichotomy".into(),
        blocks: blocks.to_vec(),
        primes: Vec::new(),
        verdicts: Vec::new(),
        beta_trace: Vec::new(),
        thresholds: Vec::new(),
        transcript_sizes: Vec::new(),
        warnings: Vec::new(),
    };
    let ((sec, n), t) = record_transcript("dichotomy", &f, |o| dichotomy_section(o, s))?;
    if n < s.elements {
        report.warnings.push(format!("section capped at {n} elements"));
    }
    let threshold = s.epsilon - 1.0 / n as f64;
    let grid = make_grid(&GridSpec::new(q(1, s.mesh_den as i64), rational::from_f64(s.radius))?);
    let field = residual_field(&sec, &grid)?;
    let base: Vec<Complex64> = grid.iter().zip(&field).filter(|(_, &h)| crate::tower::accepts(h, threshold)).map(|((_, z), _)| *z).collect();
    for &n2 in &s.probe_indices {
        let p = nth_prime(n2);
        let probes: Vec<(GridPoint, Complex64)> = probe_points(p).into_iter().enumerate().map(|(k, z)| (GridPoint { k: i64::MAX, l: k as i64 }, z)).collect();
        let vals = residual_field(&sec, &probes)?;
        let mut candidate = base.clone();
        candidate.extend(probes.iter().zip(&vals).filter(|(_, &h)| crate::tower::accepts(h, threshold)).map(|((_, z), _)| *z));
        let th = Thresholds::prime_square(p);
        let (beta, verdict) = if candidate.is_empty() {
            report.warnings.push(format!("empty tower output at prime {p}"));
            (f64::INFINITY, Verdict::No)
        } else {
            let r = prime_arc_probe_with(&candidate, n2, th)?;
            (r.beta, r.verdict)
        };
        report.primes.push(p);
        report.verdicts.push(verdict);
        report.beta_trace.push(beta);
        report.thresholds.push([th.a, th.b]);
        report.transcript_sizes.push(t.len());
    }
    Ok(report)
}

/// The base algorithms admitted to the locking experiments. Each runs with
/// fixed small parameters and serialises its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabAlgorithm {
    GammaP2,
    GammaRatioNet,
    GammaMatrix,
    Stabilized,
    Cascade,
    DiscreteResidual,
    Sigma1,
    ArithmeticSigma2,
    ArithmeticSigma3,
    Markov,
}

impl LabAlgorithm {
    pub const ALL: [LabAlgorithm; 10] = [
        LabAlgorithm::GammaP2,
        LabAlgorithm::GammaRatioNet,
        LabAlgorithm::GammaMatrix,
        LabAlgorithm::Stabilized,
        LabAlgorithm::Cascade,
        LabAlgorithm::DiscreteResidual,
        LabAlgorithm::Sigma1,
        LabAlgorithm::ArithmeticSigma2,
        LabAlgorithm::ArithmeticSigma3,
        LabAlgorithm::Markov,
    ];

    /// Space the algorithm's input maps act on.
    pub fn space(&self) -> SpaceDesc {
        match self {
            LabAlgorithm::Sigma1 => SpaceDesc::Circle,
            LabAlgorithm::Markov => SpaceDesc::uniform_atoms(4),
            _ => SpaceDesc::UnitInterval,
        }
    }

    pub fn run(&self, f: &dyn Oracle) -> Result<String> {
        let grid = GridSpec::new(q(1, 4), q(2, 1))?;
        let interval = || -> Result<HaarDictionary> {
            let tree = Arc::new(DyadicTree::build(SpaceDesc::UnitInterval, 4)?);
            HaarDictionary::build(tree, 2.0, 4)
        };
        let sets = |stages: &[Stage]| -> Vec<Vec<[f64; 2]>> { stages.iter().map(|s| s.set.pairs()).collect() };
        let out = match self {
            LabAlgorithm::GammaP2 | LabAlgorithm::GammaRatioNet | LabAlgorithm::GammaMatrix => {
                let (mode, p) = match self {
                    LabAlgorithm::GammaP2 => (ResidualMode::P2Oracle, 2.0),
                    LabAlgorithm::GammaRatioNet => (ResidualMode::RatioNetSearch, 2.0),
                    _ => (ResidualMode::MatrixSigmaInf, 2.0),
                };
                let opts = TowerOptions { p, mode, resolution: 6, ..TowerOptions::default() };
                let grid = GridSpec::new(q(1, 2), q(1, 1))?;
                let st = gamma_base(f, &interval()?, 0.5, 4, 2, &grid, &opts)?;
                serde_json::to_string(&st.set.pairs())?
            }
            LabAlgorithm::Stabilized => {
                let st = gamma_stabilized(f, &interval()?, 0.5, 4, 2, 4, &grid, &TowerOptions::default())?;
                serde_json::to_string(&sets(&st))?
            }
            LabAlgorithm::Cascade => {
                let c = sigma_ap_cascade(f, &interval()?, 1.0, 3, 4, 3, &grid, &TowerOptions::default())?;
                serde_json::to_string(&sets(&c.stages))?
            }
            LabAlgorithm::DiscreteResidual => {
                let d = interval()?;
                let vals = [Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.5), Complex64::new(-1.0, 0.25)]
                    .iter()
                    .map(|&z| {
                        let q = ResidualQuery { z, n2: 4, n1: 3, p: 2.0, mode: ResidualMode::P2Oracle };
                        discrete_residual(f, &d, &q, 53).map(|v| v.h.to_bits())
                    })
                    .collect::<Result<Vec<u64>>>()?;
                serde_json::to_string(&vals)?
            }
            LabAlgorithm::Sigma1 => {
                let tree = Arc::new(DyadicTree::build(SpaceDesc::Circle, 2)?);
                let d = LipschitzDictionary::standard(tree, 2)?;
                let opts = Sigma1Options { quad_level: Some(8), radius: 1.0, ..Sigma1Options::default() };
                let grid = GridSpec::new(q(1, 4), q(1, 1))?;
                let run = run_sigma1_modulus(f, &d, 0.6, &grid, &opts)?;
                serde_json::to_string(&(run.stage.set.pairs(), run.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()))?
            }
            LabAlgorithm::ArithmeticSigma2 | LabAlgorithm::ArithmeticSigma3 => {
                let tower = if *self == LabAlgorithm::ArithmeticSigma2 { ArithTower::Sigma2 } else { ArithTower::Sigma3 };
                let grid = GridSpec::new(q(1, 2), q(1, 1))?;
                let st = arithmetic_tower(f, &interval()?, tower, &q(1, 2), 4, &[2, 3], &[8, 16], &grid, 2.0)?;
                serde_json::to_string(&sets(&st))?
            }
            LabAlgorithm::Markov => {
                let spec = MarkovSpec::from_permutation(vec![q(1, 4); 4], &[1, 2, 3, 0])?;
                let run = markov_tower_with(&spec, f, 0.5, 4, 2.0, &GridSpec::new(q(1, 4), q(3, 2))?)?;
                serde_json::to_string(&run.stage.set.pairs())?
            }
        };
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockReport {
    pub schema_version: u32,
    pub experiment: String,
    pub algorithm: LabAlgorithm,
    pub base: String,
    pub alt: String,
    pub transcript_size: usize,
    pub locked_points: usize,
    pub outputs_identical: bool,
    /// Whether the alternative map differs from the base somewhere it was not queried.
    pub maps_differ: bool,
}

/// Records `alg` on `base`, locks `alt` onto the transcript and reruns.
pub fn lock_experiment(alg: LabAlgorithm, base: Arc<dyn Oracle>, alt: Arc<dyn Oracle>) -> Result<LockReport> {
    let (out0, t) = record_transcript(&format!("{alg:?}"), base.as_ref(), |o| alg.run(o))?;
    let adv = lock_adversary(base.clone(), std::slice::from_ref(&t), alt.clone())?;
    let out1 = alg.run(&adv)?;
    let maps_differ = witness_points(base.space())
        .iter()
        .filter(|x| !adv.is_locked(x))
        .any(|x| match (base.evaluate(x, 53), alt.evaluate(x, 53)) {
            (Ok(a), Ok(b)) => a != b,
            _ => false,
        });
    Ok(LockReport {
        schema_version: SCHEMA_VERSION,
        experiment: "lock".into(),
        algorithm: alg,
        base: base.name(),
        alt: alt.name(),
        transcript_size: t.len(),
        locked_points: adv.locked_points(),
        outputs_identical: out0 == out1,
        maps_differ,
    })
}

fn witness_points(space: &SpaceDesc) -> Vec<Point> {
    match space {
        SpaceDesc::FiniteAtoms { masses, .. } => (0..masses.len()).map(Point::atom).collect(),
        _ => (0..64).map(|k| Point::real((k as f64 + 0.3) / 64.0)).collect(),
    }
}

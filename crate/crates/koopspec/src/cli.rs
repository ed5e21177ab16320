//! Command-line front end: configuration in, JSON and CSV artifacts out.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{dichotomy_experiment, lock_experiment, LabAlgorithm, LockReport};
use crate::arith::{arithmetic_tower, ArithTower};
use crate::config::{AdversaryConfig, DictionaryConfig, DictionaryKind, ReferenceConfig, RunConfig, TowerKind};
use crate::dictionary::{build_duals, dump_csv, Dictionary, HaarDictionary, IndicatorDictionary, StepDictionary};
use crate::error::{KoopError, Result};
use crate::lipschitz::LipschitzDictionary;
use crate::maps::{BuiltinMap, MapOracle, Oracle};
use crate::markov::{markov_tower, MarkovSpec};
use crate::reference::{hausdorff, map_reference, ReferenceSpectrum};
use crate::residual::{compression_matrix, sigma_inf_matrix, ResidualMode, ResidualValue, SampledSection};
use crate::sigma1::{run_sigma1_modulus, Sigma1Options};
use crate::space::{DyadicTree, SpaceDesc};
use crate::tower::{gamma_base, gamma_stabilized, make_grid, sigma_ap_cascade, Stage, TowerOptions, TowerReport, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(name = "koopspec", version, about = "Residual towers for Koopman pseudospectra")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Bits of precision requested from the map oracle.
    #[arg(long, global = true, value_name = "BITS")]
    pub precision: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Tower outputs and their Hausdorff trace.
    Pseudospec,
    /// Residual landscape on the grid as CSV.
    Sweep,
    /// Locking and dichotomy experiments.
    Adversary,
    /// Tower under a finite invariant partition.
    Markov,
    /// Tower outputs against the closed-form reference.
    Verify,
    /// Dual functionals of the dictionary as CSV.
    Duals,
}

impl Command {
    fn file_name(&self) -> &'static str {
        match self {
            Command::Pseudospec => "pseudospec.json",
            Command::Sweep => "sweep.csv",
            Command::Adversary => "adversary.json",
            Command::Markov => "markov.json",
            Command::Verify => "verify.json",
            Command::Duals => "duals.csv",
        }
    }
}

/// Exit code for a failed reference comparison or locking mismatch.
pub const EXIT_ORACLE: i32 = 4;

/// What a command wrote and the exit code it asks for.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub path: PathBuf,
    pub exit_code: i32,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(o) => {
            println!("{}", o.path.display());
            o.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let path = cli.config.as_ref().ok_or_else(|| KoopError::Config("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let dir = cli.out.clone().or_else(|| cfg.outputs.dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| KoopError::Config(e.to_string()))?;
    let precision = cli.precision.unwrap_or(53);
    if precision == 0 {
        return Err(KoopError::Config("--precision must be positive".into()));
    }
    let (bytes, exit_code) = pool.install(|| render(cli.command, &cfg, precision))?;
    fs::create_dir_all(&dir)?;
    let out = dir.join(cli.command.file_name());
    fs::write(&out, bytes)?;
    Ok(Outcome { path: out, exit_code })
}

/// Runs a command and returns the artifact bytes and exit code.
pub fn render(cmd: Command, cfg: &RunConfig, precision: u32) -> Result<(Vec<u8>, i32)> {
    match cmd {
        Command::Pseudospec => {
            let r = pseudospec(cfg, precision)?;
            Ok((json(&r)?, 0))
        }
        Command::Sweep => Ok((sweep(cfg, precision)?, 0)),
        Command::Adversary => adversary(cfg),
        Command::Markov => Ok((json(&markov(cfg)?)?, 0)),
        Command::Verify => {
            let r = verify(cfg, precision)?;
            let code = if r.pass.iter().all(|&p| p) { 0 } else { EXIT_ORACLE };
            Ok((json(&r)?, code))
        }
        Command::Duals => Ok((duals(cfg)?, 0)),
    }
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| KoopError::Numeric(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn oracle(cfg: &RunConfig) -> Result<MapOracle> {
    MapOracle::new(cfg.space_desc()?, cfg.builtin_map()?).map_err(|e| match e {
        KoopError::Config(m) => KoopError::Config(m),
        other => KoopError::Config(other.to_string()),
    })
}

fn ceil_log2(n: usize) -> u32 {
    n.next_power_of_two().trailing_zeros()
}

/// Step dictionary with `n2` elements on a tree deep enough for level `n1`.
pub fn step_dictionary(space: &SpaceDesc, cfg: &DictionaryConfig, n2: usize, n1: u32) -> Result<Box<dyn StepDictionary>> {
    let level = ceil_log2(n2);
    let tree = Arc::new(DyadicTree::build(space.clone(), n1.max(level))?);
    match cfg.kind {
        DictionaryKind::Haar => Ok(Box::new(HaarDictionary::build(tree, cfg.p, n2)?)),
        DictionaryKind::Indicator => {
            let d = IndicatorDictionary::build(tree, level)?;
            d.check_count(n2)?;
            Ok(Box::new(d))
        }
        DictionaryKind::Lipschitz => Err(KoopError::Config("the lipschitz dictionary runs only with tower sigma1".into())),
    }
}

fn tower_options(cfg: &RunConfig, precision: u32) -> TowerOptions {
    TowerOptions { p: cfg.dictionary.p, mode: cfg.schedule.mode, precision, resolution: cfg.schedule.resolution }
}

fn reference_points(r: &ReferenceConfig, derived: Option<ReferenceSpectrum>) -> Result<(ReferenceSpectrum, Vec<Complex64>)> {
    let spec = match (&r.spectrum, derived) {
        (Some(s), _) => s.clone(),
        (None, Some(s)) => s,
        (None, None) => return Err(KoopError::Config("no closed-form reference for this map; give reference.spectrum".into())),
    };
    let pts = spec.sample(r.sample_radius);
    Ok((spec, pts))
}

/// Tower stages named by the schedule, with per-stage indices.
pub fn tower_stages(cfg: &RunConfig, precision: u32) -> Result<(String, Vec<Stage>, BTreeMap<String, Vec<u64>>)> {
    let f = oracle(cfg)?;
    let s = &cfg.schedule;
    let pairs = s.pairs()?;
    let eps = s.epsilon.to_f64()?;
    let opts = tower_options(cfg, precision);
    let space = f.space().clone();
    let mut idx: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    let mut push = |k: &str, v: u64| idx.entry(k.to_string()).or_default().push(v);
    if cfg.dictionary.kind == DictionaryKind::Lipschitz && s.tower != TowerKind::Sigma1 {
        return Err(KoopError::Config("the lipschitz dictionary runs only with tower sigma1".into()));
    }
    let mut stages = Vec::new();
    let name = match s.tower {
        TowerKind::Sigma2 => {
            for &(n2, n1) in &pairs {
                let d = step_dictionary(&space, &cfg.dictionary, n2, n1)?;
                stages.push(gamma_base(&f, d.as_ref(), eps, n2, n1, &cfg.grid.spec(n2)?, &opts)?);
                push("n2", n2 as u64);
                push("n1", n1 as u64);
            }
            "sigma2"
        }
        TowerKind::Stabilized => {
            for &(n2, n1) in &pairs {
                let d = step_dictionary(&space, &cfg.dictionary, n2, n1)?;
                let st = gamma_stabilized(&f, d.as_ref(), eps, n2, s.k0.min(n1), n1, &cfg.grid.spec(n2)?, &opts)?;
                stages.push(st.into_iter().last().ok_or(KoopError::EmptyInput)?);
                push("n2", n2 as u64);
                push("n1", n1 as u64);
            }
            "stabilized"
        }
        TowerKind::Cascade => {
            let &(n2, n1) = pairs.last().expect("nonempty schedule");
            let d = step_dictionary(&space, &cfg.dictionary, n2, n1)?;
            let c = sigma_ap_cascade(&f, d.as_ref(), eps, s.levels, n2, n1, &cfg.grid.spec(n2)?, &opts)?;
            for (m, mut st) in c.stages.into_iter().enumerate() {
                let v: Vec<String> = c.violations.iter().filter(|(k, _)| *k == m).map(|(_, g)| format!("nesting violated at level {m}, grid point ({}, {})", g.k, g.l)).collect();
                st.warnings.extend(v);
                stages.push(st);
                push("level", m as u64);
            }
            "cascade"
        }
        TowerKind::Sigma1 => {
            if cfg.dictionary.kind != DictionaryKind::Lipschitz {
                return Err(KoopError::Config("tower sigma1 needs the lipschitz dictionary".into()));
            }
            for &(n2, _) in &pairs {
                if !n2.is_power_of_two() {
                    return Err(KoopError::Config(format!("lipschitz dictionary sizes are powers of two, got {n2}")));
                }
                let level = n2.trailing_zeros();
                let tree = Arc::new(DyadicTree::build(space.clone(), level)?);
                let d = LipschitzDictionary::standard(tree, level)?;
                let o = Sigma1Options { p: cfg.dictionary.p, radius: s.sigma1_radius, precision, quad_level: s.quad_level, resolution: s.resolution, ..Sigma1Options::default() };
                let run = run_sigma1_modulus(&f, &d, eps, &cfg.grid.spec(n2)?, &o)?;
                stages.push(run.stage);
                push("n2", n2 as u64);
                push("m", run.m as u64);
            }
            "sigma1"
        }
        TowerKind::ArithSigma2 | TowerKind::ArithSigma3 => {
            let &(n2, _) = pairs.last().expect("nonempty schedule");
            let n1s: Vec<u32> = pairs.iter().map(|p| p.1).collect();
            let top = *n1s.iter().max().expect("nonempty");
            let d = step_dictionary(&space, &cfg.dictionary, n2, top)?;
            let (tower, name) = if s.tower == TowerKind::ArithSigma2 { (ArithTower::Sigma2, "arith_sigma2") } else { (ArithTower::Sigma3, "arith_sigma3") };
            stages = arithmetic_tower(&f, d.as_ref(), tower, &s.epsilon.to_q()?, n2, &n1s, &s.n0, &cfg.grid.spec(n2)?, cfg.dictionary.p)?;
            match tower {
                ArithTower::Sigma2 => s.n0.iter().for_each(|&n0| push("n0", n0 as u64)),
                ArithTower::Sigma3 => n1s.iter().for_each(|&n1| push("n1", n1 as u64)),
            }
            name
        }
    };
    Ok((name.to_string(), stages, idx))
}

pub fn pseudospec(cfg: &RunConfig, precision: u32) -> Result<TowerReport> {
    let (name, stages, idx) = tower_stages(cfg, precision)?;
    let eps = cfg.schedule.epsilon.to_f64()?;
    let reference = match &cfg.reference {
        Some(r) => Some(reference_points(r, map_reference(&cfg.builtin_map()?, eps))?.1),
        None => None,
    };
    TowerReport::new(&name, eps, idx, &stages, reference.as_deref())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub z_re: f64,
    pub z_im: f64,
    pub h: f64,
    pub mode: String,
    pub n2: usize,
    pub n1: u32,
    pub err: f64,
}

/// Residual values on the grid of every schedule stage.
pub fn sweep_rows(cfg: &RunConfig, precision: u32) -> Result<Vec<SweepRow>> {
    let f = oracle(cfg)?;
    let s = &cfg.schedule;
    let p = cfg.dictionary.p;
    let mut rows = Vec::new();
    for (n2, n1) in s.pairs()? {
        let d = step_dictionary(f.space(), &cfg.dictionary, n2, n1)?;
        let pts = make_grid(&cfg.grid.spec(n2)?);
        let vals: Vec<ResidualValue> = if s.mode == ResidualMode::MatrixSigmaInf {
            let duals = build_duals(d.as_ref(), n2)?;
            let m = compression_matrix(&f, d.as_ref(), &duals, n2, n1, precision)?;
            pts.par_iter().map(|(_, z)| sigma_inf_matrix(&m, *z, p, s.resolution)).collect::<Result<_>>()?
        } else {
            let sec = SampledSection::build(&f, d.as_ref(), n2, n1, p, precision)?;
            pts.par_iter().map(|(_, z)| sec.residual(*z, s.mode, s.resolution)).collect::<Result<_>>()?
        };
        rows.extend(pts.iter().zip(vals).map(|((_, z), v)| SweepRow { z_re: z.re, z_im: z.im, h: v.h, mode: s.mode.to_string(), n2, n1, err: v.err }));
    }
    Ok(rows)
}

fn sweep(cfg: &RunConfig, precision: u32) -> Result<Vec<u8>> {
    let rows = sweep_rows(cfg, precision)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| KoopError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| KoopError::Io(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockSuite {
    pub schema_version: u32,
    pub experiment: String,
    pub reports: Vec<LockReport>,
    pub mismatches: usize,
    pub warnings: Vec<String>,
}

/// Locking experiments of every listed algorithm against every alternative.
pub fn lock_suite(base: &BuiltinMap, algorithms: &[LabAlgorithm], alts: &[BuiltinMap]) -> Result<LockSuite> {
    let mut reports = Vec::new();
    let mut warnings = Vec::new();
    for &alg in algorithms {
        for alt in alts {
            let space = alg.space();
            let (b, a) = match (MapOracle::new(space.clone(), base.clone()), MapOracle::new(space.clone(), alt.clone())) {
                (Ok(b), Ok(a)) => (b, a),
                _ => {
                    warnings.push(format!("skipped {alg:?} with {alt:?}: map does not act on {space}"));
                    continue;
                }
            };
            let b: Arc<dyn Oracle> = Arc::new(b);
            let a: Arc<dyn Oracle> = Arc::new(a);
            reports.push(lock_experiment(alg, b, a)?);
        }
    }
    let mismatches = reports.iter().filter(|r| !r.outputs_identical).count();
    Ok(LockSuite { schema_version: SCHEMA_VERSION, experiment: "lock".into(), reports, mismatches, warnings })
}

fn adversary(cfg: &RunConfig) -> Result<(Vec<u8>, i32)> {
    match cfg.adversary.as_ref().ok_or_else(|| KoopError::Config("missing key: adversary".into()))? {
        AdversaryConfig::Lock { algorithms, alts } => {
            let algs = algorithms.clone().unwrap_or_else(|| LabAlgorithm::ALL.to_vec());
            let alts = alts.iter().map(|m| m.build()).collect::<Result<Vec<_>>>()?;
            let suite = lock_suite(&cfg.builtin_map()?, &algs, &alts)?;
            let code = if suite.mismatches == 0 { 0 } else { EXIT_ORACLE };
            Ok((json(&suite)?, code))
        }
        AdversaryConfig::Dichotomy { blocks, schedule } => Ok((json(&dichotomy_experiment(blocks, schedule)?)?, 0)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovReport {
    pub schema_version: u32,
    pub tower: String,
    pub epsilon: f64,
    /// Requested `n` and the element count actually used per stage.
    pub indices: BTreeMap<String, Vec<u64>>,
    pub blocks: Vec<Vec<usize>>,
    pub sets: Vec<Vec<[f64; 2]>>,
    pub hausdorff_trace: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

pub fn markov(cfg: &RunConfig) -> Result<MarkovReport> {
    let spec = MarkovSpec::from_json(cfg.markov.as_ref().ok_or_else(|| KoopError::Config("missing key: markov".into()))?)
        .map_err(|e| KoopError::Config(e.to_string()))?;
    let eps = cfg.schedule.epsilon.to_f64()?;
    let mut stages = Vec::new();
    let mut idx: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    let mut blocks = Vec::new();
    for (n, _) in cfg.schedule.pairs()? {
        let run = markov_tower(&spec, eps, n, cfg.dictionary.p, &cfg.grid.spec(n)?)?;
        idx.entry("n".into()).or_default().push(n as u64);
        idx.entry("n2".into()).or_default().push(run.n2 as u64);
        blocks = run.partition.blocks.clone();
        stages.push(run.stage);
    }
    let reference = match &cfg.reference {
        Some(r) => {
            let derived = spec.permutation().and_then(|p| map_reference(&BuiltinMap::AtomPermutation(p), eps));
            Some(reference_points(r, derived)?.1)
        }
        None => None,
    };
    let t = TowerReport::new("markov", eps, idx, &stages, reference.as_deref())?;
    Ok(MarkovReport {
        schema_version: SCHEMA_VERSION,
        tower: t.tower,
        epsilon: eps,
        indices: t.indices,
        blocks,
        sets: t.sets,
        hausdorff_trace: t.hausdorff_trace,
        warnings: t.warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub tower: String,
    pub epsilon: f64,
    pub reference: ReferenceSpectrum,
    pub sample_radius: f64,
    pub indices: BTreeMap<String, Vec<u64>>,
    pub hausdorff: Vec<Option<f64>>,
    /// `2/n2 + sample_radius` per stage.
    pub bounds: Vec<f64>,
    pub pass: Vec<bool>,
    pub warnings: Vec<String>,
}

/// Compares each tower output with the sampled reference `σ + B_ε`.
pub fn verify(cfg: &RunConfig, precision: u32) -> Result<VerifyReport> {
    let eps = cfg.schedule.epsilon.to_f64()?;
    let rc = cfg.reference.clone().unwrap_or(ReferenceConfig { spectrum: None, sample_radius: 0.01 });
    let (spectrum, pts) = reference_points(&rc, map_reference(&cfg.builtin_map()?, eps))?;
    let (name, stages, idx) = tower_stages(cfg, precision)?;
    let sizes: Vec<usize> = match idx.get("n2") {
        Some(v) => v.iter().map(|&n| n as usize).collect(),
        None => vec![*cfg.schedule.n2.last().expect("nonempty"); stages.len()],
    };
    let mut warnings: Vec<String> = stages.iter().flat_map(|s| s.warnings.iter().cloned()).collect();
    warnings.dedup();
    let hausdorff: Vec<Option<f64>> = stages.iter().map(|s| if s.set.is_empty() { Ok(None) } else { hausdorff(&s.set.complex(), &pts).map(Some) }).collect::<Result<_>>()?;
    let bounds: Vec<f64> = sizes.iter().map(|&n| 2.0 / n as f64 + rc.sample_radius).collect();
    let pass = hausdorff.iter().zip(&bounds).map(|(d, b)| d.is_some_and(|d| d <= *b)).collect();
    Ok(VerifyReport { schema_version: SCHEMA_VERSION, tower: name, epsilon: eps, reference: spectrum, sample_radius: rc.sample_radius, indices: idx, hausdorff, bounds, pass, warnings })
}

fn duals(cfg: &RunConfig) -> Result<Vec<u8>> {
    let &(n2, n1) = cfg.schedule.pairs()?.first().expect("nonempty schedule");
    let d = step_dictionary(&cfg.space_desc()?, &cfg.dictionary, n2, n1)?;
    let mut out = Vec::new();
    dump_csv(d.as_ref(), n2, &mut out)?;
    Ok(out)
}

/// Writes `cfg` as pretty JSON; used to produce example configurations.
pub fn write_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    fs::write(path, json(cfg)?)?;
    Ok(())
}

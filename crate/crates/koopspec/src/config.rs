//! Run configuration read by the command-line front end.

use std::path::Path;

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::adversary::{Block, DichotomySchedule, LabAlgorithm};
use crate::error::{KoopError, Result};
use crate::maps::{Angle, BuiltinMap};
use crate::markov::MarkovSpecJson;
use crate::rational::{self, Q};
use crate::reference::ReferenceSpectrum;
use crate::residual::{ResidualMode, DEFAULT_RESOLUTION};
use crate::space::SpaceDesc;
use crate::tower::GridSpec;

/// A number given either as a JSON number or as a string such as `"3/10"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    pub fn to_q(&self) -> Result<Q> {
        match self {
            Scalar::Number(x) if x.is_finite() => Ok(rational::from_f64(*x)),
            Scalar::Number(x) => Err(KoopError::Config(format!("{x} is not finite"))),
            Scalar::Text(s) => rational::parse(s).map_err(|e| KoopError::Config(e.to_string())),
        }
    }

    pub fn to_f64(&self) -> Result<f64> {
        match self {
            Scalar::Number(x) => Ok(*x),
            Scalar::Text(_) => Ok(rational::to_f64(&self.to_q()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceConfig {
    UnitInterval,
    Circle,
    Atoms { masses: Vec<String> },
    UniformAtoms { count: usize },
    Union { parts: Vec<UnionPart> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnionPart {
    pub weight: String,
    pub space: SpaceConfig,
}

impl SpaceConfig {
    pub fn build(&self) -> Result<SpaceDesc> {
        let s = match self {
            SpaceConfig::UnitInterval => SpaceDesc::UnitInterval,
            SpaceConfig::Circle => SpaceDesc::Circle,
            SpaceConfig::Atoms { masses } => SpaceDesc::atoms(masses.iter().map(|m| Scalar::Text(m.clone()).to_q()).collect::<Result<_>>()?),
            SpaceConfig::UniformAtoms { count } => {
                if *count == 0 {
                    return Err(KoopError::Config("uniform_atoms needs count ≥ 1".into()));
                }
                SpaceDesc::uniform_atoms(*count)
            }
            SpaceConfig::Union { parts } => {
                let parts = parts.iter().map(|p| Ok((Scalar::Text(p.weight.clone()).to_q()?, p.space.build()?))).collect::<Result<Vec<_>>>()?;
                if rational::sum(parts.iter().map(|(w, _)| w)) != Q::one() {
                    return Err(KoopError::Config("union weights must sum to 1".into()));
                }
                SpaceDesc::union(parts)
            }
        };
        s.validate().map_err(|e| KoopError::Config(e.to_string()))?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AngleConfig {
    /// `"p/q"` in lowest terms.
    Rational(String),
    Golden,
    PrimeTail { beta: u64, m: u32 },
}

impl AngleConfig {
    pub fn build(&self) -> Result<Angle> {
        match self {
            AngleConfig::Rational(s) => {
                let t = rational::parse(s).map_err(|e| KoopError::Config(e.to_string()))?;
                if let Some((n, d)) = s.split_once('/') {
                    let (n, d): (i64, i64) = match (n.trim().parse(), d.trim().parse()) {
                        (Ok(n), Ok(d)) => (n, d),
                        _ => return Err(KoopError::Config(format!("angle {s} is not a fraction of integers"))),
                    };
                    if n != 0 && n.gcd(&d) != 1 {
                        return Err(KoopError::Config(format!("angle {s} is not in lowest terms")));
                    }
                }
                Ok(Angle::Rational(t))
            }
            AngleConfig::Golden => Ok(Angle::Golden),
            AngleConfig::PrimeTail { beta, m } => {
                if *m >= 63 || *beta >= 1u64 << m {
                    return Err(KoopError::Config(format!("prime tail needs β < 2^m, got β = {beta}, m = {m}")));
                }
                Ok(Angle::PrimeTail { beta: *beta, m: *m })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapConfig {
    Identity,
    Rotation { angle: AngleConfig },
    Cycle { q: usize },
    Permutation { images: Vec<usize> },
    Halving,
    BlockUnion { maps: Vec<MapConfig> },
}

impl MapConfig {
    pub fn build(&self) -> Result<BuiltinMap> {
        Ok(match self {
            MapConfig::Identity => BuiltinMap::Identity,
            MapConfig::Rotation { angle } => BuiltinMap::Rotation(angle.build()?),
            MapConfig::Cycle { q } => BuiltinMap::Cycle(*q),
            MapConfig::Permutation { images } => BuiltinMap::AtomPermutation(images.clone()),
            MapConfig::Halving => BuiltinMap::Halving,
            MapConfig::BlockUnion { maps } => BuiltinMap::BlockUnion(maps.iter().map(MapConfig::build).collect::<Result<_>>()?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryKind {
    #[default]
    Haar,
    Indicator,
    Lipschitz,
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    #[serde(default)]
    pub kind: DictionaryKind,
    /// Exponent of `L^p`.
    #[serde(default = "two")]
    pub p: f64,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        DictionaryConfig { kind: DictionaryKind::Haar, p: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TowerKind {
    #[default]
    Sigma2,
    Stabilized,
    Cascade,
    Sigma1,
    ArithSigma2,
    ArithSigma3,
}

fn default_epsilon() -> Scalar {
    Scalar::Number(0.5)
}

fn default_n2() -> Vec<usize> {
    vec![4, 8, 16]
}

fn default_n0() -> Vec<u32> {
    vec![8, 16, 24]
}

fn default_mode() -> ResidualMode {
    ResidualMode::P2Oracle
}

fn default_resolution() -> u32 {
    DEFAULT_RESOLUTION
}

fn one_u32() -> u32 {
    1
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub tower: TowerKind,
    #[serde(default = "default_epsilon")]
    pub epsilon: Scalar,
    /// Section sizes, one stage each.
    #[serde(default = "default_n2")]
    pub n2: Vec<usize>,
    /// Sampling levels paired with `n2`; `⌈log₂ n2⌉` when absent.
    #[serde(default)]
    pub n1: Option<Vec<u32>>,
    /// Integer-arithmetic precisions of the arithmetic towers.
    #[serde(default = "default_n0")]
    pub n0: Vec<u32>,
    #[serde(default = "default_mode")]
    pub mode: ResidualMode,
    #[serde(default = "default_resolution")]
    pub resolution: u32,
    /// First sampling level of the stabilised tower.
    #[serde(default = "one_u32")]
    pub k0: u32,
    /// Cascade depth.
    #[serde(default = "three")]
    pub levels: usize,
    /// Configured spectral radius bound of the Lipschitz tower.
    #[serde(default = "two")]
    pub sigma1_radius: f64,
    #[serde(default)]
    pub quad_level: Option<u32>,
    /// Refinement bound of the Markov partition.
    #[serde(default)]
    pub partition_bound: Option<usize>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            tower: TowerKind::Sigma2,
            epsilon: default_epsilon(),
            n2: default_n2(),
            n1: None,
            n0: default_n0(),
            mode: default_mode(),
            resolution: DEFAULT_RESOLUTION,
            k0: 1,
            levels: 3,
            sigma1_radius: 2.0,
            quad_level: None,
            partition_bound: None,
        }
    }
}

impl ScheduleConfig {
    /// `(n2, n1)` pairs of the stages.
    pub fn pairs(&self) -> Result<Vec<(usize, u32)>> {
        if self.n2.is_empty() || self.n2.contains(&0) {
            return Err(KoopError::Config("schedule.n2 must be a nonempty list of positive sizes".into()));
        }
        match &self.n1 {
            Some(n1) if n1.len() != self.n2.len() => Err(KoopError::Config("schedule.n1 and schedule.n2 differ in length".into())),
            Some(n1) => Ok(self.n2.iter().copied().zip(n1.iter().copied()).collect()),
            None => Ok(self.n2.iter().map(|&n| (n, n.next_power_of_two().trailing_zeros())).collect()),
        }
    }
}

/// Lattice of the residual grid. Defaults: mesh `1/n2`, radius 2.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub mesh: Option<Scalar>,
    #[serde(default)]
    pub radius: Option<Scalar>,
}

impl GridConfig {
    pub fn spec(&self, n2: usize) -> Result<GridSpec> {
        let mesh = match &self.mesh {
            Some(m) => m.to_q()?,
            None => rational::q(1, n2 as i64),
        };
        let radius = match &self.radius {
            Some(r) => r.to_q()?,
            None => rational::qi(2),
        };
        if mesh <= Q::zero() {
            return Err(KoopError::Config("grid.mesh must be positive".into()));
        }
        GridSpec::new(mesh, radius).map_err(|e| KoopError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub dir: Option<String>,
}

fn default_sample_radius() -> f64 {
    0.01
}

/// Reference spectrum for Hausdorff traces. Without an explicit spectrum
/// one is derived from the map when a closed form is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    #[serde(default)]
    pub spectrum: Option<ReferenceSpectrum>,
    #[serde(default = "default_sample_radius")]
    pub sample_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryConfig {
    /// Records each algorithm on the base map and reruns it on the map
    /// locked against every alternative.
    Lock {
        #[serde(default)]
        algorithms: Option<Vec<LabAlgorithm>>,
        alts: Vec<MapConfig>,
    },
    Dichotomy {
        blocks: Vec<Block>,
        #[serde(default)]
        schedule: DichotomySchedule,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub space: Option<SpaceConfig>,
    #[serde(default)]
    pub map: Option<MapConfig>,
    #[serde(default)]
    pub dictionary: DictionaryConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
    #[serde(default)]
    pub adversary: Option<AdversaryConfig>,
    #[serde(default)]
    pub markov: Option<MarkovSpecJson>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| KoopError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| KoopError::Config(format!("{}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dictionary.p;
        if !(p > 1.0 && p.is_finite()) {
            return Err(KoopError::Config(format!("dictionary.p = {p} must lie in (1, ∞)")));
        }
        self.schedule.pairs()?;
        self.schedule.epsilon.to_q()?;
        if let Some(s) = &self.space {
            s.build()?;
        }
        if let Some(m) = &self.map {
            m.build()?;
        }
        if let Some(r) = &self.reference {
            if !(r.sample_radius > 0.0) {
                return Err(KoopError::Config("reference.sample_radius must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn space_desc(&self) -> Result<SpaceDesc> {
        self.space.as_ref().ok_or_else(|| KoopError::Config("missing key: space".into()))?.build()
    }

    pub fn builtin_map(&self) -> Result<BuiltinMap> {
        self.map.as_ref().ok_or_else(|| KoopError::Config("missing key: map".into()))?.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let c = RunConfig::from_json(r#"{"space": {"kind": "unit_interval"}, "map": {"kind": "identity"}}"#).unwrap();
        assert_eq!(c.schedule.pairs().unwrap(), vec![(4, 2), (8, 3), (16, 4)]);
        assert_eq!(c.space_desc().unwrap(), SpaceDesc::UnitInterval);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_json(r#"{"space": {"kind": "circle"}, "colour": 1}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::from_json(r#"{"schedule": {"n2": [4], "bogus": 0}}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn angles() {
        let a: AngleConfig = serde_json::from_str(r#"{"rational": "1/4"}"#).unwrap();
        assert_eq!(a.build().unwrap(), Angle::rational(1, 4));
        let a: AngleConfig = serde_json::from_str(r#"{"rational": "2/4"}"#).unwrap();
        assert!(a.build().is_err());
        let a: AngleConfig = serde_json::from_str(r#""golden""#).unwrap();
        assert_eq!(a.build().unwrap(), Angle::Golden);
    }

    #[test]
    fn scalars() {
        assert_eq!(Scalar::Text("3/10".into()).to_q().unwrap(), rational::q(3, 10));
        assert_eq!(Scalar::Number(0.5).to_q().unwrap(), rational::q(1, 2));
    }
}

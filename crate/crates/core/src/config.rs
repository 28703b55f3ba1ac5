//! Run configuration: TOML (`key = value` under `[section]` headers) or JSON.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::Thresholds;
use crate::lattice::{CompactSet, LatticePoint, MAX_DIM};
use crate::palm::TieBreak;
use crate::potential::SolverParams;
use crate::walk::PolicyParams;

/// A finite set of lattice points, described compactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowSpec {
    /// All points between two corners, inclusive.
    Cuboid { lo: Vec<i32>, hi: Vec<i32> },
    Points { points: Vec<Vec<i32>> },
    /// All points with squared norm at most `radius2`.
    Ball { radius2: i64 },
    Empty,
}

impl WindowSpec {
    pub fn build(&self, dim: usize, key: &str) -> Result<CompactSet> {
        let point = |c: &[i32]| -> Result<LatticePoint> {
            if c.len() != dim {
                return Err(Error::config(key, format!("point {c:?} does not have {dim} coordinates")));
            }
            Ok(LatticePoint::new(c))
        };
        match self {
            WindowSpec::Cuboid { lo, hi } => {
                let (lo, hi) = (point(lo)?, point(hi)?);
                if lo.coords().iter().zip(hi.coords()).any(|(a, b)| a > b) {
                    return Err(Error::config(key, "lo must not exceed hi in any coordinate"));
                }
                CompactSet::cuboid(&lo, &hi)
            }
            WindowSpec::Points { points } => {
                let pts = points.iter().map(|c| point(c)).collect::<Result<Vec<_>>>()?;
                CompactSet::from_points(dim, pts)
            }
            WindowSpec::Ball { radius2 } => {
                if *radius2 < 0 {
                    return Err(Error::config(key, "radius2 must be nonnegative"));
                }
                Ok(CompactSet::ball(dim, *radius2))
            }
            WindowSpec::Empty => Ok(CompactSet::empty(dim)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub runs: u64,
    pub tie_break: TieBreak,
    /// Largest tolerated fraction of walks whose intrinsic time cannot be certified.
    pub undecidable_limit: f64,
    /// Trajectories of run 0 written out in full.
    pub dump_paths: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            runs: 1000,
            tie_break: TieBreak::Earliest,
            undecidable_limit: 0.001,
            dump_paths: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    /// Level for the two-sided side; differs from `level` only for power checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub palm_level: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: String,
    pub window: WindowSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<WindowSpec>,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub truncation: PolicyParams,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub tests: Thresholds,
    #[serde(default)]
    pub compare: CompareConfig,
}

fn default_dimension() -> usize {
    3
}
fn default_level() -> f64 {
    1.0
}
fn default_workers() -> usize {
    1
}
fn default_out() -> String {
    "out".into()
}

impl RunConfig {
    /// A default configuration for `window` in dimension 3.
    pub fn for_window(window: WindowSpec) -> Self {
        RunConfig {
            dimension: 3,
            level: 1.0,
            seed: 0,
            workers: 1,
            out: default_out(),
            window,
            observation: None,
            solver: SolverParams::default(),
            truncation: PolicyParams::default(),
            sampling: SamplingConfig::default(),
            tests: Thresholds::default(),
            compare: CompareConfig::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let de = toml::Deserializer::new(s);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.into_inner().message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(s);
        let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Short hex digest of the canonical JSON form. Worker count and output
    /// directory do not change results and are left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = 1;
        canonical.out.clear();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        if !(3..=MAX_DIM).contains(&d) {
            return Err(Error::config("dimension", format!("must be between 3 and {MAX_DIM}, got {d}")));
        }
        if !(self.level.is_finite() && self.level >= 0.0) {
            return Err(Error::config("level", "must be finite and nonnegative"));
        }
        if let Some(l) = self.compare.palm_level {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::config("compare.palm_level", "must be finite and nonnegative"));
            }
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if self.solver.radius == 0 {
            return Err(Error::config("solver.radius", "must be positive"));
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::config("solver.tol", "must be positive"));
        }
        if !(self.solver.omega > 0.0 && self.solver.omega < 2.0) {
            return Err(Error::config("solver.omega", "must lie in (0, 2)"));
        }
        if self.truncation.kill_radius == Some(0) {
            return Err(Error::config("truncation.kill_radius", "must be positive"));
        }
        if self.truncation.step_budget == 0 {
            return Err(Error::config("truncation.step_budget", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.sampling.undecidable_limit) {
            return Err(Error::config("sampling.undecidable_limit", "must lie in [0, 1]"));
        }
        self.window()?;
        self.observation()?;
        Ok(())
    }

    pub fn window(&self) -> Result<Arc<CompactSet>> {
        Ok(Arc::new(self.window.build(self.dimension, "window")?))
    }

    pub fn observation(&self) -> Result<Option<Arc<CompactSet>>> {
        self.observation
            .as_ref()
            .map(|w| w.build(self.dimension, "observation").map(Arc::new))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
dimension = 3
level = 1.5
seed = 7

[window]
kind = "cuboid"
lo = [0, 0, 0]
hi = [1, 1, 1]

[solver]
radius = 10

[truncation]
mode = "hard_kill"
kill_radius = 30
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.window().unwrap().len(), 8);
        assert_eq!(c.solver.radius, 10);
        assert_eq!(c.solver.tol, 1e-8);
        let again = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, c);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json_str(&json).unwrap(), c);
        assert_eq!(again.hash(), c.hash());
        let mut other = c.clone();
        other.workers = 4;
        other.out = "elsewhere".into();
        assert_eq!(other.hash(), c.hash());
        other.seed += 1;
        assert_ne!(other.hash(), c.hash());
    }

    #[test]
    fn errors_name_the_key() {
        let bad = SAMPLE.replace("radius = 10", "radius = \"ten\"");
        match RunConfig::from_toml_str(&bad) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "solver.radius"),
            other => panic!("{other:?}"),
        }
        let unknown = SAMPLE.replace("radius = 10", "radius = 10\nsweeps = 3");
        match RunConfig::from_toml_str(&unknown) {
            Err(Error::Config { key, message }) => {
                assert!(key.starts_with("solver"), "{key}");
                assert!(message.contains("sweeps"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let low = SAMPLE.replace("dimension = 3", "dimension = 2");
        assert!(matches!(RunConfig::from_toml_str(&low), Err(Error::Config { key, .. }) if key == "dimension"));
        let neg = SAMPLE.replace("level = 1.5", "level = -1.0");
        assert!(matches!(RunConfig::from_toml_str(&neg), Err(Error::Config { key, .. }) if key == "level"));
    }

    #[test]
    fn window_kinds() {
        let pts = WindowSpec::Points { points: vec![vec![0, 0, 0], vec![3, 0, 0]] };
        assert_eq!(pts.build(3, "w").unwrap().len(), 2);
        assert_eq!(WindowSpec::Ball { radius2: 9 }.build(3, "w").unwrap().len(), 123);
        assert!(WindowSpec::Empty.build(3, "w").unwrap().is_empty());
        assert!(WindowSpec::Points { points: vec![vec![0, 0]] }.build(3, "w").is_err());
    }
}

//! Configuration-driven runs shared by the command line and the Python bindings.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::classical::ClassicalSetup;
use crate::config::RunConfig;
use crate::ensemble::{run_ensemble, EnsembleOptions, EnsembleStats, RunRecord};
use crate::error::Result;
use crate::harness::{compare_ensembles, occupation_identity_check, time_reversal_test, ReportBundle};
use crate::io::{csv_field, json_document, path_dump, write_atomic, Header};
use crate::lattice::CompactSet;
use crate::palm::{IntrinsicTimeRule, PalmSetup};
use crate::potential::{solve_window, CapacityReport, EquilibriumMeasure};
use crate::seed::SeedScheme;
use crate::walk::TruncationPolicy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Classical,
    TwoSided,
}

impl Which {
    pub fn label(self) -> &'static str {
        match self {
            Which::Classical => "classical",
            Which::TwoSided => "twosided",
        }
    }
}

pub fn header(cfg: &RunConfig) -> Header {
    Header { config_hash: cfg.hash(), master_seed: cfg.seed }
}

/// Everything needed to sample a configured window with either construction.
pub struct Prepared {
    pub window: Arc<CompactSet>,
    pub observation: Option<Arc<CompactSet>>,
    pub classical: ClassicalSetup,
    pub palm: PalmSetup,
}

impl Prepared {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let window = cfg.window()?;
        let observation = cfg.observation()?;
        let policy = TruncationPolicy::for_window(&window, observation.as_deref(), &cfg.truncation, &cfg.solver)?;
        let classical = ClassicalSetup::new(Arc::clone(&window), &cfg.solver, policy.clone())?;
        let rule = IntrinsicTimeRule { tie_break: cfg.sampling.tie_break };
        let palm = PalmSetup::new(Arc::clone(&window), rule, policy, cfg.sampling.undecidable_limit)?;
        Ok(Prepared { window, observation, classical, palm })
    }

    pub fn capacity(&self) -> f64 {
        self.classical.capacity()
    }

    /// `e_K / cap(K)` in the window's point order.
    pub fn normalized_measure(&self) -> Vec<f64> {
        self.classical
            .solution()
            .map_or_else(Vec::new, |s| s.measure.normalized())
    }

    pub fn options(&self, cfg: &RunConfig) -> EnsembleOptions {
        EnsembleOptions {
            runs: cfg.sampling.runs,
            workers: cfg.workers,
            observation: self.observation.clone(),
            reversed: false,
            keep_records: false,
            dump: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialOutput {
    pub capacity: CapacityReport,
    pub measure: EquilibriumMeasure,
}

pub fn potential(cfg: &RunConfig) -> Result<PotentialOutput> {
    let window = cfg.window()?;
    let sol = solve_window(&window, &cfg.solver)?;
    Ok(PotentialOutput { capacity: sol.capacity, measure: sol.measure })
}

/// Writes `capacity.json` and `equilibrium.csv`.
pub fn write_potential(cfg: &RunConfig, out: &Path, result: &PotentialOutput) -> Result<Vec<PathBuf>> {
    let h = header(cfg);
    let cap = out.join("capacity.json");
    write_atomic(&cap, json_document(&h, &result.capacity)?.as_bytes())?;
    let eq = out.join("equilibrium.csv");
    let rows = result.measure.points.iter().copied().zip(result.measure.weights.iter().copied());
    write_atomic(&eq, csv_field(&h, cfg.dimension, rows).as_bytes())?;
    Ok(vec![cap, eq])
}

#[derive(Serialize)]
struct Manifest<'a> {
    construction: &'a str,
    level: f64,
    window: &'a [crate::lattice::LatticePoint],
    capacity: f64,
    policy: String,
    runs: u64,
    count_mean: f64,
    count_se: f64,
    launched: u64,
    undecidable: u64,
    samples: &'a [RunRecord],
}

/// Samples `cfg.sampling.runs` runs of one construction, keeping manifests and path dumps.
pub fn sample(cfg: &RunConfig, which: Which) -> Result<(Prepared, EnsembleStats)> {
    let prep = Prepared::new(cfg)?;
    let mut opts = prep.options(cfg);
    opts.keep_records = true;
    opts.dump = cfg.sampling.dump_paths;
    let seeds = SeedScheme::new(cfg.seed);
    let stats = match which {
        Which::Classical => run_ensemble(&prep.classical, cfg.level, &seeds, &opts)?,
        Which::TwoSided => run_ensemble(&prep.palm, cfg.level, &seeds, &opts)?,
    };
    Ok((prep, stats))
}

/// Writes the manifest, pooled statistics, occupation CSV and path dumps of a sampling run.
pub fn write_sample(
    cfg: &RunConfig,
    out: &Path,
    which: Which,
    prep: &Prepared,
    stats: &EnsembleStats,
) -> Result<Vec<PathBuf>> {
    let h = header(cfg);
    let label = which.label();
    let policy = prep.classical.policy().describe();
    let (count_mean, count_se) = stats.forward.count_mean();
    let manifest = Manifest {
        construction: &stats.construction,
        level: stats.level,
        window: &stats.window,
        capacity: prep.capacity(),
        policy: policy.clone(),
        runs: stats.runs,
        count_mean,
        count_se,
        launched: stats.launched,
        undecidable: stats.undecidable,
        samples: &stats.records,
    };
    let mut written = Vec::new();
    let path = out.join(format!("{label}_manifest.json"));
    write_atomic(&path, json_document(&h, &manifest)?.as_bytes())?;
    written.push(path);
    let path = out.join(format!("{label}_stats.json"));
    write_atomic(&path, json_document(&h, stats)?.as_bytes())?;
    written.push(path);
    if let Some(obs) = &prep.observation {
        let n = stats.runs.max(1) as f64;
        let rows = obs.points().iter().copied().zip(stats.forward.visits_sum.iter().map(|&v| v as f64 / n));
        let path = out.join(format!("{label}_occupation.csv"));
        write_atomic(&path, csv_field(&h, cfg.dimension, rows).as_bytes())?;
        written.push(path);
    }
    let first = stats.records.first();
    for (i, q) in stats.dumped.iter().enumerate() {
        let streams = first
            .and_then(|r| r.trajectories.get(i))
            .map(|t| format!("{:?}", t.streams))
            .unwrap_or_default();
        let path = out.join("paths").join(format!("{label}_run0_{i}.txt"));
        write_atomic(&path, path_dump(&h, &streams, &policy, q).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Classical against two-sided at the configured level (the two-sided side may use
/// `compare.palm_level`), with occupation checks when an observation set is given.
pub fn compare(cfg: &RunConfig) -> Result<ReportBundle> {
    let prep = Prepared::new(cfg)?;
    let opts = prep.options(cfg);
    let seeds = SeedScheme::new(cfg.seed);
    let a = run_ensemble(&prep.classical, cfg.level, &seeds.fork(1), &opts)?;
    let palm_level = cfg.compare.palm_level.unwrap_or(cfg.level);
    let b = run_ensemble(&prep.palm, palm_level, &seeds.fork(2), &opts)?;
    let mut bundle = compare_ensembles(&a, &b, prep.capacity(), &prep.normalized_measure(), &cfg.tests)?;
    if prep.observation.is_some() {
        bundle.reports.push(occupation_identity_check(&a, &cfg.tests).with_seed(cfg.seed));
        bundle.reports.push(occupation_identity_check(&b, &cfg.tests).with_seed(cfg.seed));
    }
    Ok(ReportBundle::new(bundle.name, cfg.seed, bundle.reports))
}

/// Time-reversal checks for both constructions.
pub fn reversal(cfg: &RunConfig) -> Result<ReportBundle> {
    let prep = Prepared::new(cfg)?;
    let mut opts = prep.options(cfg);
    opts.reversed = true;
    let seeds = SeedScheme::new(cfg.seed);
    let a = run_ensemble(&prep.classical, cfg.level, &seeds.fork(1), &opts)?;
    let b = run_ensemble(&prep.palm, cfg.level, &seeds.fork(2), &opts)?;
    let mut reports = time_reversal_test(&a, &cfg.tests)?.reports;
    reports.extend(time_reversal_test(&b, &cfg.tests)?.reports);
    Ok(ReportBundle::new("time reversal", cfg.seed, reports))
}

/// Writes a report bundle as JSON plus a flat CSV (test, statistic, reference, stderr, pass).
pub fn write_report(cfg: &RunConfig, out: &Path, stem: &str, bundle: &ReportBundle) -> Result<Vec<PathBuf>> {
    let h = header(cfg);
    let json = out.join(format!("{stem}.json"));
    write_atomic(&json, json_document(&h, bundle)?.as_bytes())?;
    let mut csv = h.comment_lines();
    csv.push_str("test,statistic,reference,stderr,pass\n");
    for r in &bundle.reports {
        let se = r.std_error.map_or(String::new(), |s| s.to_string());
        csv.push_str(&format!("{},{},{},{},{}\n", r.name, r.statistic, r.reference, se, r.pass));
    }
    let flat = out.join(format!("{stem}.csv"));
    write_atomic(&flat, csv.as_bytes())?;
    Ok(vec![json, flat])
}

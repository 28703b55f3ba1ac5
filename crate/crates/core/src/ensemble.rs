//! Many independent runs of a construction, reduced to window statistics.
//!
//! Runs are generated in parallel in fixed-size chunks, summarized on the
//! worker, then merged in run order, so the result does not depend on the
//! worker count.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{canonicalize, reverse, CompactSet, QuotientPath};
use crate::sample::{check_observation, Construction, InterlacementSample, SiteIndex, TrajectoryRecord};
use crate::seed::SeedScheme;
use crate::walk::{direction_bin, first_exit, from_time_zero};

/// Squared radius of the ball around the entrance used for exit laws.
pub const EXIT_RADIUS2: i64 = 25;

const CHUNK: u64 = 1024;

#[derive(Clone, Debug)]
pub struct EnsembleOptions {
    pub runs: u64,
    pub workers: usize,
    pub observation: Option<Arc<CompactSet>>,
    /// Also accumulate statistics of the time-reversed trajectories.
    pub reversed: bool,
    /// Keep the per-run trajectory records (for manifests).
    pub keep_records: bool,
    /// Keep this many trajectories of run 0 in full.
    pub dump: usize,
}

impl EnsembleOptions {
    pub fn new(runs: u64) -> Self {
        EnsembleOptions {
            runs,
            workers: 1,
            observation: None,
            reversed: false,
            keep_records: false,
            dump: 0,
        }
    }
}

/// Window statistics pooled over runs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowStats {
    /// Trajectory count of each run.
    pub counts: Vec<u64>,
    /// Entrance histogram over the window's points (sorted order).
    pub hits: Vec<u64>,
    /// First exit from the ball of squared radius [`EXIT_RADIUS2`] around the entrance, by direction bin.
    pub exits: Vec<u64>,
    /// Trajectories whose stored forward part never left that ball.
    pub unexited: u64,
    /// Per-site visit totals and sums of squared per-run visits on the observation set.
    pub visits_sum: Vec<u64>,
    pub visits_sumsq: Vec<u64>,
    /// Trajectories with a stored visit to the window before time zero (must stay zero).
    pub pre_entrance_violations: u64,
}

impl WindowStats {
    fn empty(window: usize, dim: usize, observed: usize) -> Self {
        WindowStats {
            counts: Vec::new(),
            hits: vec![0; window],
            exits: vec![0; 2 * dim],
            unexited: 0,
            visits_sum: vec![0; observed],
            visits_sumsq: vec![0; observed],
            pre_entrance_violations: 0,
        }
    }

    pub fn trajectories(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Mean and standard error of the per-run count.
    pub fn count_mean(&self) -> (f64, f64) {
        let v: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        crate::stats::mean_and_se(&v)
    }

    /// Mean and standard error of per-run visits at each observed site.
    pub fn visit_means(&self) -> Vec<(f64, f64)> {
        let n = self.counts.len() as f64;
        self.visits_sum
            .iter()
            .zip(&self.visits_sumsq)
            .map(|(&s, &q)| {
                if n < 2.0 {
                    return (s as f64 / n.max(1.0), 0.0);
                }
                let mean = s as f64 / n;
                let var = ((q as f64 - n * mean * mean) / (n - 1.0)).max(0.0);
                (mean, (var / n).sqrt())
            })
            .collect()
    }

    fn absorb(&mut self, r: &RunStats) {
        self.counts.push(r.count);
        for &i in &r.hits {
            self.hits[i] += 1;
        }
        for &b in &r.exits {
            match b {
                Some(b) => self.exits[b] += 1,
                None => self.unexited += 1,
            }
        }
        for (i, &v) in r.visits.iter().enumerate() {
            self.visits_sum[i] += v;
            self.visits_sumsq[i] += v * v;
        }
        self.pre_entrance_violations += r.pre_entrance_violations;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub construction: String,
    pub level: f64,
    pub master_seed: u64,
    pub runs: u64,
    pub window: Vec<crate::lattice::LatticePoint>,
    pub observation: Vec<crate::lattice::LatticePoint>,
    pub forward: WindowStats,
    pub reversed: Option<WindowStats>,
    pub launched: u64,
    pub undecidable: u64,
    /// Accepted trajectories whose sampled anchor lies outside the ball of squared radius `radius_bound(K)`.
    pub support_violations: u64,
    #[serde(skip)]
    pub records: Vec<RunRecord>,
    #[serde(skip)]
    pub dumped: Vec<QuotientPath>,
}

/// What a manifest lists for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    #[serde(rename = "N")]
    pub count: u64,
    pub launched: u64,
    pub undecidable: u64,
    pub trajectories: Vec<TrajectoryRecord>,
}

struct RunStats {
    count: u64,
    hits: Vec<usize>,
    exits: Vec<Option<usize>>,
    visits: Vec<u64>,
    pre_entrance_violations: u64,
}

fn summarize(
    trajectories: &[QuotientPath],
    window: &CompactSet,
    observation: Option<&SiteIndex>,
    observed: usize,
) -> RunStats {
    let mut visits = vec![0; observed];
    let mut hits = Vec::with_capacity(trajectories.len());
    let mut exits = Vec::with_capacity(trajectories.len());
    let mut pre = 0;
    for q in trajectories {
        let seg = q.segment();
        let entrance = q.entrance();
        hits.push(window.index_of(&entrance).expect("entrance lies in the window"));
        exits.push(first_exit(from_time_zero(seg), &entrance, EXIT_RADIUS2).map(|d| direction_bin(&d)));
        if seg.points()[..seg.origin_index()].iter().any(|p| window.contains(p)) {
            pre += 1;
        }
        if let Some(idx) = observation {
            idx.add_visits(seg.points(), &mut visits);
        }
    }
    RunStats {
        count: trajectories.len() as u64,
        hits,
        exits,
        visits,
        pre_entrance_violations: pre,
    }
}

/// Time-reverses every trajectory and re-anchors it at its first entrance into the window.
pub fn reverse_sample(sample: &InterlacementSample) -> Result<InterlacementSample> {
    let trajectories = sample
        .trajectories
        .iter()
        .map(|q| canonicalize(&reverse(q.segment()), &sample.window))
        .collect::<Result<Vec<_>>>()?;
    let mut records = sample.records.clone();
    for (r, q) in records.iter_mut().zip(&trajectories) {
        r.entrance = q.entrance();
    }
    Ok(InterlacementSample {
        trajectories,
        records,
        ..sample.clone()
    })
}

struct RunOutput {
    record: Option<RunRecord>,
    dumped: Vec<QuotientPath>,
    forward: RunStats,
    reversed: Option<RunStats>,
    launched: u64,
    undecidable: u64,
    support_violations: u64,
}

/// Runs `construction` for `opts.runs` independent runs and pools the statistics.
pub fn run_ensemble(
    construction: &dyn Construction,
    level: f64,
    seeds: &SeedScheme,
    opts: &EnsembleOptions,
) -> Result<EnsembleStats> {
    if opts.workers == 0 {
        return Err(Error::config("sampling.workers", "must be at least 1"));
    }
    let window = Arc::clone(construction.window());
    if let Some(obs) = &opts.observation {
        check_observation(construction.exact_region(), obs)?;
    }
    let index = opts.observation.as_deref().map(SiteIndex::new);
    let observed = opts.observation.as_ref().map_or(0, |o| o.len());
    let dim = window.dim();
    let bound = window.radius_bound();

    let one = |run: u64| -> Result<RunOutput> {
        let sample = construction.sample(level, seeds, run)?;
        let forward = summarize(&sample.trajectories, &window, index.as_ref(), observed);
        let reversed = if opts.reversed {
            let rev = reverse_sample(&sample)?;
            Some(summarize(&rev.trajectories, &window, index.as_ref(), observed))
        } else {
            None
        };
        let support_violations = sample
            .records
            .iter()
            .filter(|r| r.anchor.squared_norm() > bound)
            .count() as u64;
        let dumped = if run == 0 {
            sample.trajectories.iter().take(opts.dump).cloned().collect()
        } else {
            Vec::new()
        };
        let record = opts.keep_records.then(|| RunRecord {
            run,
            count: sample.count() as u64,
            launched: sample.launched,
            undecidable: sample.undecidable,
            trajectories: sample.records.clone(),
        });
        Ok(RunOutput {
            record,
            dumped,
            forward,
            reversed,
            launched: sample.launched,
            undecidable: sample.undecidable,
            support_violations,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::config("sampling.workers", e.to_string()))?;

    let mut stats = EnsembleStats {
        construction: construction.name().to_string(),
        level,
        master_seed: seeds.master_seed,
        runs: opts.runs,
        window: window.points().to_vec(),
        observation: opts.observation.as_ref().map_or_else(Vec::new, |o| o.points().to_vec()),
        forward: WindowStats::empty(window.len(), dim, observed),
        reversed: opts.reversed.then(|| WindowStats::empty(window.len(), dim, observed)),
        launched: 0,
        undecidable: 0,
        support_violations: 0,
        records: Vec::new(),
        dumped: Vec::new(),
    };
    let mut start = 0;
    while start < opts.runs {
        let end = (start + CHUNK).min(opts.runs);
        let chunk: Vec<RunOutput> =
            pool.install(|| (start..end).into_par_iter().map(one).collect::<Result<Vec<_>>>())?;
        for out in chunk {
            stats.forward.absorb(&out.forward);
            if let (Some(acc), Some(r)) = (stats.reversed.as_mut(), out.reversed.as_ref()) {
                acc.absorb(r);
            }
            stats.launched += out.launched;
            stats.undecidable += out.undecidable;
            stats.support_violations += out.support_violations;
            stats.records.extend(out.record);
            stats.dumped.extend(out.dumped);
        }
        start = end;
    }
    Ok(stats)
}

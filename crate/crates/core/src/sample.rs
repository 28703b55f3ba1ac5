//! Samples of the interlacement restricted to a window, and operations on them.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{canonicalize, CompactSet, EndStatus, LatticePoint, QuotientPath};
use crate::seed::{SeedScheme, StreamKey};

/// Bookkeeping for one accepted trajectory, enough to replay it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Time-zero point as sampled: the equilibrium start or the candidate site.
    pub anchor: LatticePoint,
    /// First entrance into the window.
    pub entrance: LatticePoint,
    pub streams: Vec<StreamKey>,
    /// Every unstored point of the path has squared norm at least this.
    pub certificate: i64,
    pub past_status: EndStatus,
    pub future_status: EndStatus,
    /// Kill-radius doublings needed before the acceptance decision was certified.
    pub escalations: u32,
}

/// The trajectories of one realization that visit the window.
#[derive(Clone, Debug)]
pub struct InterlacementSample {
    pub construction: String,
    pub level: f64,
    pub master_seed: u64,
    pub run: u64,
    pub window: Arc<CompactSet>,
    /// Sites on which every trajectory is stored without gaps or cutoffs.
    pub exact_region: Arc<CompactSet>,
    pub trajectories: Vec<QuotientPath>,
    pub records: Vec<TrajectoryRecord>,
    /// Walks generated, accepted or not.
    pub launched: u64,
    /// Walks whose acceptance could not be certified and were dropped.
    pub undecidable: u64,
}

impl InterlacementSample {
    pub fn count(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    fn clone_header(&self) -> InterlacementSample {
        InterlacementSample {
            construction: self.construction.clone(),
            level: self.level,
            master_seed: self.master_seed,
            run: self.run,
            window: Arc::clone(&self.window),
            exact_region: Arc::clone(&self.exact_region),
            trajectories: Vec::new(),
            records: Vec::new(),
            launched: self.launched,
            undecidable: self.undecidable,
        }
    }
}

/// One realization of a construction, keyed by run index.
pub trait Construction: Send + Sync {
    fn name(&self) -> &str;
    fn window(&self) -> &Arc<CompactSet>;
    fn exact_region(&self) -> &Arc<CompactSet>;
    fn sample(&self, level: f64, seeds: &SeedScheme, run: u64) -> Result<InterlacementSample>;
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level.is_finite() && level >= 0.0 {
        Ok(())
    } else {
        Err(Error::config("level", format!("must be finite and nonnegative, got {level}")))
    }
}

/// Poisson draw that accepts a zero mean.
pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as u64
}

/// Keeps the trajectories that visit `inner` and re-anchors them at their first entrance.
pub fn restrict(sample: &InterlacementSample, inner: &Arc<CompactSet>) -> Result<InterlacementSample> {
    if !inner.is_subset(&sample.window) {
        return Err(Error::NotNested);
    }
    let mut trajectories = Vec::new();
    let mut records = Vec::new();
    for (q, rec) in sample.trajectories.iter().zip(&sample.records) {
        match canonicalize(q.segment(), inner) {
            Ok(r) => {
                let mut rec = rec.clone();
                rec.entrance = r.entrance();
                records.push(rec);
                trajectories.push(r);
            }
            Err(Error::NoHit) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(InterlacementSample {
        window: Arc::clone(inner),
        trajectories,
        records,
        ..sample.clone_header()
    })
}

/// Visit counts on an observation set, summed over trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationField {
    pub sites: Arc<CompactSet>,
    pub visits: Vec<u64>,
}

impl OccupationField {
    pub fn zero(sites: Arc<CompactSet>) -> Self {
        let visits = vec![0; sites.len()];
        OccupationField { sites, visits }
    }

    pub fn vacant(&self) -> Vec<bool> {
        self.visits.iter().map(|&v| v == 0).collect()
    }

    pub fn total(&self) -> u64 {
        self.visits.iter().sum()
    }
}

/// Index lookup from points to positions in an observation set.
pub(crate) struct SiteIndex {
    map: HashMap<LatticePoint, usize>,
    bound: i64,
}

impl SiteIndex {
    pub(crate) fn new(sites: &CompactSet) -> Self {
        SiteIndex {
            map: sites.points().iter().enumerate().map(|(i, p)| (*p, i)).collect(),
            bound: sites.radius_bound(),
        }
    }

    #[inline]
    pub(crate) fn get(&self, p: &LatticePoint) -> Option<usize> {
        if p.squared_norm() > self.bound {
            None
        } else {
            self.map.get(p).copied()
        }
    }

    pub(crate) fn add_visits<'a>(&self, points: impl IntoIterator<Item = &'a LatticePoint>, visits: &mut [u64]) {
        for p in points {
            if let Some(i) = self.get(p) {
                visits[i] += 1;
            }
        }
    }
}

pub(crate) fn check_observation(exact_region: &CompactSet, observation: &CompactSet) -> Result<()> {
    if observation.dim() != exact_region.dim() {
        return Err(Error::DimensionMismatch {
            expected: exact_region.dim(),
            found: observation.dim(),
        });
    }
    if observation.is_subset(exact_region) {
        Ok(())
    } else {
        Err(Error::BoxTooLarge {
            box_bound: observation.radius_bound(),
            storage_bound: exact_region.radius_bound(),
        })
    }
}

/// Occupation field of `sample` on `observation`, which must lie in the exact-storage region.
pub fn trace(sample: &InterlacementSample, observation: &Arc<CompactSet>) -> Result<OccupationField> {
    check_observation(&sample.exact_region, observation)?;
    let index = SiteIndex::new(observation);
    let mut field = OccupationField::zero(Arc::clone(observation));
    for q in &sample.trajectories {
        index.add_visits(q.segment().points(), &mut field.visits);
    }
    Ok(field)
}

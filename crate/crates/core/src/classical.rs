//! The classical construction: Poisson many trajectories started from the
//! normalized equilibrium measure of the window, each made of a plain forward
//! walk and a backward walk conditioned never to return to the window.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{Error, Result};
use crate::lattice::{canonicalize, CompactSet, EndStatus, LatticePoint};
use crate::potential::{solve_window, PotentialSolution, SolverParams};
use crate::sample::{check_level, poisson_count, Construction, InterlacementSample, TrajectoryRecord};
use crate::seed::{SeedScheme, StreamKey, StreamTag};
use crate::walk::{assemble, sample_conditioned_avoiding, sample_forward, TruncationPolicy};

const SEED_DOMAIN: u64 = 0xC1A5_51CA;

/// Solved window plus walk policy, reusable across runs.
#[derive(Clone, Debug)]
pub struct ClassicalSetup {
    window: Arc<CompactSet>,
    solution: Option<PotentialSolution>,
    starts: Option<WeightedIndex<f64>>,
    policy: TruncationPolicy,
}

impl ClassicalSetup {
    pub fn new(window: Arc<CompactSet>, solver: &SolverParams, policy: TruncationPolicy) -> Result<Self> {
        if window.dim() != policy.dim() {
            return Err(Error::DimensionMismatch {
                expected: policy.dim(),
                found: window.dim(),
            });
        }
        if policy.storage_bound() < window.radius_bound() {
            return Err(Error::config(
                "truncation",
                "storage ball does not contain the window",
            ));
        }
        let (solution, starts) = if window.is_empty() {
            (None, None)
        } else {
            let sol = solve_window(&window, solver)?;
            let starts = WeightedIndex::new(&sol.measure.weights)
                .map_err(|e| Error::config("window", format!("equilibrium measure unusable: {e}")))?;
            (Some(sol), Some(starts))
        };
        Ok(ClassicalSetup {
            window,
            solution,
            starts,
            policy,
        })
    }

    pub fn solution(&self) -> Option<&PotentialSolution> {
        self.solution.as_ref()
    }

    pub fn capacity(&self) -> f64 {
        self.solution.as_ref().map_or(0.0, |s| s.capacity())
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }
}

/// One realization of the classical construction at level `level`.
pub fn sample_classical(
    setup: &ClassicalSetup,
    level: f64,
    seeds: &SeedScheme,
    run: u64,
) -> Result<InterlacementSample> {
    check_level(level)?;
    let seeds = seeds.fork(SEED_DOMAIN);
    let dim = setup.window.dim();
    let origin = LatticePoint::origin(dim);
    let mut sample = InterlacementSample {
        construction: "classical".into(),
        level,
        master_seed: seeds.master_seed,
        run,
        window: Arc::clone(&setup.window),
        exact_region: Arc::clone(&setup.window),
        trajectories: Vec::new(),
        records: Vec::new(),
        launched: 0,
        undecidable: 0,
    };
    let (Some(sol), Some(starts)) = (&setup.solution, &setup.starts) else {
        return Ok(sample);
    };

    let n = poisson_count(level * sol.capacity(), &mut seeds.stream(origin, run, 0, StreamTag::Count));
    for j in 0..n {
        let y = sol.measure.points[starts.sample(&mut seeds.stream(origin, run, j, StreamTag::Start))];
        let fkey = StreamKey { site: y, replicate: run, slot: j, tag: StreamTag::Forward };
        let bkey = StreamKey { tag: StreamTag::Backward, ..fkey };
        let forward = sample_forward(y, &setup.policy, &mut seeds.rng(&fkey));
        let backward =
            sample_conditioned_avoiding(&setup.window, y, &sol.field, &setup.policy, &mut seeds.rng(&bkey))?;
        if forward.end.status == EndStatus::Budget || backward.end.status == EndStatus::Budget {
            return Err(Error::StepBudget(setup.policy.step_budget()));
        }
        let seg = assemble(y, backward, forward);
        let q = canonicalize(&seg, &setup.window)?;
        debug_assert_eq!(q.entrance(), y);
        sample.records.push(TrajectoryRecord {
            anchor: y,
            entrance: q.entrance(),
            streams: vec![
                StreamKey { site: origin, replicate: run, slot: 0, tag: StreamTag::Count },
                StreamKey { site: origin, replicate: run, slot: j, tag: StreamTag::Start },
                fkey,
                bkey,
            ],
            certificate: seg.past_end().certificate.min(seg.future_end().certificate),
            past_status: seg.past_end().status,
            future_status: seg.future_end().status,
            escalations: 0,
        });
        sample.trajectories.push(q);
    }
    sample.launched = n;
    Ok(sample)
}

impl Construction for ClassicalSetup {
    fn name(&self) -> &str {
        "classical"
    }

    fn window(&self) -> &Arc<CompactSet> {
        &self.window
    }

    fn exact_region(&self) -> &Arc<CompactSet> {
        &self.window
    }

    fn sample(&self, level: f64, seeds: &SeedScheme, run: u64) -> Result<InterlacementSample> {
        sample_classical(self, level, seeds, run)
    }
}

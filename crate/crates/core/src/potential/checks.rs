//! Monte Carlo checks of the entrance law from infinity and of the sweeping identity.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_window, SolverParams};
use crate::error::{Error, Result};
use crate::lattice::{CompactSet, LatticePoint, SiteMask};
use crate::seed::{SeedScheme, StreamTag};
use crate::stats::{normalize, tv_distance};
use crate::walk::{walk_until_hit, HitOutcome, PolicyParams, TruncationPolicy};

const BATCH: u64 = 4096;

/// Entrance histogram of walks launched from far away.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicEstimate {
    pub points: Vec<LatticePoint>,
    pub hits: Vec<u64>,
    pub launched: u64,
    pub empirical: Vec<f64>,
    /// `e_K / cap(K)` from the solver.
    pub reference: Vec<f64>,
    pub tv: f64,
}

/// Lattice points `x` with `floor(|x|) == radius`.
pub fn shell(dim: usize, radius: u32) -> Vec<LatticePoint> {
    let lo = radius as i64 * radius as i64;
    let hi = (radius as i64 + 1) * (radius as i64 + 1);
    CompactSet::ball(dim, hi - 1)
        .points()
        .iter()
        .copied()
        .filter(|p| p.squared_norm() >= lo)
        .collect()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("sampling.workers", e.to_string()))
}

/// Launches walks uniformly on the shell of radius `far_radius` until `n` of
/// them have entered `window`, and compares the entrance law with `e_K / cap(K)`.
/// Walks are stopped at twice the launch radius with the escape correction of `policy`.
#[allow(clippy::too_many_arguments)]
pub fn harmonic_measure_from_infinity(
    window: &Arc<CompactSet>,
    far_radius: u32,
    n: u64,
    seeds: &SeedScheme,
    params: &PolicyParams,
    solver: &SolverParams,
    max_launches: u64,
    workers: usize,
) -> Result<HarmonicEstimate> {
    if window.is_empty() {
        return Err(Error::config("window", "must be nonempty"));
    }
    if n == 0 {
        return Err(Error::config("n", "must be positive"));
    }
    if (far_radius as i64).pow(2) <= window.radius_bound() {
        return Err(Error::config("far_radius", "launch shell must enclose the window"));
    }
    let sol = solve_window(window, solver)?;
    let params = PolicyParams {
        kill_radius: Some(params.kill_radius.unwrap_or(0).max(2 * far_radius)),
        ..*params
    };
    let policy = TruncationPolicy::for_window(window, None, &params, solver)?;
    let mask = SiteMask::new(window);
    let starts = shell(window.dim(), far_radius);
    let origin = LatticePoint::origin(window.dim());

    let mut hits = vec![0u64; window.len()];
    let mut found = 0u64;
    let mut launched = 0u64;
    let pool = pool(workers)?;
    while found < n && launched < max_launches {
        let end = (launched + BATCH).min(max_launches);
        let batch: Vec<Option<usize>> = pool.install(|| {
            (launched..end)
                .into_par_iter()
                .map(|i| {
                    let mut rng = seeds.stream(origin, i, 0, StreamTag::Launch);
                    let x = starts[rng.random_range(0..starts.len())];
                    match walk_until_hit(x, window, &mask, &policy, &mut rng) {
                        HitOutcome::Hit(p) => window.index_of(&p),
                        _ => None,
                    }
                })
                .collect()
        });
        for h in batch.into_iter().flatten() {
            if found < n {
                hits[h] += 1;
                found += 1;
            }
        }
        launched = end;
    }
    if found == 0 {
        return Err(Error::ZeroHits { launched });
    }
    let empirical = normalize(&hits);
    let reference = sol.measure.normalized();
    let tv = tv_distance(&empirical, &reference);
    Ok(HarmonicEstimate {
        points: window.points().to_vec(),
        hits,
        launched,
        empirical,
        reference,
        tv,
    })
}

/// Walks from `e_{K'} / cap(K')` recorded at their first entrance into `K ⊂ K'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEstimate {
    pub n: u64,
    pub hits: Vec<u64>,
    pub outer_capacity: f64,
    pub inner_capacity: f64,
    /// `cap(K') * hits / n`, an estimate of `cap(K)`.
    pub hit_mass: f64,
    pub hit_mass_se: f64,
    pub empirical: Vec<f64>,
    pub reference: Vec<f64>,
    pub tv: f64,
}

pub fn sweep_check(
    inner: &Arc<CompactSet>,
    outer: &Arc<CompactSet>,
    n: u64,
    seeds: &SeedScheme,
    params: &PolicyParams,
    solver: &SolverParams,
    workers: usize,
) -> Result<SweepEstimate> {
    if !inner.is_subset(outer) {
        return Err(Error::NotNested);
    }
    if inner.is_empty() || n == 0 {
        return Err(Error::config("sweep", "needs a nonempty inner set and n > 0"));
    }
    let outer_sol = solve_window(outer, solver)?;
    let inner_sol = solve_window(inner, solver)?;
    let policy = TruncationPolicy::for_window(outer, None, params, solver)?;
    let mask = SiteMask::new(inner);
    let starts = WeightedIndex::new(&outer_sol.measure.weights)
        .map_err(|e| Error::config("outer", format!("equilibrium measure unusable: {e}")))?;
    let origin = LatticePoint::origin(outer.dim());

    let pool = pool(workers)?;
    let outcomes: Vec<Option<usize>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = seeds.stream(origin, i, 1, StreamTag::Launch);
                let x = outer_sol.measure.points[starts.sample(&mut rng)];
                match walk_until_hit(x, inner, &mask, &policy, &mut rng) {
                    HitOutcome::Hit(p) => inner.index_of(&p),
                    _ => None,
                }
            })
            .collect()
    });
    let mut hits = vec![0u64; inner.len()];
    for h in outcomes.into_iter().flatten() {
        hits[h] += 1;
    }
    let total: u64 = hits.iter().sum();
    let frac = total as f64 / n as f64;
    let cap_outer = outer_sol.capacity();
    let empirical = normalize(&hits);
    let reference = inner_sol.measure.normalized();
    Ok(SweepEstimate {
        n,
        tv: tv_distance(&empirical, &reference),
        hits,
        outer_capacity: cap_outer,
        inner_capacity: inner_sol.capacity(),
        hit_mass: cap_outer * frac,
        hit_mass_se: cap_outer * (frac * (1.0 - frac) / n as f64).sqrt(),
        empirical,
        reference,
    })
}

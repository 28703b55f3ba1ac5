mod common;

use std::sync::Arc;

use interlacement::classical::{sample_classical, ClassicalSetup};
use interlacement::ensemble::{run_ensemble, EnsembleOptions};
use interlacement::lattice::{CompactSet, LatticePoint};
use interlacement::palm::{candidate_sites, sample_palm, Decision, IntrinsicTimeRule, PalmSetup};
use interlacement::potential::SolverParams;
use interlacement::sample::{restrict, trace, Construction, InterlacementSample};
use interlacement::seed::SeedScheme;
use interlacement::stats::mean_and_se;
use interlacement::walk::{PolicyParams, TruncationPolicy};
use interlacement::Error;

fn setups(window: CompactSet) -> (ClassicalSetup, PalmSetup) {
    let window = Arc::new(window);
    let solver = SolverParams::default();
    let policy = TruncationPolicy::for_window(&window, None, &PolicyParams::default(), &solver).unwrap();
    let classical = ClassicalSetup::new(Arc::clone(&window), &solver, policy.clone()).unwrap();
    let palm = PalmSetup::new(window, IntrinsicTimeRule::default(), policy, 0.001).unwrap();
    (classical, palm)
}

fn origin_set() -> CompactSet {
    CompactSet::from_points(3, [LatticePoint::origin(3)]).unwrap()
}

fn origin_capacity() -> f64 {
    common::richardson(3, common::dense_origin_capacity(3, 12), common::dense_origin_capacity(3, 24))
}

fn counts(c: &dyn Construction, level: f64, seeds: &SeedScheme, runs: u64) -> Vec<f64> {
    (0..runs).map(|r| c.sample(level, seeds, r).unwrap().count() as f64).collect()
}

#[test]
fn vanishing_level_gives_empty_samples() {
    let (classical, palm) = setups(origin_set());
    let level = 1e-6 / classical.capacity();
    let seeds = SeedScheme::new(9);
    for c in [&classical as &dyn Construction, &palm] {
        for run in 0..100 {
            assert!(c.sample(level, &seeds, run).unwrap().is_empty(), "{} run {run}", c.name());
        }
    }
    for c in [&classical as &dyn Construction, &palm] {
        let s = c.sample(0.0, &seeds, 0).unwrap();
        assert!(s.is_empty() && s.launched == 0);
    }
    assert!(classical.sample(-1.0, &seeds, 0).is_err());
}

#[test]
fn origin_count_means_match_the_capacity_oracle() {
    let cap = origin_capacity();
    let (classical, palm) = setups(origin_set());
    let seeds = SeedScheme::new(12);
    let n = 10_000;
    for c in [&classical as &dyn Construction, &palm] {
        let (mean, _) = mean_and_se(&counts(c, 1.0, &seeds, n));
        let se = (cap / n as f64).sqrt();
        assert!((mean - cap).abs() < 3.0 * se, "{}: {mean} vs {cap} (se {se})", c.name());
    }
}

#[test]
fn accepted_paths_for_the_origin_have_their_minimum_there() {
    let (_, palm) = setups(origin_set());
    let seeds = SeedScheme::new(4);
    let mut seen = 0;
    for run in 0..2000 {
        let s = sample_palm(&palm, 1.0, &seeds, run).unwrap();
        for (q, rec) in s.trajectories.iter().zip(&s.records) {
            seen += 1;
            assert_eq!(rec.anchor, LatticePoint::origin(3));
            assert_eq!(q.entrance(), LatticePoint::origin(3));
            let seg = q.segment();
            assert!(seg.points()[..seg.origin_index()].iter().all(|p| p.squared_norm() > 0));
        }
    }
    assert!(seen > 1000);
}

#[test]
fn walks_anchored_outside_the_candidate_ball_are_never_accepted() {
    let (_, palm) = setups(CompactSet::cube(3, 0, 1));
    assert_eq!(palm.candidates().len(), CompactSet::ball(3, 3).len());
    let seeds = SeedScheme::new(31);
    for c in [[2, 0, 0], [2, 1, 0], [1, 1, 1], [2, 2, 1], [0, -2, 1], [3, 0, 0]] {
        let x = LatticePoint::new(&c);
        if x.squared_norm() <= 3 {
            continue;
        }
        for slot in 0..1500 {
            let v = palm.decide_walk(x, 0, slot, &seeds);
            assert_ne!(v.decision, Decision::Accept, "{c:?} slot {slot}");
        }
    }
}

#[test]
fn candidate_sets_are_monotone() {
    let small = CompactSet::cube(3, 0, 1);
    let big = CompactSet::cube(3, -1, 2);
    let cs = candidate_sites(&small);
    let cb = candidate_sites(&big);
    assert!(cs.iter().all(|p| cb.contains(p)));
    assert_eq!(candidate_sites(&origin_set()), vec![LatticePoint::origin(3)]);
}

fn first_nonempty(c: &dyn Construction, seeds: &SeedScheme) -> InterlacementSample {
    (0..).map(|r| c.sample(1.0, seeds, r).unwrap()).find(|s| s.count() >= 2).unwrap()
}

#[test]
fn restriction_identity_and_disjoint_cases() {
    let box3 = CompactSet::cube(3, -1, 1);
    let (classical, palm) = setups(box3.clone());
    let seeds = SeedScheme::new(2);
    for c in [&classical as &dyn Construction, &palm] {
        let s = first_nonempty(c, &seeds);
        let same = restrict(&s, &s.window).unwrap();
        assert_eq!(same.trajectories, s.trajectories);
        assert_eq!(same.records, s.records);

        let unvisited = box3
            .points()
            .iter()
            .find(|p| s.trajectories.iter().all(|q| !q.segment().points().contains(p)));
        if let Some(p) = unvisited {
            let lone = Arc::new(CompactSet::from_points(3, [*p]).unwrap());
            assert!(restrict(&s, &lone).unwrap().is_empty());
        }
        let outside = Arc::new(CompactSet::from_points(3, [LatticePoint::new(&[5, 0, 0])]).unwrap());
        assert!(matches!(restrict(&s, &outside), Err(Error::NotNested)));

        let center = Arc::new(origin_set());
        let r = restrict(&s, &center).unwrap();
        for q in &r.trajectories {
            assert_eq!(q.entrance(), LatticePoint::origin(3));
        }
    }
}

/// Restricting a sample on the 3x3x3 box to its center reproduces the law of
/// a sample on the center alone.
#[test]
fn restriction_is_compatible_with_direct_sampling() {
    let cap = origin_capacity();
    let (classical_box, palm_box) = setups(CompactSet::cube(3, -1, 1));
    let (classical_pt, _) = setups(origin_set());
    let center = Arc::new(origin_set());
    let seeds = SeedScheme::new(40);
    for (c, n) in [(&classical_box as &dyn Construction, 10_000u64), (&palm_box, 10_000)] {
        let restricted: Vec<f64> = (0..n)
            .map(|r| restrict(&c.sample(1.0, &seeds, r).unwrap(), &center).unwrap().count() as f64)
            .collect();
        let (m, se) = mean_and_se(&restricted);
        let null = (cap / n as f64).sqrt();
        assert!((m - cap).abs() < 3.0 * null, "{}: {m} +/- {se} vs {cap}", c.name());
    }
    let direct = counts(&classical_pt, 1.0, &seeds.fork(7), 10_000);
    let (m, _) = mean_and_se(&direct);
    assert!((m - cap).abs() < 3.0 * (cap / 10_000.0).sqrt());
}

#[test]
fn trace_counts_visits() {
    let (classical, palm) = setups(CompactSet::cube(3, -1, 1));
    let seeds = SeedScheme::new(5);
    let obs = Arc::new(CompactSet::cube(3, -1, 1));
    for c in [&classical as &dyn Construction, &palm] {
        let empty = c.sample(0.0, &seeds, 0).unwrap();
        let f = trace(&empty, &obs).unwrap();
        assert_eq!(f.total(), 0);
        assert!(f.vacant().iter().all(|&v| v));

        let s = (0..).map(|r| c.sample(1.0, &seeds, r).unwrap()).find(|s| s.count() == 1).unwrap();
        let f = trace(&s, &obs).unwrap();
        let pts = s.trajectories[0].segment().points();
        for (p, v) in obs.points().iter().zip(&f.visits) {
            assert_eq!(*v, pts.iter().filter(|q| *q == p).count() as u64);
        }
        assert!(f.total() >= 1);

        let big = Arc::new(CompactSet::ball(3, 400));
        assert!(matches!(trace(&s, &big), Err(Error::BoxTooLarge { .. })));
    }
}

#[test]
fn classical_paths_start_on_the_window_and_never_return_before() {
    let (classical, _) = setups(CompactSet::cube(3, 0, 1));
    let seeds = SeedScheme::new(3);
    for run in 0..300 {
        let s = sample_classical(&classical, 2.0, &seeds, run).unwrap();
        for (q, rec) in s.trajectories.iter().zip(&s.records) {
            assert_eq!(rec.anchor, q.entrance());
            let seg = q.segment();
            assert!(seg.steps_valid());
            assert!(seg.points()[..seg.origin_index()].iter().all(|p| !s.window.contains(p)));
        }
    }
}

#[test]
fn ensembles_do_not_depend_on_worker_count() {
    let (classical, palm) = setups(CompactSet::cube(3, 0, 1));
    let seeds = SeedScheme::new(123);
    for c in [&classical as &dyn Construction, &palm] {
        let mut opts = EnsembleOptions::new(2500);
        opts.keep_records = true;
        opts.reversed = true;
        opts.observation = Some(Arc::new(CompactSet::cube(3, 0, 1)));
        let a = run_ensemble(c, 1.0, &seeds, &opts).unwrap();
        opts.workers = 4;
        let b = run_ensemble(c, 1.0, &seeds, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records, b.records);
        assert_eq!(a.runs, 2500);
    }
}

//! Two-sided construction: a Poisson soup of unconditioned two-sided walks
//! anchored at every site, kept when the anchor is the path's closest point to
//! the origin and the path visits the window.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{canonicalize, CompactSet, EndStatus, LatticePoint, SiteMask, TwoSidedSegment};
use crate::sample::{check_level, poisson_count, Construction, InterlacementSample, TrajectoryRecord};
use crate::seed::{SeedScheme, StreamKey, StreamTag};
use crate::walk::{assemble, record_leg, Leg, TruncationPolicy};

const SEED_DOMAIN: u64 = 0x9A1F_7E0D;

/// Maximum number of kill-radius doublings tried for an undecided walk.
pub const MAX_ESCALATIONS: u32 = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Earliest,
    Latest,
}

/// Norm-argmin intrinsic time with a tie-break among global minimizers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntrinsicTimeRule {
    pub tie_break: TieBreak,
}

impl IntrinsicTimeRule {
    pub const EARLIEST: IntrinsicTimeRule = IntrinsicTimeRule { tie_break: TieBreak::Earliest };
    pub const LATEST: IntrinsicTimeRule = IntrinsicTimeRule { tie_break: TieBreak::Latest };

    /// Whether a point at squared norm `norm2`, before (`past`) or after time
    /// zero, displaces an anchor at squared norm `anchor2` as the minimizer.
    #[inline]
    pub fn beats_anchor(&self, past: bool, norm2: i64, anchor2: i64) -> bool {
        match (self.tie_break, past) {
            (TieBreak::Earliest, true) | (TieBreak::Latest, false) => norm2 <= anchor2,
            _ => norm2 < anchor2,
        }
    }

    /// Time of the minimal squared norm among stored points, or `None` when an
    /// unstored point could still undercut or tie it.
    pub fn argmin_time(&self, seg: &TwoSidedSegment) -> Option<i64> {
        let pts = seg.points();
        let min = pts.iter().map(LatticePoint::squared_norm).min()?;
        let certificate = seg.past_end().certificate.min(seg.future_end().certificate);
        if min >= certificate {
            return None;
        }
        let idx = match self.tie_break {
            TieBreak::Earliest => pts.iter().position(|p| p.squared_norm() == min),
            TieBreak::Latest => pts.iter().rposition(|p| p.squared_norm() == min),
        }?;
        Some(seg.time_of(idx))
    }

    /// Accept/reject for the walk anchored at time zero of `seg`.
    pub fn decide(&self, seg: &TwoSidedSegment, window: &CompactSet) -> Decision {
        let a = seg.anchor().squared_norm();
        let o = seg.origin_index();
        let pts = seg.points();
        let beaten = pts[..o].iter().any(|p| self.beats_anchor(true, p.squared_norm(), a))
            || pts[o + 1..].iter().any(|p| self.beats_anchor(false, p.squared_norm(), a));
        if beaten {
            return Decision::Reject;
        }
        if seg.past_end().certificate.min(seg.future_end().certificate) <= a {
            return Decision::Undecidable;
        }
        if seg.first_index_in(window).is_some() {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

/// Norm-argmin time with the earliest tie-break.
pub fn argmin_time(seg: &TwoSidedSegment) -> Option<i64> {
    IntrinsicTimeRule::EARLIEST.argmin_time(seg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
    Undecidable,
}

/// Anchors that can carry an accepted path: the lattice ball of squared radius `radius_bound(K)`.
pub fn candidate_sites(window: &CompactSet) -> Vec<LatticePoint> {
    if window.is_empty() {
        return Vec::new();
    }
    CompactSet::ball(window.dim(), window.radius_bound()).points().to_vec()
}

/// Result of simulating one anchored walk, after any escalation.
#[derive(Clone, Debug)]
pub struct WalkVerdict {
    pub decision: Decision,
    /// Present for accepted walks.
    pub segment: Option<TwoSidedSegment>,
    pub escalations: u32,
    pub forward_key: StreamKey,
    pub backward_key: StreamKey,
}

#[derive(Clone, Debug)]
pub struct PalmSetup {
    window: Arc<CompactSet>,
    mask: Arc<SiteMask>,
    rule: IntrinsicTimeRule,
    policy: TruncationPolicy,
    escalated: Vec<TruncationPolicy>,
    candidates: Vec<LatticePoint>,
    undecidable_limit: f64,
}

impl PalmSetup {
    pub fn new(
        window: Arc<CompactSet>,
        rule: IntrinsicTimeRule,
        policy: TruncationPolicy,
        undecidable_limit: f64,
    ) -> Result<Self> {
        if window.dim() != policy.dim() {
            return Err(Error::DimensionMismatch {
                expected: policy.dim(),
                found: window.dim(),
            });
        }
        if policy.storage_bound() < window.radius_bound() {
            return Err(Error::config("truncation", "storage ball does not contain the window"));
        }
        if !(0.0..=1.0).contains(&undecidable_limit) {
            return Err(Error::config(
                "sampling.undecidable_limit",
                format!("must lie in [0, 1], got {undecidable_limit}"),
            ));
        }
        let escalated = (1..=MAX_ESCALATIONS).map(|k| policy.escalated(k)).collect();
        Ok(PalmSetup {
            mask: Arc::new(SiteMask::new(&window)),
            candidates: candidate_sites(&window),
            window,
            rule,
            policy,
            escalated,
            undecidable_limit,
        })
    }

    pub fn rule(&self) -> IntrinsicTimeRule {
        self.rule
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    pub fn candidates(&self) -> &[LatticePoint] {
        &self.candidates
    }

    fn visits_window(&self, leg: &Leg) -> bool {
        let bound = self.window.radius_bound();
        leg.points
            .iter()
            .any(|p| p.squared_norm() <= bound && self.mask.contains(p))
    }

    /// Simulates walk `slot` anchored at `x` in run `run`, legs stopped as soon
    /// as they beat the anchor. Any site may be used, candidate or not.
    pub fn decide_walk(&self, x: LatticePoint, run: u64, slot: u64, seeds: &SeedScheme) -> WalkVerdict {
        let seeds = seeds.fork(SEED_DOMAIN);
        let forward_key = StreamKey { site: x, replicate: run, slot, tag: StreamTag::Forward };
        let backward_key = StreamKey { tag: StreamTag::Backward, ..forward_key };
        let a = x.squared_norm();
        let rule = self.rule;
        let verdict = |decision, segment, escalations| WalkVerdict {
            decision,
            segment,
            escalations,
            forward_key,
            backward_key,
        };
        for k in 0..=MAX_ESCALATIONS {
            let policy = if k == 0 { &self.policy } else { &self.escalated[k as usize - 1] };
            let backward = record_leg(x, policy, &mut seeds.rng(&backward_key), |_, n2| {
                rule.beats_anchor(true, n2, a)
            });
            if backward.end.status == EndStatus::Aborted {
                return verdict(Decision::Reject, None, k);
            }
            let forward = record_leg(x, policy, &mut seeds.rng(&forward_key), |_, n2| {
                rule.beats_anchor(false, n2, a)
            });
            if forward.end.status == EndStatus::Aborted {
                return verdict(Decision::Reject, None, k);
            }
            if backward.escaped() && forward.escaped() {
                let hit =
                    self.mask.contains(&x) || self.visits_window(&backward) || self.visits_window(&forward);
                if !hit {
                    return verdict(Decision::Reject, None, k);
                }
                let seg = assemble(x, backward, forward);
                debug_assert_eq!(rule.decide(&seg, &self.window), Decision::Accept);
                return verdict(Decision::Accept, Some(seg), k);
            }
        }
        verdict(Decision::Undecidable, None, MAX_ESCALATIONS)
    }
}

/// One realization of the two-sided construction at level `level`.
pub fn sample_palm(setup: &PalmSetup, level: f64, seeds: &SeedScheme, run: u64) -> Result<InterlacementSample> {
    check_level(level)?;
    let counts = seeds.fork(SEED_DOMAIN);
    let mut sample = InterlacementSample {
        construction: Construction::name(setup).to_string(),
        level,
        master_seed: counts.master_seed,
        run,
        window: Arc::clone(&setup.window),
        exact_region: Arc::clone(setup.policy.storage_ball()),
        trajectories: Vec::new(),
        records: Vec::new(),
        launched: 0,
        undecidable: 0,
    };
    for &x in &setup.candidates {
        let count_key = StreamKey { site: x, replicate: run, slot: 0, tag: StreamTag::Count };
        let n = poisson_count(level, &mut counts.rng(&count_key));
        sample.launched += n;
        for j in 0..n {
            let v = setup.decide_walk(x, run, j, seeds);
            match v.decision {
                Decision::Accept => {
                    let seg = v.segment.expect("accepted walks carry their segment");
                    let q = canonicalize(&seg, &setup.window)?;
                    sample.records.push(TrajectoryRecord {
                        anchor: x,
                        entrance: q.entrance(),
                        streams: vec![count_key, v.forward_key, v.backward_key],
                        certificate: seg.past_end().certificate.min(seg.future_end().certificate),
                        past_status: seg.past_end().status,
                        future_status: seg.future_end().status,
                        escalations: v.escalations,
                    });
                    sample.trajectories.push(q);
                }
                Decision::Reject => {}
                Decision::Undecidable => sample.undecidable += 1,
            }
        }
    }
    if sample.undecidable > 0
        && sample.undecidable as f64 > setup.undecidable_limit * sample.launched as f64
    {
        return Err(Error::UndecidableRate {
            undecidable: sample.undecidable,
            total: sample.launched,
            limit: setup.undecidable_limit,
        });
    }
    Ok(sample)
}

impl Construction for PalmSetup {
    fn name(&self) -> &str {
        match self.rule.tie_break {
            TieBreak::Earliest => "two_sided",
            TieBreak::Latest => "two_sided_latest",
        }
    }

    fn window(&self) -> &Arc<CompactSet> {
        &self.window
    }

    fn exact_region(&self) -> &Arc<CompactSet> {
        self.policy.storage_ball()
    }

    fn sample(&self, level: f64, seeds: &SeedScheme, run: u64) -> Result<InterlacementSample> {
        sample_palm(self, level, seeds, run)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LegEnd;

    fn p(c: &[i32]) -> LatticePoint {
        LatticePoint::new(c)
    }

    fn ray(x0: i32, n: i32) -> Vec<LatticePoint> {
        (1..=n).map(|t| p(&[x0 + t, 0, 0])).collect()
    }

    #[test]
    fn unique_minimizer_at_anchor_and_shift() {
        let seg = TwoSidedSegment::from_legs(p(&[2, 0, 0]), &ray(2, 10), &ray(2, 10)).unwrap();
        assert_eq!(argmin_time(&seg), Some(0));
        assert_eq!(argmin_time(&seg.shift(5).unwrap()), Some(-5));
        assert_eq!(argmin_time(&seg.shift(-3).unwrap()), Some(3));
    }

    fn two_minima() -> TwoSidedSegment {
        let fwd = [
            [1, 1, 0], [1, 0, 0], [1, 1, 0], [1, 2, 0], [0, 2, 0], [0, 2, 1], [0, 1, 1], [0, 1, 0],
            [0, 1, -1], [0, 1, -2], [0, 1, -3],
        ];
        let fwd: Vec<_> = fwd.iter().map(|c| p(c)).collect();
        let bwd = vec![p(&[1, 1, 2]), p(&[1, 1, 3])];
        TwoSidedSegment::from_legs(p(&[1, 1, 1]), &fwd, &bwd).unwrap()
    }

    #[test]
    fn ties_follow_the_rule() {
        let seg = two_minima();
        assert_eq!(IntrinsicTimeRule::EARLIEST.argmin_time(&seg), Some(2));
        assert_eq!(IntrinsicTimeRule::LATEST.argmin_time(&seg), Some(8));
        let k = CompactSet::from_points(3, [p(&[0, 1, 0])]).unwrap();
        let at2 = seg.shift(2).unwrap();
        let at8 = seg.shift(8).unwrap();
        assert_eq!(IntrinsicTimeRule::EARLIEST.decide(&at2, &k), Decision::Accept);
        assert_eq!(IntrinsicTimeRule::EARLIEST.decide(&at8, &k), Decision::Reject);
        assert_eq!(IntrinsicTimeRule::LATEST.decide(&at8, &k), Decision::Accept);
        assert_eq!(IntrinsicTimeRule::LATEST.decide(&at2, &k), Decision::Reject);
    }

    #[test]
    fn short_certificates_are_undecidable() {
        let short = LegEnd {
            status: EndStatus::Escaped,
            certificate: 4,
            exit_norm2: 144,
        };
        let seg = TwoSidedSegment::from_legs(p(&[2, 0, 0]), &ray(2, 3), &ray(2, 3)).unwrap();
        let parts = TwoSidedSegment::new(seg.points().to_vec(), seg.origin_index(), vec![], short, LegEnd::complete())
            .unwrap();
        assert_eq!(argmin_time(&parts), None);
        let k = CompactSet::from_points(3, [p(&[3, 0, 0])]).unwrap();
        assert_eq!(IntrinsicTimeRule::EARLIEST.decide(&parts, &k), Decision::Undecidable);
    }

    #[test]
    fn candidates_are_lattice_balls() {
        let origin = CompactSet::from_points(3, [LatticePoint::origin(3)]).unwrap();
        assert_eq!(candidate_sites(&origin), vec![LatticePoint::origin(3)]);
        let far = CompactSet::from_points(3, [p(&[3, 0, 0])]).unwrap();
        let mut brute = 0;
        for x in -3..=3i32 {
            for y in -3..=3i32 {
                for z in -3..=3i32 {
                    if x * x + y * y + z * z <= 9 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(brute, 123);
        assert_eq!(candidate_sites(&far).len(), brute);
        assert!(candidate_sites(&CompactSet::empty(3)).is_empty());
    }
}

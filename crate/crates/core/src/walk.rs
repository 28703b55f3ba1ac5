//! Simple random walks, Doob-conditioned walks and two-sided walks, with
//! escape handling at a truncation radius.
//!
//! All walks live relative to a *storage ball* `B = {|x|^2 <= rho}` centered at
//! the origin. A walk that reaches the kill radius either stops (hard kill) or,
//! in Bernoulli-escape mode, returns to `B` with the solver-derived probability
//! `q` and is re-injected at a point of `B` drawn from its harmonic measure from
//! infinity. The unstored excursion shows up as a gap in the stored path.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{CompactSet, EndStatus, LatticePoint, LegEnd, TwoSidedSegment};
use crate::potential::{green_asymptotic_constant, solve_window, PotentialField, SolverParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    HardKill,
    #[default]
    BernoulliEscape,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyParams {
    /// Defaults to [`TruncationPolicy::default_kill_radius`] of the storage ball.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kill_radius: Option<u32>,
    pub mode: TruncationMode,
    pub step_budget: u64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            kill_radius: None,
            mode: TruncationMode::BernoulliEscape,
            step_budget: 10_000_000,
        }
    }
}

/// Return probabilities `q(r)` to the storage ball from radius `r`.
#[derive(Clone, Debug)]
pub struct EscapeTable {
    dim: usize,
    ball_norm2: i64,
    shells: Vec<f64>,
    tail_coeff: f64,
}

impl EscapeTable {
    /// Shell averages of `1 - h` from the solved field, corrected for returns
    /// from beyond the solver boundary; Green-function asymptotics past the table.
    pub fn from_field(field: &PotentialField, capacity: f64) -> Self {
        let dim = field.dim();
        let ball_norm2 = field.target().radius_bound();
        let tail_coeff = capacity * green_asymptotic_constant(dim);
        let outer = field.radius() as f64;
        let q_boundary = (tail_coeff * outer.powi(2 - dim as i32)).min(1.0);

        let n = field.radius() as usize;
        let mut sum = vec![0.0; n + 1];
        let mut cnt = vec![0usize; n + 1];
        for (p, h) in field.sites() {
            let r = (p.squared_norm() as f64).sqrt().floor() as usize;
            sum[r] += (1.0 - h) + h * q_boundary;
            cnt[r] += 1;
        }
        let mut shells = Vec::with_capacity(n + 1);
        let mut prev = 1.0f64;
        for r in 0..=n {
            let v = if (r as i64) * (r as i64) <= ball_norm2 {
                1.0
            } else if cnt[r] > 0 {
                sum[r] / cnt[r] as f64
            } else {
                tail_coeff * (r as f64).powi(2 - dim as i32)
            };
            prev = prev.min(v.clamp(0.0, 1.0));
            shells.push(prev);
        }
        EscapeTable {
            dim,
            ball_norm2,
            shells,
            tail_coeff,
        }
    }

    /// Probability that a walk at squared norm `norm2` ever enters the storage ball.
    pub fn q(&self, norm2: i64) -> f64 {
        if norm2 <= self.ball_norm2 {
            return 1.0;
        }
        let r = (norm2 as f64).sqrt();
        let idx = r.floor() as usize;
        let last = *self.shells.last().unwrap_or(&1.0);
        if idx < self.shells.len() {
            self.shells[idx]
        } else {
            (self.tail_coeff * r.powi(2 - self.dim as i32)).min(last)
        }
    }

    pub fn shells(&self) -> &[f64] {
        &self.shells
    }
}

#[derive(Clone, Debug)]
struct Reentry {
    points: Vec<LatticePoint>,
    dist: Option<WeightedIndex<f64>>,
}

impl Reentry {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticePoint {
        let dist = self.dist.as_ref().expect("non-empty storage ball");
        self.points[dist.sample(rng)]
    }
}

/// How walks are stopped or continued at the truncation radius.
#[derive(Clone, Debug)]
pub struct TruncationPolicy {
    dim: usize,
    kill_radius: u32,
    kill_norm2: i64,
    mode: TruncationMode,
    ball: Arc<CompactSet>,
    table: Arc<EscapeTable>,
    reentry: Arc<Reentry>,
    step_budget: u64,
}

impl TruncationPolicy {
    pub fn default_kill_radius(ball_norm2: i64) -> u32 {
        let r = (ball_norm2.max(0) as f64).sqrt().ceil() as u32;
        (4 + 8 * r).max(12)
    }

    /// Solves the storage-ball potential problem and tabulates `q` and the re-entry law.
    pub fn build(
        dim: usize,
        ball_norm2: i64,
        params: &PolicyParams,
        solver: &SolverParams,
    ) -> Result<Self> {
        let ball = Arc::new(CompactSet::ball(dim, ball_norm2));
        let ball_radius = (ball_norm2.max(0) as f64).sqrt();
        let kill_radius = params
            .kill_radius
            .unwrap_or_else(|| Self::default_kill_radius(ball_norm2));
        if (kill_radius as f64) < ball_radius + 2.0 {
            return Err(Error::config(
                "truncation.kill_radius",
                format!("{kill_radius} does not clear the storage ball of radius {ball_radius:.2}"),
            ));
        }
        if params.step_budget == 0 {
            return Err(Error::config("truncation.step_budget", "must be positive"));
        }
        let min_radius = 2 * ball_radius.ceil() as u32 + 4;
        let solver = solver.with_radius(solver.radius.max(min_radius));
        let sol = solve_window(&ball, &solver)?;
        let table = EscapeTable::from_field(&sol.field, sol.capacity());
        let weights = sol.measure.weights.clone();
        let dist = WeightedIndex::new(&weights).ok();
        Ok(TruncationPolicy {
            dim,
            kill_radius,
            kill_norm2: kill_radius as i64 * kill_radius as i64,
            mode: params.mode,
            ball,
            table: Arc::new(table),
            reentry: Arc::new(Reentry {
                points: sol.measure.points.clone(),
                dist,
            }),
            step_budget: params.step_budget,
        })
    }

    /// Policy whose storage ball covers both the window and an optional observation set.
    pub fn for_window(
        window: &CompactSet,
        observation: Option<&CompactSet>,
        params: &PolicyParams,
        solver: &SolverParams,
    ) -> Result<Self> {
        let bound = window
            .radius_bound()
            .max(observation.map_or(0, |o| o.radius_bound()));
        Self::build(window.dim(), bound, params, solver)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kill_radius(&self) -> u32 {
        self.kill_radius
    }

    pub fn mode(&self) -> TruncationMode {
        self.mode
    }

    pub fn step_budget(&self) -> u64 {
        self.step_budget
    }

    pub fn table(&self) -> &EscapeTable {
        &self.table
    }

    /// Squared radius of the storage ball; paths are exact inside it.
    pub fn storage_bound(&self) -> i64 {
        self.ball.radius_bound()
    }

    pub fn storage_ball(&self) -> &Arc<CompactSet> {
        &self.ball
    }

    /// Same policy with kill radius and step budget multiplied by `2^k`.
    pub fn escalated(&self, k: u32) -> Self {
        let mut p = self.clone();
        p.kill_radius = self.kill_radius << k;
        p.kill_norm2 = p.kill_radius as i64 * p.kill_radius as i64;
        p.step_budget = self.step_budget.saturating_mul(1 << k);
        p
    }

    pub fn with_mode(&self, mode: TruncationMode) -> Self {
        TruncationPolicy {
            mode,
            ..self.clone()
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "{:?} kill_radius={} storage_bound={} step_budget={}",
            self.mode,
            self.kill_radius,
            self.storage_bound(),
            self.step_budget
        )
    }

    fn escaped_end(&self, exit_norm2: i64) -> LegEnd {
        LegEnd {
            status: EndStatus::Escaped,
            certificate: self.storage_bound() + 1,
            exit_norm2,
        }
    }
}

/// What a visitor wants after seeing a new position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Flow {
    Continue,
    Stop,
}

pub(crate) trait Visitor {
    /// `jumped` is true when `p` was reached by re-injection rather than a unit step.
    fn visit(&mut self, p: &LatticePoint, norm2: i64, jumped: bool) -> Flow;
}

/// Runs a plain walk from `start` (not visited) until the visitor stops it,
/// the policy declares escape, or the budget runs out.
pub(crate) fn drive<R: Rng + ?Sized, V: Visitor>(
    start: LatticePoint,
    policy: &TruncationPolicy,
    rng: &mut R,
    visitor: &mut V,
) -> LegEnd {
    let mut pos = start;
    let mut n2 = start.squared_norm();
    let ndir = 2 * policy.dim;
    let mut steps = 0u64;
    loop {
        if steps == policy.step_budget {
            return LegEnd {
                status: EndStatus::Budget,
                certificate: 0,
                exit_norm2: n2,
            };
        }
        steps += 1;
        let dir = rng.random_range(0..ndir);
        let c = &mut pos.coords_mut()[dir >> 1];
        if dir & 1 == 0 {
            n2 += 2 * *c as i64 + 1;
            *c += 1;
        } else {
            n2 += 1 - 2 * *c as i64;
            *c -= 1;
        }
        if visitor.visit(&pos, n2, false) == Flow::Stop {
            return aborted(n2);
        }
        if n2 >= policy.kill_norm2 {
            match policy.mode {
                TruncationMode::HardKill => return policy.escaped_end(n2),
                TruncationMode::BernoulliEscape => {
                    if rng.random::<f64>() < policy.table.q(n2) {
                        pos = policy.reentry.sample(rng);
                        n2 = pos.squared_norm();
                        if visitor.visit(&pos, n2, true) == Flow::Stop {
                            return aborted(n2);
                        }
                    } else {
                        return policy.escaped_end(n2);
                    }
                }
            }
        }
    }
}

fn aborted(n2: i64) -> LegEnd {
    LegEnd {
        status: EndStatus::Aborted,
        certificate: 0,
        exit_norm2: n2,
    }
}

/// A one-sided stored walk; `points[0]` is the first point after the start.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Leg {
    pub points: Vec<LatticePoint>,
    /// Indices `i` where `points[i]` was reached by re-injection.
    pub gaps: Vec<usize>,
    pub end: LegEnd,
}

impl Leg {
    pub fn escaped(&self) -> bool {
        self.end.status == EndStatus::Escaped
    }
}

struct Recorder<F> {
    points: Vec<LatticePoint>,
    gaps: Vec<usize>,
    stop: F,
}

impl<F: FnMut(&LatticePoint, i64) -> bool> Visitor for Recorder<F> {
    #[inline]
    fn visit(&mut self, p: &LatticePoint, norm2: i64, jumped: bool) -> Flow {
        if jumped {
            self.gaps.push(self.points.len());
        }
        self.points.push(*p);
        if (self.stop)(p, norm2) {
            Flow::Stop
        } else {
            Flow::Continue
        }
    }
}

/// Records a plain walk; `stop(p, |p|^2)` returning true aborts it.
pub(crate) fn record_leg<R, F>(start: LatticePoint, policy: &TruncationPolicy, rng: &mut R, stop: F) -> Leg
where
    R: Rng + ?Sized,
    F: FnMut(&LatticePoint, i64) -> bool,
{
    let mut rec = Recorder {
        points: Vec::new(),
        gaps: Vec::new(),
        stop,
    };
    let end = drive(start, policy, rng, &mut rec);
    Leg {
        points: rec.points,
        gaps: rec.gaps,
        end,
    }
}

/// Unconditioned simple random walk from `x` until escape is declared.
pub fn sample_forward<R: Rng + ?Sized>(x: LatticePoint, policy: &TruncationPolicy, rng: &mut R) -> Leg {
    record_leg(x, policy, rng, |_, _| false)
}

/// Outcome of a walk watched for its first visit to a set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HitOutcome {
    Hit(LatticePoint),
    Escaped,
    Budget,
}

struct HitWatch<'a> {
    mask: &'a crate::lattice::SiteMask,
    bound: i64,
    hit: Option<LatticePoint>,
}

impl Visitor for HitWatch<'_> {
    #[inline]
    fn visit(&mut self, p: &LatticePoint, norm2: i64, _jumped: bool) -> Flow {
        if norm2 <= self.bound && self.mask.contains(p) {
            self.hit = Some(*p);
            Flow::Stop
        } else {
            Flow::Continue
        }
    }
}

/// Walks from `start` (checked first) until the first visit to `target`, without storing the path.
pub fn walk_until_hit<R: Rng + ?Sized>(
    start: LatticePoint,
    target: &CompactSet,
    mask: &crate::lattice::SiteMask,
    policy: &TruncationPolicy,
    rng: &mut R,
) -> HitOutcome {
    if target.contains(&start) {
        return HitOutcome::Hit(start);
    }
    let mut w = HitWatch {
        mask,
        bound: target.radius_bound(),
        hit: None,
    };
    let end = drive(start, policy, rng, &mut w);
    match (w.hit, end.status) {
        (Some(p), _) => HitOutcome::Hit(p),
        (None, EndStatus::Budget) => HitOutcome::Budget,
        _ => HitOutcome::Escaped,
    }
}

/// `sum_z h(z) / (2d h(x))` over the neighbors of `x`: the row sum of the
/// h-transformed kernel, 1 up to solver tolerance where `h` is harmonic.
pub fn htransform_row_sum(field: &PotentialField, x: &LatticePoint) -> f64 {
    let hx = field.value(x);
    let s: f64 = x.neighbors().map(|z| field.value(&z)).sum();
    s / ((2 * field.dim()) as f64 * hx)
}

/// Walk from `y in K` conditioned never to return to `K`: first step with
/// weights `h(z)`, then the Doob transform `p(x,z) = h(z) / (2d h(x))`, run
/// until it leaves the solver domain.
pub fn sample_conditioned_avoiding<R: Rng + ?Sized>(
    window: &CompactSet,
    y: LatticePoint,
    field: &PotentialField,
    policy: &TruncationPolicy,
    rng: &mut R,
) -> Result<Leg> {
    if field.target().as_ref() != window {
        return Err(Error::FieldMismatch);
    }
    if !window.contains(&y) {
        return Err(Error::config("start", format!("{y:?} is not in the window")));
    }
    let ndir = 2 * window.dim();
    let mut weights = [0.0f64; 2 * crate::lattice::MAX_DIM];
    let mut points = Vec::new();
    let mut pos = y;
    let mut steps = 0u64;
    loop {
        if steps == policy.step_budget {
            let n2 = pos.squared_norm();
            return Ok(Leg {
                points,
                gaps: Vec::new(),
                end: LegEnd {
                    status: EndStatus::Budget,
                    certificate: 0,
                    exit_norm2: n2,
                },
            });
        }
        steps += 1;
        let mut total = 0.0;
        for (dir, w) in weights[..ndir].iter_mut().enumerate() {
            *w = field.value(&pos.neighbor(dir));
            total += *w;
        }
        if total <= 0.0 {
            return Err(Error::Trapped(pos));
        }
        let mut u = rng.random::<f64>() * total;
        let mut dir = ndir - 1;
        for (d, &w) in weights[..ndir].iter().enumerate() {
            if u < w {
                dir = d;
                break;
            }
            u -= w;
        }
        // guard against rounding landing on a zero-weight direction
        while weights[dir] == 0.0 {
            dir -= 1;
        }
        pos = pos.neighbor(dir);
        points.push(pos);
        if !field.in_domain(&pos) {
            return Ok(Leg {
                points,
                gaps: Vec::new(),
                end: LegEnd {
                    status: EndStatus::Escaped,
                    certificate: 0,
                    exit_norm2: pos.squared_norm(),
                },
            });
        }
    }
}

/// Joins a backward and a forward leg at `anchor`.
pub fn assemble(anchor: LatticePoint, backward: Leg, forward: Leg) -> TwoSidedSegment {
    let nb = backward.points.len();
    let mut points = Vec::with_capacity(nb + 1 + forward.points.len());
    points.extend(backward.points.iter().rev().copied());
    points.push(anchor);
    points.extend_from_slice(&forward.points);
    // backward re-injection at leg index j separates time-order indices nb-1-j and nb-j
    let mut gaps: Vec<usize> = backward.gaps.iter().rev().map(|&j| nb - j).collect();
    gaps.extend(forward.gaps.iter().map(|&j| nb + 1 + j));
    TwoSidedSegment::from_parts(points, nb, gaps, backward.end, forward.end)
}

/// Two independent plain walks from `x`, one per time direction.
pub fn sample_two_sided<R: Rng + ?Sized>(
    x: LatticePoint,
    policy: &TruncationPolicy,
    forward_rng: &mut R,
    backward_rng: &mut R,
) -> TwoSidedSegment {
    let backward = sample_forward(x, policy, backward_rng);
    let forward = sample_forward(x, policy, forward_rng);
    assemble(x, backward, forward)
}

/// First point of `path` at squared distance greater than `radius2` from `center`,
/// returned as a displacement from `center`.
pub fn first_exit<'a>(
    path: impl IntoIterator<Item = &'a LatticePoint>,
    center: &LatticePoint,
    radius2: i64,
) -> Option<LatticePoint> {
    path.into_iter()
        .map(|p| p.difference(center))
        .find(|d| d.squared_norm() > radius2)
}

/// Bin of a displacement by its dominant axis and sign: `2 * axis + (negative as usize)`.
pub fn direction_bin(disp: &LatticePoint) -> usize {
    let (axis, c) = disp
        .coords()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
        .map(|(a, &c)| (a, c))
        .unwrap_or((0, 0));
    2 * axis + usize::from(c < 0)
}

/// Stored points of a segment from time zero onward.
pub fn from_time_zero(seg: &TwoSidedSegment) -> impl Iterator<Item = &LatticePoint> {
    seg.points()[seg.origin_index()..].iter()
}

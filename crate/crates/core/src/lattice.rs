//! Lattice points, finite windows and stored two-sided path segments.
//!
//! Paths are bi-infinite in principle but only the part near the window is
//! ever stored. A [`TwoSidedSegment`] keeps its points in time order together
//! with the index of time zero, so that time shifts, re-anchoring and time
//! reversal are all index arithmetic. Unstored excursions beyond the
//! truncation radius that later came back are recorded as *gaps*: the stored
//! clock counts stored points only, which is enough for every statistic that
//! depends on the order of visits rather than on elapsed time.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 6;

/// A point of Z^d, `3 <= d <= MAX_DIM` for simulation purposes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint {
    dim: u8,
    coords: [i32; MAX_DIM],
}

impl LatticePoint {
    /// Panics if `coords.len()` is zero or exceeds [`MAX_DIM`].
    pub fn new(coords: &[i32]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "lattice dimension {} outside 1..={MAX_DIM}",
            coords.len()
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        LatticePoint {
            dim: coords.len() as u8,
            coords: c,
        }
    }

    pub fn origin(dim: usize) -> Self {
        Self::new(&vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut p = Self::origin(dim);
        p.coords[axis] = 1;
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim()]
    }

    #[inline]
    pub fn squared_norm(&self) -> i64 {
        self.coords().iter().map(|&c| c as i64 * c as i64).sum()
    }

    /// Neighbor in direction `dir in 0..2d`: axis `dir / 2`, positive when `dir` is even.
    #[inline]
    pub fn neighbor(&self, dir: usize) -> Self {
        let mut p = *self;
        p.coords[dir >> 1] += if dir & 1 == 0 { 1 } else { -1 };
        p
    }

    pub fn neighbors(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..2 * self.dim()).map(move |dir| self.neighbor(dir))
    }

    /// True when the two points differ by one unit step in exactly one coordinate.
    pub fn is_adjacent(&self, other: &LatticePoint) -> bool {
        self.dim == other.dim
            && self
                .coords()
                .iter()
                .zip(other.coords())
                .map(|(a, b)| (a - b).unsigned_abs())
                .sum::<u32>()
                == 1
    }

    pub fn offset(&self, other: &LatticePoint) -> LatticePoint {
        let mut p = *self;
        for (a, b) in p.coords.iter_mut().zip(other.coords.iter()) {
            *a += b;
        }
        p
    }

    pub fn difference(&self, other: &LatticePoint) -> LatticePoint {
        let mut p = *self;
        for (a, b) in p.coords.iter_mut().zip(other.coords.iter()) {
            *a -= b;
        }
        p
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [i32] {
        let d = self.dim();
        &mut self.coords[..d]
    }
}

/// Exact squared Euclidean norm.
pub fn squared_norm(p: &LatticePoint) -> i64 {
    p.squared_norm()
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for LatticePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i32>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "point dimension {} outside 1..={MAX_DIM}",
                v.len()
            )));
        }
        Ok(LatticePoint::new(&v))
    }
}

/// A finite set of lattice points.
#[derive(Clone, PartialEq, Eq)]
pub struct CompactSet {
    dim: usize,
    points: Vec<LatticePoint>,
    members: HashSet<LatticePoint>,
    radius_bound: i64,
}

impl CompactSet {
    pub fn empty(dim: usize) -> Self {
        CompactSet {
            dim,
            points: Vec::new(),
            members: HashSet::new(),
            radius_bound: 0,
        }
    }

    /// Duplicates are dropped; points are kept in sorted order.
    pub fn from_points(dim: usize, points: impl IntoIterator<Item = LatticePoint>) -> Result<Self> {
        let mut pts: Vec<LatticePoint> = points.into_iter().collect();
        if let Some(p) = pts.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        pts.sort_unstable();
        pts.dedup();
        let radius_bound = pts.iter().map(|p| p.squared_norm()).max().unwrap_or(0);
        let members = pts.iter().copied().collect();
        Ok(CompactSet {
            dim,
            points: pts,
            members,
            radius_bound,
        })
    }

    /// All points whose coordinates lie in `[lo, hi]` (per coordinate).
    pub fn cuboid(lo: &LatticePoint, hi: &LatticePoint) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch {
                expected: lo.dim(),
                found: hi.dim(),
            });
        }
        let dim = lo.dim();
        let mut out = Vec::new();
        if lo.coords().iter().zip(hi.coords()).all(|(a, b)| a <= b) {
            let mut cur = *lo;
            'outer: loop {
                out.push(cur);
                for axis in 0..dim {
                    if cur.coords[axis] < hi.coords[axis] {
                        cur.coords[axis] += 1;
                        continue 'outer;
                    }
                    cur.coords[axis] = lo.coords[axis];
                }
                break;
            }
        }
        Self::from_points(dim, out)
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: i32, hi: i32) -> Self {
        Self::cuboid(&LatticePoint::new(&vec![lo; dim]), &LatticePoint::new(&vec![hi; dim]))
            .expect("same dimension")
    }

    /// All points with squared norm at most `radius2`.
    pub fn ball(dim: usize, radius2: i64) -> Self {
        if radius2 < 0 {
            return Self::empty(dim);
        }
        let r = (radius2 as f64).sqrt().floor() as i32 + 1;
        let pts = Self::cube(dim, -r, r)
            .points
            .into_iter()
            .filter(|p| p.squared_norm() <= radius2);
        Self::from_points(dim, pts).expect("same dimension")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.members.contains(p)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points in sorted order.
    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    /// Maximum squared norm over the set (0 for the empty set).
    pub fn radius_bound(&self) -> i64 {
        self.radius_bound
    }

    pub fn is_subset(&self, other: &CompactSet) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    pub fn union(&self, other: &CompactSet) -> Result<CompactSet> {
        Self::from_points(
            self.dim,
            self.points.iter().chain(other.points.iter()).copied(),
        )
    }

    /// Index of `p` in [`points`](Self::points).
    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        self.points.binary_search(p).ok()
    }

    /// Short content hash, stable across runs.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for p in &self.points {
            for c in p.coords() {
                h.update(c.to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..6])
    }
}

impl fmt::Debug for CompactSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompactSet")
            .field("dim", &self.dim)
            .field("points", &self.points)
            .finish()
    }
}

/// Dense membership table over the cube `[-w, w]^d` for hot loops.
#[derive(Clone, Debug)]
pub struct SiteMask {
    dim: usize,
    half_width: i32,
    side: usize,
    bits: Vec<bool>,
}

impl SiteMask {
    pub fn new(set: &CompactSet) -> Self {
        let dim = set.dim();
        let half_width = set
            .points()
            .iter()
            .flat_map(|p| p.coords().iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0);
        let side = (2 * half_width + 1) as usize;
        let mut mask = SiteMask {
            dim,
            half_width,
            side,
            bits: vec![false; side.pow(dim as u32)],
        };
        for p in set.points() {
            let i = mask.index(p).expect("inside cube");
            mask.bits[i] = true;
        }
        mask
    }

    #[inline]
    fn index(&self, p: &LatticePoint) -> Option<usize> {
        let mut idx = 0usize;
        for &c in p.coords() {
            if c.abs() > self.half_width {
                return None;
            }
            idx = idx * self.side + (c + self.half_width) as usize;
        }
        Some(idx)
    }

    #[inline]
    pub fn contains(&self, p: &LatticePoint) -> bool {
        debug_assert_eq!(p.dim(), self.dim);
        self.index(p).is_some_and(|i| self.bits[i])
    }
}

/// How the simulation of one end of a segment stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndStatus {
    /// Reached the truncation radius and was declared escaped by the policy.
    Escaped,
    /// Ran out of its step budget before escaping.
    Budget,
    /// Stopped early because the outcome of interest was already decided.
    Aborted,
    /// Hand-built or otherwise complete: nothing beyond the stored points.
    Complete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegEnd {
    pub status: EndStatus,
    /// Every unstored point beyond this end has squared norm at least this.
    pub certificate: i64,
    /// Squared norm of the last stored point on this end.
    pub exit_norm2: i64,
}

impl LegEnd {
    pub fn complete() -> Self {
        LegEnd {
            status: EndStatus::Complete,
            certificate: i64::MAX,
            exit_norm2: 0,
        }
    }

    /// True when the end reached the truncation radius.
    pub fn truncated(&self) -> bool {
        self.status == EndStatus::Escaped
    }
}

/// A stored window of a two-sided nearest-neighbor path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoSidedSegment {
    points: Vec<LatticePoint>,
    origin: usize,
    gaps: Vec<usize>,
    past: LegEnd,
    future: LegEnd,
}

impl TwoSidedSegment {
    /// Checks the nearest-neighbor invariant everywhere except at `gaps`.
    pub fn new(
        points: Vec<LatticePoint>,
        origin: usize,
        mut gaps: Vec<usize>,
        past: LegEnd,
        future: LegEnd,
    ) -> Result<Self> {
        if origin >= points.len() {
            return Err(Error::config("origin", "time-zero index outside the stored points"));
        }
        gaps.sort_unstable();
        gaps.dedup();
        if gaps.iter().any(|&g| g == 0 || g >= points.len()) {
            return Err(Error::config("gaps", "gap index outside 1..len"));
        }
        let dim = points[0].dim();
        let mut gi = 0;
        for i in 1..points.len() {
            if points[i].dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: points[i].dim(),
                });
            }
            if gi < gaps.len() && gaps[gi] == i {
                gi += 1;
                continue;
            }
            if !points[i - 1].is_adjacent(&points[i]) {
                return Err(Error::config(
                    "points",
                    format!("{:?} -> {:?} is not a unit step", points[i - 1], points[i]),
                ));
            }
        }
        Ok(TwoSidedSegment {
            points,
            origin,
            gaps,
            past,
            future,
        })
    }

    /// Builds a segment from an anchor and its two legs; `backward[i]` sits at time `-(i+1)`.
    pub fn from_legs(
        anchor: LatticePoint,
        forward: &[LatticePoint],
        backward: &[LatticePoint],
    ) -> Result<Self> {
        let mut points = Vec::with_capacity(forward.len() + backward.len() + 1);
        points.extend(backward.iter().rev().copied());
        points.push(anchor);
        points.extend_from_slice(forward);
        Self::new(
            points,
            backward.len(),
            Vec::new(),
            LegEnd::complete(),
            LegEnd::complete(),
        )
    }

    /// Unchecked assembly used by the samplers, which produce valid steps by construction.
    pub(crate) fn from_parts(
        points: Vec<LatticePoint>,
        origin: usize,
        gaps: Vec<usize>,
        past: LegEnd,
        future: LegEnd,
    ) -> Self {
        debug_assert!(origin < points.len());
        TwoSidedSegment {
            points,
            origin,
            gaps,
            past,
            future,
        }
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn anchor(&self) -> LatticePoint {
        self.points[self.origin]
    }

    /// Points at times 1, 2, ...
    pub fn forward(&self) -> &[LatticePoint] {
        &self.points[self.origin + 1..]
    }

    /// Points at times -1, -2, ...
    pub fn backward(&self) -> impl Iterator<Item = &LatticePoint> {
        self.points[..self.origin].iter().rev()
    }

    /// All stored points in time order.
    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    /// Index of time zero within [`points`](Self::points).
    pub fn origin_index(&self) -> usize {
        self.origin
    }

    /// Indices `i` where `points[i - 1] -> points[i]` skips an unstored excursion.
    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }

    pub fn past_end(&self) -> &LegEnd {
        &self.past
    }

    pub fn future_end(&self) -> &LegEnd {
        &self.future
    }

    pub fn forward_truncated(&self) -> bool {
        self.future.truncated()
    }

    pub fn backward_truncated(&self) -> bool {
        self.past.truncated()
    }

    /// Stored time of `points[index]`.
    #[inline]
    pub fn time_of(&self, index: usize) -> i64 {
        index as i64 - self.origin as i64
    }

    /// Earliest and latest stored times.
    pub fn time_range(&self) -> (i64, i64) {
        (self.time_of(0), self.time_of(self.points.len() - 1))
    }

    pub fn at(&self, t: i64) -> Option<LatticePoint> {
        let i = self.origin as i64 + t;
        (0..self.points.len() as i64)
            .contains(&i)
            .then(|| self.points[i as usize])
    }

    /// The shifted path `s -> ω(s + t)`; `None` when time `t` is not stored.
    pub fn shift(&self, t: i64) -> Option<TwoSidedSegment> {
        let i = self.origin as i64 + t;
        if !(0..self.points.len() as i64).contains(&i) {
            return None;
        }
        let mut s = self.clone();
        s.origin = i as usize;
        Some(s)
    }

    /// Index of the first stored point inside `set`.
    pub fn first_index_in(&self, set: &CompactSet) -> Option<usize> {
        self.points.iter().position(|p| set.contains(p))
    }

    /// True when every stored step not marked as a gap is a unit step.
    pub fn steps_valid(&self) -> bool {
        let mut gi = 0;
        for i in 1..self.points.len() {
            if gi < self.gaps.len() && self.gaps[gi] == i {
                gi += 1;
                continue;
            }
            if !self.points[i - 1].is_adjacent(&self.points[i]) {
                return false;
            }
        }
        true
    }

    /// Contiguous runs of stored points between gaps.
    pub fn pieces(&self) -> impl Iterator<Item = &[LatticePoint]> {
        let mut bounds = Vec::with_capacity(self.gaps.len() + 2);
        bounds.push(0);
        bounds.extend_from_slice(&self.gaps);
        bounds.push(self.points.len());
        let pts = &self.points;
        (0..bounds.len() - 1).map(move |k| &pts[bounds[k]..bounds[k + 1]])
    }
}

/// Time reversal: `t -> ω(-t)`.
pub fn reverse(seg: &TwoSidedSegment) -> TwoSidedSegment {
    let n = seg.points.len();
    let mut points = seg.points.clone();
    points.reverse();
    let mut gaps: Vec<usize> = seg.gaps.iter().map(|&g| n - g).collect();
    gaps.reverse();
    TwoSidedSegment {
        points,
        origin: n - 1 - seg.origin,
        gaps,
        past: seg.future,
        future: seg.past,
    }
}

/// A segment re-anchored at its first entrance into `window`: a representative
/// of the path's class modulo time shift.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuotientPath {
    segment: TwoSidedSegment,
    window: Arc<CompactSet>,
}

impl QuotientPath {
    pub fn segment(&self) -> &TwoSidedSegment {
        &self.segment
    }

    pub fn window(&self) -> &Arc<CompactSet> {
        &self.window
    }

    /// Entrance point into the window (time zero).
    pub fn entrance(&self) -> LatticePoint {
        self.segment.anchor()
    }

    pub fn into_segment(self) -> TwoSidedSegment {
        self.segment
    }
}

/// Re-anchors `seg` at its earliest stored visit to `window`.
pub fn canonicalize(seg: &TwoSidedSegment, window: &Arc<CompactSet>) -> Result<QuotientPath> {
    let idx = seg.first_index_in(window).ok_or(Error::NoHit)?;
    let mut segment = seg.clone();
    segment.origin = idx;
    Ok(QuotientPath {
        segment,
        window: Arc::clone(window),
    })
}

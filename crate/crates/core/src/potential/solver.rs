use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{CompactSet, LatticePoint, MAX_DIM};

/// Cells of the solver cube beyond this count are refused as a configuration error.
const MAX_CELLS: usize = 40_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    /// Domain radius `R`: unknowns are the sites with squared norm at most `R^2`.
    pub radius: u32,
    /// Maximum harmonicity defect accepted.
    pub tol: f64,
    /// Over-relaxation factor.
    pub omega: f64,
    pub max_sweeps: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            radius: 12,
            tol: 1e-8,
            omega: 1.5,
            max_sweeps: 200_000,
        }
    }
}

impl SolverParams {
    pub fn with_radius(self, radius: u32) -> Self {
        SolverParams { radius, ..self }
    }
}

/// Escape probabilities `h_R(x)`: the chance that a walk from `x` reaches the
/// outside of the ball of radius `R` before visiting the target set.
#[derive(Clone, Debug)]
pub struct PotentialField {
    target: Arc<CompactSet>,
    dim: usize,
    radius: u32,
    half: i32,
    side: usize,
    values: Vec<f64>,
    residual: f64,
    sweeps: usize,
}

struct Grid {
    dim: usize,
    half: i32,
    side: usize,
    strides: [usize; MAX_DIM],
}

impl Grid {
    fn new(dim: usize, radius: u32) -> Result<Self> {
        let half = radius as i32 + 1;
        let side = (2 * half + 1) as usize;
        let cells = (side as f64).powi(dim as i32);
        if cells > MAX_CELLS as f64 {
            return Err(Error::config(
                "solver.radius",
                format!("domain of {cells:.0} cells exceeds the limit of {MAX_CELLS}"),
            ));
        }
        let mut strides = [0usize; MAX_DIM];
        let mut s = 1;
        for a in (0..dim).rev() {
            strides[a] = s;
            s *= side;
        }
        Ok(Grid {
            dim,
            half,
            side,
            strides,
        })
    }

    fn cells(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    fn point(&self, mut idx: usize) -> LatticePoint {
        let mut c = [0i32; MAX_DIM];
        for a in (0..self.dim).rev() {
            c[a] = (idx % self.side) as i32 - self.half;
            idx /= self.side;
        }
        LatticePoint::new(&c[..self.dim])
    }
}

#[inline]
fn cube_index(p: &LatticePoint, half: i32, side: usize) -> Option<usize> {
    let mut idx = 0usize;
    for &c in p.coords() {
        if c.abs() > half {
            return None;
        }
        idx = idx * side + (c + half) as usize;
    }
    Some(idx)
}

/// Solves the discrete Dirichlet problem `h = 0` on `target`, `h = 1` outside
/// the ball of radius `R`, `h` harmonic in between, by successive over-relaxation.
pub fn solve_escape_field(target: &Arc<CompactSet>, params: &SolverParams) -> Result<PotentialField> {
    let dim = target.dim();
    let r2 = params.radius as i64 * params.radius as i64;
    if target.radius_bound() >= r2 {
        return Err(Error::DomainTooSmall {
            radius_bound: target.radius_bound(),
            domain_radius: params.radius,
        });
    }
    if !(params.tol > 0.0) {
        return Err(Error::config("solver.tol", "must be positive"));
    }
    if !(params.omega > 0.0 && params.omega < 2.0) {
        return Err(Error::config("solver.omega", "must lie in (0, 2)"));
    }
    let grid = Grid::new(dim, params.radius)?;
    let n = grid.cells();

    let mut values = vec![1.0f64; n];
    let mut unknowns: Vec<u32> = Vec::new();
    let scale = if target.is_empty() {
        0.0
    } else {
        (target.radius_bound() as f64).sqrt() + 0.5
    };
    for idx in 0..n {
        let p = grid.point(idx);
        let n2 = p.squared_norm();
        if n2 > r2 {
            continue;
        }
        if target.contains(&p) {
            values[idx] = 0.0;
            continue;
        }
        // Newtonian-like starting guess.
        values[idx] = (1.0 - scale / (n2 as f64).sqrt().max(1.0)).clamp(0.0, 1.0);
        unknowns.push(idx as u32);
    }

    let offsets: Vec<usize> = (0..dim).map(|a| grid.strides[a]).collect();
    let inv = 1.0 / (2 * dim) as f64;
    let omega = params.omega;

    let defect = |v: &[f64], i: usize| -> f64 {
        let mut s = 0.0;
        for &o in &offsets {
            s += v[i + o] + v[i - o];
        }
        s * inv - v[i]
    };

    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    while sweeps < params.max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for &i in &unknowns {
            let i = i as usize;
            let d = defect(&values, i);
            max_change = max_change.max(d.abs());
            values[i] += omega * d;
        }
        if max_change <= params.tol {
            for &i in &unknowns {
                let v = &mut values[i as usize];
                *v = v.clamp(0.0, 1.0);
            }
            residual = unknowns
                .iter()
                .map(|&i| defect(&values, i as usize).abs())
                .fold(0.0, f64::max);
            if residual <= params.tol {
                break;
            }
        }
    }
    if residual > params.tol {
        return Err(Error::NonConvergence {
            residual,
            sweeps,
            tol: params.tol,
        });
    }

    Ok(PotentialField {
        target: Arc::clone(target),
        dim,
        radius: params.radius,
        half: grid.half,
        side: grid.side,
        values,
        residual,
        sweeps,
    })
}

impl PotentialField {
    pub fn target(&self) -> &Arc<CompactSet> {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Largest harmonicity defect off the target at acceptance.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// True when `p` is an unknown of the Dirichlet problem or lies in the target.
    #[inline]
    pub fn in_domain(&self, p: &LatticePoint) -> bool {
        let r = self.radius as i64;
        p.squared_norm() <= r * r
    }

    /// `h_R(p)`; 1 outside the domain.
    #[inline]
    pub fn value(&self, p: &LatticePoint) -> f64 {
        if !self.in_domain(p) {
            return 1.0;
        }
        match cube_index(p, self.half, self.side) {
            Some(i) => self.values[i],
            None => 1.0,
        }
    }

    /// Harmonicity defect `|mean of h over neighbors - h(p)|` at a site off the target.
    pub fn defect(&self, p: &LatticePoint) -> f64 {
        let s: f64 = p.neighbors().map(|q| self.value(&q)).sum();
        (s / (2 * self.dim) as f64 - self.value(p)).abs()
    }

    /// Interior sites of the domain (target sites excluded), in cube order.
    pub fn sites(&self) -> impl Iterator<Item = (LatticePoint, f64)> + '_ {
        let grid = Grid::new(self.dim, self.radius).expect("validated at solve time");
        let r2 = self.radius as i64 * self.radius as i64;
        (0..self.values.len()).filter_map(move |i| {
            let p = grid.point(i);
            (p.squared_norm() <= r2 && !self.target.contains(&p)).then(|| (p, self.values[i]))
        })
    }
}

/// Escape-probability weights on the target; total mass is the capacity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumMeasure {
    pub points: Vec<LatticePoint>,
    pub weights: Vec<f64>,
    pub total: f64,
}

impl EquilibriumMeasure {
    pub fn weight(&self, p: &LatticePoint) -> f64 {
        self.points
            .binary_search(p)
            .map(|i| self.weights[i])
            .unwrap_or(0.0)
    }

    /// `e_K / cap(K)`; all zeros for an empty or zero-capacity set.
    pub fn normalized(&self) -> Vec<f64> {
        if self.total > 0.0 {
            self.weights.iter().map(|w| w / self.total).collect()
        } else {
            vec![0.0; self.weights.len()]
        }
    }
}

/// `e_K(x) = (1/2d) * sum of h over the neighbors of x`, for x in K.
pub fn equilibrium_measure(target: &CompactSet, field: &PotentialField) -> Result<EquilibriumMeasure> {
    if field.target().as_ref() != target {
        return Err(Error::FieldMismatch);
    }
    let inv = 1.0 / (2 * target.dim()) as f64;
    let weights: Vec<f64> = target
        .points()
        .iter()
        .map(|x| x.neighbors().map(|y| field.value(&y)).sum::<f64>() * inv)
        .collect();
    let total = weights.iter().sum();
    Ok(EquilibriumMeasure {
        points: target.points().to_vec(),
        weights,
        total,
    })
}

/// Capacity estimates at two radii and their first-order Richardson extrapolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub set_id: String,
    #[serde(rename = "R")]
    pub radius: u32,
    #[serde(rename = "R2")]
    pub radius2: u32,
    pub cap_r: f64,
    pub cap_r2: f64,
    pub cap_extrapolated: f64,
    pub residual: f64,
}

/// Richardson step from radii `R` and `2R`. The truncated inverse capacity
/// satisfies `1/cap_R = 1/cap - c R^(2-d) + ...`, so the step is taken on
/// the reciprocals with weight `2^(d-2)`.
#[inline]
pub fn richardson(dim: usize, cap_r: f64, cap_2r: f64) -> f64 {
    if cap_r <= 0.0 || cap_2r <= 0.0 {
        return 0.0;
    }
    let w = 2f64.powi(dim as i32 - 2);
    (w - 1.0) / (w / cap_2r - 1.0 / cap_r)
}

/// A window together with its solved field (at `2R`), equilibrium measure and capacity report.
#[derive(Clone, Debug)]
pub struct PotentialSolution {
    pub field: PotentialField,
    pub measure: EquilibriumMeasure,
    pub capacity: CapacityReport,
}

impl PotentialSolution {
    pub fn capacity(&self) -> f64 {
        self.capacity.cap_extrapolated
    }
}

/// Solves at `R` and `2R` and extrapolates. The field and measure kept are the `2R` ones.
pub fn solve_window(target: &Arc<CompactSet>, params: &SolverParams) -> Result<PotentialSolution> {
    let r = params.radius;
    let outer = params.with_radius(2 * r);
    if target.is_empty() {
        // Nothing to solve; the field is identically one.
        let field = solve_escape_field(target, &outer)?;
        let measure = equilibrium_measure(target, &field)?;
        return Ok(PotentialSolution {
            field,
            measure,
            capacity: CapacityReport {
                set_id: target.fingerprint(),
                radius: r,
                radius2: 2 * r,
                cap_r: 0.0,
                cap_r2: 0.0,
                cap_extrapolated: 0.0,
                residual: 0.0,
            },
        });
    }
    let near = solve_escape_field(target, params)?;
    let cap_r = equilibrium_measure(target, &near)?.total;
    let field = solve_escape_field(target, &outer)?;
    let measure = equilibrium_measure(target, &field)?;
    let cap_r2 = measure.total;
    let capacity = CapacityReport {
        set_id: target.fingerprint(),
        radius: r,
        radius2: 2 * r,
        cap_r,
        cap_r2,
        cap_extrapolated: richardson(target.dim(), cap_r, cap_r2),
        residual: near.residual().max(field.residual()),
    };
    Ok(PotentialSolution {
        field,
        measure,
        capacity,
    })
}

/// Capacity of `target`, extrapolated from radii `R` and `2R`.
pub fn capacity(target: &CompactSet, params: &SolverParams) -> Result<CapacityReport> {
    if target.is_empty() {
        return Ok(CapacityReport {
            set_id: target.fingerprint(),
            radius: params.radius,
            radius2: 2 * params.radius,
            cap_r: 0.0,
            cap_r2: 0.0,
            cap_extrapolated: 0.0,
            residual: 0.0,
        });
    }
    Ok(solve_window(&Arc::new(target.clone()), params)?.capacity)
}

/// Coefficient `a_d` of the lattice Green function asymptotics `G(x) ~ a_d |x|^(2-d)`.
pub fn green_asymptotic_constant(dim: usize) -> f64 {
    let d = dim as f64;
    0.5 * d * statrs::function::gamma::gamma(0.5 * d - 1.0) * std::f64::consts::PI.powf(-0.5 * d)
}

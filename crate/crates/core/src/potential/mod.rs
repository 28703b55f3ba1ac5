//! Discrete potential theory for the simple random walk.

mod checks;
mod solver;

pub use checks::{harmonic_measure_from_infinity, shell, sweep_check, HarmonicEstimate, SweepEstimate};
pub use solver::{
    capacity, equilibrium_measure, green_asymptotic_constant, richardson, solve_escape_field,
    solve_window, CapacityReport, EquilibriumMeasure, PotentialField, PotentialSolution,
    SolverParams,
};

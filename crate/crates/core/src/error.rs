use thiserror::Error;

use crate::lattice::LatticePoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {key}: {message}")]
    Config { key: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("segment never visits the window")]
    NoHit,

    #[error("window is not strictly inside the solver domain (radius bound {radius_bound}, domain radius {domain_radius})")]
    DomainTooSmall { radius_bound: i64, domain_radius: u32 },

    #[error("solver did not converge: residual {residual:e} after {sweeps} sweeps (tolerance {tol:e})")]
    NonConvergence { residual: f64, sweeps: usize, tol: f64 },

    #[error("potential field was solved for a different window")]
    FieldMismatch,

    #[error("no launched walk hit the window ({launched} launches)")]
    ZeroHits { launched: u64 },

    #[error("inner set is not contained in the outer set")]
    NotNested,

    #[error("conditioned walk is trapped at {0:?}: every neighbor lies in the window")]
    Trapped(LatticePoint),

    #[error("undecidable intrinsic time for {undecidable} of {total} walks (limit {limit})")]
    UndecidableRate { undecidable: u64, total: u64, limit: f64 },

    #[error("observation box exceeds the exact-storage region (radius bound {box_bound} > {storage_bound})")]
    BoxTooLarge { box_bound: i64, storage_bound: i64 },

    #[error("walk exceeded its step budget of {0}")]
    StepBudget(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

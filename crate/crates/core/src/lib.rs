//! Random-walk interlacements on the lattice: discrete potential theory, the
//! classical and two-sided constructions, and statistical checks comparing them.

pub mod classical;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod io;
pub mod lattice;
pub mod palm;
pub mod pipeline;
pub mod potential;
pub mod sample;
pub mod seed;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};

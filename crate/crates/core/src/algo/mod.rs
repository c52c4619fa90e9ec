//! Ask/tell search algorithms.

mod pgpe;
mod random_search;

pub use pgpe::{
    adam_step, centered_ranks, clipup_step, pgpe_gradients, AdamState, Optimizer, Pgpe, PgpeConfig,
    Shaping, symmetric_sample,
};
pub use random_search::RandomSearch;

use crate::error::Result;
use crate::tensor::{FitnessVector, PopulationParams};

/// Population-based optimizer driven by strict ask/tell alternation.
///
/// Calling `ask` twice without a `tell`, or `tell` without a pending `ask`, is
/// a protocol error.
pub trait Algorithm: Send {
    fn name(&self) -> &'static str;

    fn pop_size(&self) -> usize;

    fn dim(&self) -> usize;

    fn ask(&mut self) -> Result<PopulationParams>;

    fn tell(&mut self, fitness: &FitnessVector) -> Result<()>;

    /// The current solution; for PGPE the search center.
    fn best_params(&self) -> Vec<f32>;

    /// Mean exploration scale, reported in training logs.
    fn sigma_mean(&self) -> f32;

    /// Number of completed tells.
    fn iteration(&self) -> u64;
}

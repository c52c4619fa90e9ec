//! Batched neuroevolution on multi-core CPUs.
//!
//! The toolkit is split along three interfaces:
//!
//! * [`Algorithm`]: ask/tell search over flat parameter vectors ([`algo`]).
//! * [`Policy`]: maps a P×B batch of observations and a P×D parameter matrix
//!   to P×B actions in one call ([`policies`]).
//! * [`VectorizedTask`]: stateless environments whose state is an explicit
//!   value threaded through `reset`/`step` ([`tasks`]).
//!
//! [`trainer`] glues them together: it derives rollout keys, evaluates the
//! population on a worker pool and drives the ask/tell loop.

pub mod algo;
pub mod checkpoint;
pub mod error;
pub mod image;
pub mod policies;
pub mod policy;
pub mod splitrng;
pub mod task;
pub mod tasks;
pub mod tensor;
pub mod trainer;

pub use algo::Algorithm;
pub use error::{Error, Result};
pub use policy::{Policy, PolicyState};
pub use splitrng::Key;
pub use task::{StepResult, TaskState, VectorizedTask};
pub use tensor::{FitnessVector, Observation, PopulationParams, Tensor};

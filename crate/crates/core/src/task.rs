use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::splitrng::Key;
use crate::tensor::{Observation, Tensor};

/// Immutable per-rollout environment record. `step` builds a new one.
#[derive(Clone, Debug)]
pub struct TaskState<E> {
    /// P×B×obs_dim.
    pub obs: Observation,
    pub extra: E,
}

impl<E> TaskState<E> {
    pub fn pop_size(&self) -> usize {
        self.obs.pop_size()
    }

    pub fn lanes(&self) -> usize {
        self.obs.lanes()
    }
}

#[derive(Clone, Debug)]
pub struct StepResult<E> {
    pub state: TaskState<E>,
    /// P×B.
    pub reward: Tensor,
    /// P×B, row-major.
    pub done: Vec<bool>,
}

/// An environment with explicit population (P) and lane (B) axes.
///
/// Implementations keep no internal state; `reset` and `step` are pure.
/// After a lane reports `done`, later steps give it zero reward and leave its
/// state unchanged.
pub trait VectorizedTask: Send + Sync {
    type Extra: Clone + Send + Sync;

    fn name(&self) -> &'static str;
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn max_steps(&self) -> usize;

    /// `true` when member i's rollout depends only on member i's actions, so
    /// the population can be split across workers. Tasks where members share
    /// an arena return `false`.
    fn separable(&self) -> bool {
        true
    }

    /// One key per lane; every member sees the same B lane initializations.
    fn reset(&self, keys: &[Key], pop: usize) -> Result<TaskState<Self::Extra>>;

    fn step(&self, state: &TaskState<Self::Extra>, actions: &Tensor) -> Result<StepResult<Self::Extra>>;
}

/// Tasks that can draw a lane as an image.
pub trait Render: VectorizedTask {
    fn render(&self, state: &TaskState<Self::Extra>, member: usize, lane: usize) -> RgbImage;
}

pub(crate) fn check_keys(keys: &[Key]) -> Result<()> {
    if keys.is_empty() {
        return Err(Error::InvalidArgument("reset needs at least one lane key".into()));
    }
    Ok(())
}

pub(crate) fn check_actions(actions: &Tensor, pop: usize, lanes: usize, act_dim: usize) -> Result<()> {
    if actions.shape() != [pop, lanes, act_dim] {
        return Err(Error::Shape(format!(
            "actions {:?}, expected [{pop}, {lanes}, {act_dim}]",
            actions.shape()
        )));
    }
    Ok(())
}

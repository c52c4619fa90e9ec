//! Single-step function optimization: reward −‖a − c‖² for a fixed center c.
//! Paired with the identity policy it turns any algorithm into a plain
//! black-box optimizer.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::splitrng::Key;
use crate::task::{check_actions, check_keys, StepResult, TaskState, VectorizedTask};
use crate::tensor::{Observation, Tensor};

#[derive(Clone, Debug)]
pub struct SphereTask {
    center: Vec<f32>,
}

impl SphereTask {
    pub fn new(center: Vec<f32>) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidArgument("sphere center must be non-empty".into()));
        }
        Ok(SphereTask { center })
    }

    /// Center drawn uniformly from [−1, 1]^dim.
    pub fn random(key: Key, dim: usize) -> Result<Self> {
        let mut s = key.stream();
        Self::new((0..dim).map(|_| s.uniform_in(-1.0, 1.0)).collect())
    }

    pub fn center(&self) -> &[f32] {
        &self.center
    }

    pub fn value(&self, x: &[f32]) -> f32 {
        -x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f32>()
    }
}

impl VectorizedTask for SphereTask {
    type Extra = ();

    fn name(&self) -> &'static str {
        "sphere"
    }

    fn obs_dim(&self) -> usize {
        0
    }

    fn act_dim(&self) -> usize {
        self.center.len()
    }

    fn max_steps(&self) -> usize {
        1
    }

    fn reset(&self, keys: &[Key], pop: usize) -> Result<TaskState<()>> {
        check_keys(keys)?;
        Ok(TaskState { obs: Observation::shared(pop, keys.len(), 0, Arc::new(Vec::new()))?, extra: () })
    }

    fn step(&self, state: &TaskState<()>, actions: &Tensor) -> Result<StepResult<()>> {
        let (p, b) = (state.pop_size(), state.lanes());
        check_actions(actions, p, b, self.center.len())?;
        let reward = actions.data().chunks_exact(self.center.len()).map(|a| self.value(a)).collect();
        Ok(StepResult {
            state: state.clone(),
            reward: Tensor::from_vec(&[p, b], reward)?,
            done: vec![true; p * b],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitrng::new_key;

    #[test]
    fn optimum_scores_zero() {
        let task = SphereTask::random(new_key(1), 5).unwrap();
        assert!(task.center().iter().all(|c| c.abs() <= 1.0));
        let st = task.reset(&[new_key(2)], 2).unwrap();
        let mut acts = task.center().to_vec();
        acts.extend([0.0; 5]);
        let res = task.step(&st, &Tensor::from_vec(&[2, 1, 5], acts).unwrap()).unwrap();
        assert_eq!(res.reward.data()[0], 0.0);
        let expect: f32 = -task.center().iter().map(|c| c * c).sum::<f32>();
        assert_eq!(res.reward.data()[1], expect);
    }
}

use crate::error::{Error, Result};
use crate::policies::ParamLayout;
use crate::tensor::{Observation, PopulationParams, Tensor};

/// Per-rollout policy memory, e.g. recurrent cell contents shaped P×B×hidden.
/// Stateless policies carry an empty record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolicyState {
    pub tensors: Vec<Tensor>,
}

impl PolicyState {
    pub fn empty() -> Self {
        PolicyState::default()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }
}

/// A batched network evaluated for the whole population in one call.
///
/// Member i's actions depend only on row i of the parameters, member i's
/// observation lanes and member i's slice of the policy state.
pub trait Policy: Send + Sync {
    fn num_params(&self) -> usize;

    fn layout(&self) -> ParamLayout;

    /// Short spec string stored alongside checkpoints, e.g. `mlp:5-64-1:tanh`.
    fn describe(&self) -> String;

    fn reset(&self, obs: &Observation) -> PolicyState;

    /// Returns P×B×act_dim actions and the next policy state.
    fn get_actions(
        &self,
        obs: &Observation,
        params: &PopulationParams,
        state: &PolicyState,
    ) -> Result<(Tensor, PolicyState)>;
}

pub(crate) fn check_params(policy: &dyn Policy, obs: &Observation, params: &PopulationParams) -> Result<()> {
    if params.dim() != policy.num_params() {
        return Err(Error::Shape(format!(
            "policy {} expects {} parameters, got {}",
            policy.describe(),
            policy.num_params(),
            params.dim()
        )));
    }
    if params.pop_size() != obs.pop_size() {
        return Err(Error::Shape(format!(
            "{} parameter rows for an observation with population {}",
            params.pop_size(),
            obs.pop_size()
        )));
    }
    Ok(())
}

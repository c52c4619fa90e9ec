use crate::error::Result;
use crate::policies::ParamLayout;
use crate::policy::{check_params, Policy, PolicyState};
use crate::tensor::{Observation, PopulationParams, Tensor};

/// Emits each member's genome as its action on every lane, so the algorithm
/// optimizes the task input directly (painting, function optimization).
#[derive(Clone, Debug)]
pub struct IdentityPolicy {
    dim: usize,
}

impl IdentityPolicy {
    pub fn new(dim: usize) -> Self {
        IdentityPolicy { dim }
    }
}

impl Policy for IdentityPolicy {
    fn num_params(&self) -> usize {
        self.dim
    }

    fn layout(&self) -> ParamLayout {
        let mut l = ParamLayout::new();
        l.push("genome", &[self.dim]);
        l
    }

    fn describe(&self) -> String {
        format!("identity:{}", self.dim)
    }

    fn reset(&self, _obs: &Observation) -> PolicyState {
        PolicyState::empty()
    }

    fn get_actions(
        &self,
        obs: &Observation,
        params: &PopulationParams,
        state: &PolicyState,
    ) -> Result<(Tensor, PolicyState)> {
        check_params(self, obs, params)?;
        let (p, b) = (obs.pop_size(), obs.lanes());
        let mut out = Vec::with_capacity(p * b * self.dim);
        for i in 0..p {
            for _ in 0..b {
                out.extend_from_slice(params.row(i));
            }
        }
        Ok((Tensor::from_vec(&[p, b, self.dim], out)?, state.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn actions_are_the_genomes() {
        let pol = IdentityPolicy::new(2);
        let obs = Observation::per_member(2, 2, 0, vec![]).unwrap();
        let params = PopulationParams::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let (a, _) = pol.get_actions(&obs, &params, &pol.reset(&obs)).unwrap();
        assert_eq!(a.data(), &[1., 2., 1., 2., 3., 4., 3., 4.]);
    }
}

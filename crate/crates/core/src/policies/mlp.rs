use crate::error::{Error, Result};
use crate::policies::{Activation, ParamLayout};
use crate::policy::{check_params, Policy, PolicyState};
use crate::tensor::{affine_into, Observation, PopulationParams, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    /// Input, hidden..., output widths.
    pub layer_sizes: Vec<usize>,
    pub output_activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, output_activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "MLP needs >= 2 positive layer sizes, got {layer_sizes:?}"
            )));
        }
        Ok(MlpSpec { layer_sizes, output_activation })
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Fully connected network: tanh on hidden layers, configurable output.
#[derive(Clone, Debug)]
pub struct Mlp {
    spec: MlpSpec,
    layout: ParamLayout,
}

impl Mlp {
    pub fn new(spec: MlpSpec) -> Self {
        let mut layout = ParamLayout::new();
        for (i, w) in spec.layer_sizes.windows(2).enumerate() {
            layout.push(format!("dense{i}.w"), &[w[0], w[1]]);
            layout.push(format!("dense{i}.b"), &[w[1]]);
        }
        Mlp { spec, layout }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.spec.layer_sizes.last().expect("validated")
    }

    /// Forward pass for one member: `x` is rows×in, writes rows×out to `out`.
    /// `scratch` holds the hidden activations and is resized as needed.
    pub fn forward_member_into(&self, x: &[f32], genome: &[f32], scratch: &mut [Vec<f32>; 2], out: &mut [f32]) {
        let sizes = &self.spec.layer_sizes;
        let rows = x.len() / sizes[0];
        let layers = sizes.len() - 1;
        let [a, b] = scratch;
        for l in 0..layers {
            let (k, n) = (sizes[l], sizes[l + 1]);
            let w = self.layout.slice(genome, 2 * l);
            let bias = self.layout.slice(genome, 2 * l + 1);
            let input: &[f32] = if l == 0 { x } else { &a[..rows * k] };
            if l + 1 == layers {
                affine_into(input, w, Some(bias), k, n, out);
                self.spec.output_activation.apply(out);
            } else {
                b.resize(rows * n, 0.0);
                affine_into(input, w, Some(bias), k, n, b);
                Activation::Tanh.apply(b);
                std::mem::swap(a, b);
            }
        }
    }

    /// Forward pass for one member: `x` is rows×in, returns rows×out.
    pub fn forward_member(&self, x: &[f32], genome: &[f32]) -> Vec<f32> {
        let mut out = vec![0.0; x.len() / self.input_dim() * self.output_dim()];
        self.forward_member_into(x, genome, &mut Default::default(), &mut out);
        out
    }
}

impl Policy for Mlp {
    fn num_params(&self) -> usize {
        self.layout.total()
    }

    fn layout(&self) -> ParamLayout {
        self.layout.clone()
    }

    fn describe(&self) -> String {
        let sizes: Vec<String> = self.spec.layer_sizes.iter().map(|s| s.to_string()).collect();
        format!("mlp:{}:{}", sizes.join("-"), self.spec.output_activation.name())
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
        if obs.dim() != self.input_dim() {
            return Err(Error::Shape(format!("MLP input {} for observations of dim {}", self.input_dim(), obs.dim())));
        }
        let (p, b) = (obs.pop_size(), obs.lanes());
        let width = b * self.output_dim();
        let mut out = vec![0.0; p * width];
        let mut scratch = Default::default();
        for (i, chunk) in out.chunks_exact_mut(width).enumerate() {
            self.forward_member_into(obs.member(i), params.row(i), &mut scratch, chunk);
        }
        Ok((Tensor::from_vec(&[p, b, self.output_dim()], out)?, state.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::tanh;
    use crate::splitrng::new_key;

    fn random_pop(p: usize, d: usize, seed: u64) -> PopulationParams {
        let mut s = new_key(seed).stream();
        let data = (0..p * d).map(|_| s.normal()).collect();
        PopulationParams::new(Tensor::from_vec(&[p, d], data).unwrap()).unwrap()
    }

    fn random_obs(p: usize, b: usize, dim: usize, seed: u64) -> Observation {
        let mut s = new_key(seed).stream();
        Observation::per_member(p, b, dim, (0..p * b * dim).map(|_| s.normal()).collect()).unwrap()
    }

    /// Scalar per-member forward written independently of the batched kernel.
    fn loop_forward(sizes: &[usize], out_act: Activation, x: &[f32], theta: &[f32]) -> Vec<f32> {
        let mut cur = x.to_vec();
        let mut off = 0;
        for l in 0..sizes.len() - 1 {
            let (k, n) = (sizes[l], sizes[l + 1]);
            let w = &theta[off..off + k * n];
            let b = &theta[off + k * n..off + k * n + n];
            off += k * n + n;
            let mut next = vec![0.0f32; n];
            for j in 0..n {
                let mut acc = b[j];
                for kk in 0..k {
                    acc += cur[kk] * w[kk * n + j];
                }
                next[j] = if l + 2 == sizes.len() {
                    match out_act {
                        Activation::Tanh => tanh(acc),
                        Activation::Identity => acc,
                        Activation::Relu => acc.max(0.0),
                    }
                } else {
                    tanh(acc)
                };
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn param_count_examples() {
        assert_eq!(MlpSpec::new(vec![5, 16, 2], Activation::Tanh).unwrap().param_count(), 130);
        assert_eq!(MlpSpec::new(vec![3, 1], Activation::Tanh).unwrap().param_count(), 4);
        assert!(MlpSpec::new(vec![3], Activation::Tanh).is_err());
        assert!(MlpSpec::new(vec![], Activation::Tanh).is_err());
        let mlp = Mlp::new(MlpSpec::new(vec![5, 16, 2], Activation::Tanh).unwrap());
        assert_eq!(mlp.num_params(), 130);
    }

    #[test]
    fn hand_computed_linear_unit() {
        let mlp = Mlp::new(MlpSpec::new(vec![1, 1], Activation::Identity).unwrap());
        let obs = Observation::per_member(1, 1, 1, vec![3.0]).unwrap();
        let params = PopulationParams::single(&[2.0, 1.0]);
        let (a, _) = mlp.get_actions(&obs, &params, &PolicyState::empty()).unwrap();
        assert_eq!(a.data(), &[7.0]);
    }

    #[test]
    fn zero_params_give_zero_actions() {
        let mlp = Mlp::new(MlpSpec::new(vec![4, 8, 3], Activation::Tanh).unwrap());
        let obs = random_obs(3, 2, 4, 1);
        let params = PopulationParams::new(Tensor::zeros(&[3, mlp.num_params()])).unwrap();
        let (a, _) = mlp.get_actions(&obs, &params, &mlp.reset(&obs)).unwrap();
        assert!(a.data().iter().all(|&v| v == 0.0));
        assert_eq!(a.shape(), &[3, 2, 3]);
    }

    #[test]
    fn batched_equals_loop_and_stays_in_range() {
        let sizes = vec![5, 16, 16, 2];
        let mlp = Mlp::new(MlpSpec::new(sizes.clone(), Activation::Tanh).unwrap());
        let (p, b) = (6, 3);
        let obs = random_obs(p, b, 5, 2);
        let params = random_pop(p, mlp.num_params(), 3);
        let (a, _) = mlp.get_actions(&obs, &params, &PolicyState::empty()).unwrap();
        for i in 0..p {
            for j in 0..b {
                let expect = loop_forward(&sizes, Activation::Tanh, obs.lane(i, j), params.row(i));
                assert_eq!(&a.data()[(i * b + j) * 2..(i * b + j + 1) * 2], &expect[..]);
            }
        }
        assert!(a.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn permuting_members_permutes_actions_and_zeroing_is_isolated() {
        let mlp = Mlp::new(MlpSpec::new(vec![3, 8, 2], Activation::Tanh).unwrap());
        let obs_data: Vec<f32> = (0..2 * 3).map(|v| v as f32 * 0.1).collect();
        let obs = Observation::shared(4, 2, 3, std::sync::Arc::new(obs_data)).unwrap();
        let params = random_pop(4, mlp.num_params(), 4);
        let (a, _) = mlp.get_actions(&obs, &params, &PolicyState::empty()).unwrap();
        let perm = [2, 0, 3, 1];
        let rows: Vec<Vec<f32>> = perm.iter().map(|&i| params.row(i).to_vec()).collect();
        let (ap, _) = mlp.get_actions(&obs, &PopulationParams::from_rows(&rows).unwrap(), &PolicyState::empty()).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(ap.outer(new), a.outer(old));
        }
        let mut zeroed: Vec<Vec<f32>> = params.rows().map(<[f32]>::to_vec).collect();
        zeroed[1].iter_mut().for_each(|v| *v = 0.0);
        let (az, _) = mlp.get_actions(&obs, &PopulationParams::from_rows(&zeroed).unwrap(), &PolicyState::empty()).unwrap();
        for i in 0..4 {
            assert_eq!(az.outer(i) == a.outer(i), i != 1);
        }
    }

    #[test]
    fn rejects_wrong_shapes() {
        let mlp = Mlp::new(MlpSpec::new(vec![3, 2], Activation::Tanh).unwrap());
        let obs = random_obs(2, 1, 3, 5);
        let bad_d = random_pop(2, 7, 6);
        assert!(matches!(mlp.get_actions(&obs, &bad_d, &PolicyState::empty()), Err(Error::Shape(_))));
        let bad_p = random_pop(3, 8, 6);
        assert!(mlp.get_actions(&obs, &bad_p, &PolicyState::empty()).is_err());
        let bad_obs = random_obs(2, 1, 4, 5);
        assert!(mlp.get_actions(&bad_obs, &random_pop(2, 8, 1), &PolicyState::empty()).is_err());
    }
}

use crate::error::{Error, Result};
use crate::policies::{sigmoid, tanh, Activation, ParamLayout};
use crate::policy::{check_params, Policy, PolicyState};
use crate::tensor::{affine_into, Observation, PopulationParams, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
}

/// Reusable buffers for [`cell_rows`].
#[derive(Default)]
pub(crate) struct CellScratch {
    vt: Vec<f32>,
    z: Vec<f32>,
}

/// One LSTM step for `n` rows at once.
///
/// `w` is 4·hid × (in + hid) with gate blocks in the order i, f, g, o and `b`
/// has 4·hid entries. Inputs are transposed so the inner loop runs over rows;
/// each pre-activation is still `b[r] + Σ_c w[r, c]·v[c]` in increasing `c`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn cell_rows(
    x: &[f32],
    h: &[f32],
    c: &[f32],
    w: &[f32],
    b: &[f32],
    in_dim: usize,
    hid: usize,
    h_out: &mut [f32],
    c_out: &mut [f32],
    scratch: &mut CellScratch,
) {
    let n = h.len() / hid;
    let cols = in_dim + hid;
    scratch.vt.resize(cols * n, 0.0);
    scratch.z.resize(4 * hid * n, 0.0);
    let (vt, z) = (&mut scratch.vt, &mut scratch.z);
    for lane in 0..n {
        for k in 0..in_dim {
            vt[k * n + lane] = x[lane * in_dim + k];
        }
        for k in 0..hid {
            vt[(in_dim + k) * n + lane] = h[lane * hid + k];
        }
    }
    for r in 0..4 * hid {
        let zr = &mut z[r * n..(r + 1) * n];
        zr.fill(b[r]);
        let wr = &w[r * cols..(r + 1) * cols];
        for (k, &wv) in wr.iter().enumerate() {
            let vk = &vt[k * n..(k + 1) * n];
            for (zv, &v) in zr.iter_mut().zip(vk) {
                *zv += wv * v;
            }
        }
    }
    for lane in 0..n {
        for u in 0..hid {
            let i = sigmoid(z[u * n + lane]);
            let f = sigmoid(z[(hid + u) * n + lane]);
            let g = tanh(z[(2 * hid + u) * n + lane]);
            let o = sigmoid(z[(3 * hid + u) * n + lane]);
            let cn = f * c[lane * hid + u] + i * g;
            c_out[lane * hid + u] = cn;
            h_out[lane * hid + u] = o * tanh(cn);
        }
    }
}

/// Standard LSTM cell over n rows: x is n×in, h and c are n×hid.
pub fn lstm_cell(x: &Tensor, h: &Tensor, c: &Tensor, w: &[f32], b: &[f32]) -> Result<(Tensor, Tensor)> {
    let (xs, hs) = (x.shape(), h.shape());
    if xs.len() != 2 || hs.len() != 2 || c.shape() != hs || xs[0] != hs[0] {
        return Err(Error::Shape(format!("lstm_cell x {xs:?}, h {hs:?}, c {:?}", c.shape())));
    }
    let (n, in_dim, hid) = (xs[0], xs[1], hs[1]);
    if w.len() != 4 * hid * (in_dim + hid) || b.len() != 4 * hid {
        return Err(Error::Shape(format!(
            "lstm_cell weights {} / bias {} for in {in_dim}, hidden {hid}",
            w.len(),
            b.len()
        )));
    }
    let mut h2 = Tensor::zeros(&[n, hid]);
    let mut c2 = Tensor::zeros(&[n, hid]);
    cell_rows(
        x.data(),
        h.data(),
        c.data(),
        w,
        b,
        in_dim,
        hid,
        h2.data_mut(),
        c2.data_mut(),
        &mut CellScratch::default(),
    );
    Ok((h2, c2))
}

/// Recurrent control policy: one LSTM layer followed by a tanh readout.
#[derive(Clone, Debug)]
pub struct LstmPolicy {
    spec: LstmSpec,
    layout: ParamLayout,
}

impl LstmPolicy {
    pub fn new(spec: LstmSpec) -> Result<Self> {
        if spec.input_dim == 0 || spec.hidden_dim == 0 || spec.output_dim == 0 {
            return Err(Error::InvalidArgument(format!("LSTM dims must be positive: {spec:?}")));
        }
        let mut layout = ParamLayout::new();
        let h = spec.hidden_dim;
        layout.push("lstm.w", &[4 * h, spec.input_dim + h]);
        layout.push("lstm.b", &[4 * h]);
        layout.push("head.w", &[h, spec.output_dim]);
        layout.push("head.b", &[spec.output_dim]);
        Ok(LstmPolicy { spec, layout })
    }

    pub fn spec(&self) -> LstmSpec {
        self.spec
    }
}

impl Policy for LstmPolicy {
    fn num_params(&self) -> usize {
        self.layout.total()
    }

    fn layout(&self) -> ParamLayout {
        self.layout.clone()
    }

    fn describe(&self) -> String {
        let s = self.spec;
        format!("lstm:{}-{}-{}", s.input_dim, s.hidden_dim, s.output_dim)
    }

    fn reset(&self, obs: &Observation) -> PolicyState {
        let shape = [obs.pop_size(), obs.lanes(), self.spec.hidden_dim];
        PolicyState { tensors: vec![Tensor::zeros(&shape), Tensor::zeros(&shape)] }
    }

    fn get_actions(
        &self,
        obs: &Observation,
        params: &PopulationParams,
        state: &PolicyState,
    ) -> Result<(Tensor, PolicyState)> {
        check_params(self, obs, params)?;
        let LstmSpec { input_dim, hidden_dim: hid, output_dim } = self.spec;
        if obs.dim() != input_dim {
            return Err(Error::Shape(format!("LSTM input {input_dim} for observations of dim {}", obs.dim())));
        }
        let (p, b) = (obs.pop_size(), obs.lanes());
        let expect = [p, b, hid];
        if state.tensors.len() != 2 || state.tensors.iter().any(|t| t.shape() != expect) {
            return Err(Error::Shape(format!("LSTM state must be two {expect:?} tensors")));
        }
        let mut h_new = Tensor::zeros(&expect);
        let mut c_new = Tensor::zeros(&expect);
        let mut actions = Tensor::zeros(&[p, b, output_dim]);
        let mut scratch = CellScratch::default();
        let block = b * hid;
        for i in 0..p {
            let genome = params.row(i);
            let range = i * block..(i + 1) * block;
            cell_rows(
                obs.member(i),
                &state.tensors[0].data()[range.clone()],
                &state.tensors[1].data()[range.clone()],
                self.layout.slice(genome, 0),
                self.layout.slice(genome, 1),
                input_dim,
                hid,
                &mut h_new.data_mut()[range.clone()],
                &mut c_new.data_mut()[range.clone()],
                &mut scratch,
            );
            let out = &mut actions.data_mut()[i * b * output_dim..(i + 1) * b * output_dim];
            affine_into(
                &h_new.data()[range],
                self.layout.slice(genome, 2),
                Some(self.layout.slice(genome, 3)),
                hid,
                output_dim,
                out,
            );
            Activation::Tanh.apply(out);
        }
        Ok((actions, PolicyState { tensors: vec![h_new, c_new] }))
    }
}

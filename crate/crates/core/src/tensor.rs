//! Dense f32 tensors, population-shaped records and the batched kernels
//! shared by policies and tasks.
//!
//! Every reduction here accumulates sequentially along the contracted axis, so
//! a batched call and a per-member loop produce bit-identical results.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn full(shape: &[usize], value: f32) -> Tensor {
        Tensor { shape: shape.to_vec(), data: vec![value; shape.iter().product()] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Tensor> {
        Tensor::from_vec(shape, self.data)
    }

    /// Contiguous slice at a leading index (`self[i, ...]`).
    pub fn outer(&self, i: usize) -> &[f32] {
        let stride = self.data.len() / self.shape[0];
        &self.data[i * stride..(i + 1) * stride]
    }
}

/// P×D matrix, one genome per row.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationParams {
    matrix: Tensor,
}

impl PopulationParams {
    pub fn new(matrix: Tensor) -> Result<Self> {
        if matrix.shape().len() != 2 {
            return Err(Error::Shape(format!(
                "population matrix must be P×D, got {:?}",
                matrix.shape()
            )));
        }
        Ok(PopulationParams { matrix })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("rows of unequal length".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(Tensor::from_vec(&[rows.len(), d], data)?)
    }

    /// Single-member population holding `params`.
    pub fn single(params: &[f32]) -> Self {
        PopulationParams { matrix: Tensor { shape: vec![1, params.len()], data: params.to_vec() } }
    }

    pub fn pop_size(&self) -> usize {
        self.matrix.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.matrix.shape()[1]
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.dim();
        &self.matrix.data()[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        (0..self.pop_size()).map(move |i| self.row(i))
    }

    /// Rows `start..end` as their own population.
    pub fn slice_rows(&self, start: usize, end: usize) -> PopulationParams {
        let d = self.dim();
        PopulationParams {
            matrix: Tensor {
                shape: vec![end - start, d],
                data: self.matrix.data()[start * d..end * d].to_vec(),
            },
        }
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }
}

/// Per-member scores, higher is better.
#[derive(Clone, Debug, PartialEq)]
pub struct FitnessVector(pub Vec<f32>);

impl FitnessVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scores(&self) -> &[f32] {
        &self.0
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.0.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::InvalidArgument(format!(
                "fitness[{i}] = {} is not finite",
                self.0[i]
            ))),
            None => Ok(()),
        }
    }

    pub fn max(&self) -> f32 {
        self.0.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn mean(&self) -> f32 {
        self.0.iter().sum::<f32>() / self.0.len() as f32
    }

    /// Index of the largest score, first one on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// Observation block of logical shape P×B×dim.
///
/// Tasks whose lanes start identically for every member store one B×dim block
/// and broadcast it across the population axis instead of copying it P times.
#[derive(Clone, Debug)]
pub struct Observation {
    pop: usize,
    lanes: usize,
    dim: usize,
    data: Arc<Vec<f32>>,
    per_member: bool,
}

impl Observation {
    /// Full P×B×dim data.
    pub fn per_member(pop: usize, lanes: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != pop * lanes * dim {
            return Err(Error::Shape(format!(
                "observation {pop}×{lanes}×{dim} needs {} values, got {}",
                pop * lanes * dim,
                data.len()
            )));
        }
        Ok(Observation { pop, lanes, dim, data: Arc::new(data), per_member: true })
    }

    /// One B×dim block seen identically by all `pop` members.
    pub fn shared(pop: usize, lanes: usize, dim: usize, data: Arc<Vec<f32>>) -> Result<Self> {
        if data.len() != lanes * dim {
            return Err(Error::Shape(format!(
                "shared observation {lanes}×{dim} needs {} values, got {}",
                lanes * dim,
                data.len()
            )));
        }
        Ok(Observation { pop, lanes, dim, data, per_member: false })
    }

    pub fn pop_size(&self) -> usize {
        self.pop
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.pop, self.lanes, self.dim]
    }

    /// All B lanes of one member, B×dim row-major.
    pub fn member(&self, i: usize) -> &[f32] {
        let block = self.lanes * self.dim;
        if self.per_member {
            &self.data[i * block..(i + 1) * block]
        } else {
            &self.data[..]
        }
    }

    pub fn lane(&self, member: usize, lane: usize) -> &[f32] {
        &self.member(member)[lane * self.dim..(lane + 1) * self.dim]
    }

    pub fn to_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity(self.pop * self.lanes * self.dim);
        for i in 0..self.pop {
            data.extend_from_slice(self.member(i));
        }
        Tensor { shape: vec![self.pop, self.lanes, self.dim], data }
    }
}

/// `out[r, :] = bias + Σ_k x[r, k] · w[k, :]`, summed in increasing `k`.
///
/// `x` is rows×k, `w` is k×n row-major, `out` is rows×n.
pub fn affine_into(x: &[f32], w: &[f32], bias: Option<&[f32]>, k: usize, n: usize, out: &mut [f32]) {
    debug_assert_eq!(w.len(), k * n);
    let rows = out.len() / n;
    debug_assert_eq!(x.len(), rows * k);
    for r in 0..rows {
        let o = &mut out[r * n..(r + 1) * n];
        match bias {
            Some(b) => o.copy_from_slice(b),
            None => o.fill(0.0),
        }
        let xr = &x[r * k..(r + 1) * k];
        for (kk, &xv) in xr.iter().enumerate() {
            let wr = &w[kk * n..(kk + 1) * n];
            for (ov, &wv) in o.iter_mut().zip(wr) {
                *ov += xv * wv;
            }
        }
    }
}

/// Member-wise matrix product of P×m×k and P×k×n.
pub fn batched_matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
        return Err(Error::Shape(format!("batched_matmul of {sa:?} and {sb:?}")));
    }
    let (p, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
    let mut out = Tensor::zeros(&[p, m, n]);
    for i in 0..p {
        affine_into(
            &a.data()[i * m * k..(i + 1) * m * k],
            &b.data()[i * k * n..(i + 1) * k * n],
            None,
            k,
            n,
            &mut out.data_mut()[i * m * n..(i + 1) * m * n],
        );
    }
    Ok(out)
}

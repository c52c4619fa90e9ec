//! Batched networks over flat parameter vectors.
//!
//! Each network describes its genome with a [`ParamLayout`]: named blocks laid
//! out contiguously in definition order, weights (row-major) before bias for
//! every layer.

mod convnet;
mod identity;
mod lstm;
mod mlp;
mod seq2seq;

pub use convnet::{conv3x3_same, ConvNet, CLASSES, CONVNET_PARAMS, IMAGE_PIXELS, IMAGE_SIDE};
pub use identity::IdentityPolicy;
pub use lstm::{lstm_cell, LstmPolicy, LstmSpec};
pub use mlp::{Mlp, MlpSpec};
pub use seq2seq::{Seq2Seq, EQUALS_TOKEN, PLUS_TOKEN, VOCAB};

use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: &mut [f32]) {
        match self {
            Activation::Tanh => v.iter_mut().for_each(|x| *x = tanh(*x)),
            Activation::Identity => {}
            Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(0.0)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Option<Activation> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Rational minimax approximation of tanh, within 2e-7 of the exact value
/// and free of branches so it vectorizes.
#[inline]
pub fn tanh(x: f32) -> f32 {
    const CLAMP: f32 = 7.905_311;
    const A: [f32; 7] = [
        4.893_524_6e-3,
        6.372_619_3e-4,
        1.485_722_4e-5,
        5.122_297e-8,
        -8.604_671_5e-11,
        2.000_188e-13,
        -2.760_768_5e-16,
    ];
    const B: [f32; 4] = [4.893_525e-3, 2.268_434_6e-3, 1.185_347_1e-4, 1.198_258_4e-6];
    let x = x.clamp(-CLAMP, CLAMP);
    let x2 = x * x;
    let mut p = A[6];
    for &a in A[..6].iter().rev() {
        p = p * x2 + a;
    }
    let q = ((B[3] * x2 + B[2]) * x2 + B[1]) * x2 + B[0];
    (x * p / q).clamp(-1.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParamLayout {
    entries: Vec<ParamEntry>,
    total: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a block and returns its index.
    pub fn push(&mut self, name: impl Into<String>, shape: &[usize]) -> usize {
        let entry = ParamEntry { name: name.into(), shape: shape.to_vec(), offset: self.total };
        self.total += entry.len();
        self.entries.push(entry);
        self.entries.len() - 1
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    /// Block `index` of one genome.
    #[inline]
    pub fn slice<'a>(&self, genome: &'a [f32], index: usize) -> &'a [f32] {
        let e = &self.entries[index];
        &genome[e.offset..e.offset + e.len()]
    }

    pub fn unflatten(&self, genome: &[f32]) -> Result<Vec<Tensor>> {
        if genome.len() != self.total {
            return Err(Error::Shape(format!("genome of {} for layout of {}", genome.len(), self.total)));
        }
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| Tensor::from_vec(&e.shape, self.slice(genome, i).to_vec()))
            .collect()
    }

    pub fn flatten(&self, blocks: &[Tensor]) -> Result<Vec<f32>> {
        if blocks.len() != self.entries.len() {
            return Err(Error::Shape(format!("{} blocks for layout of {}", blocks.len(), self.entries.len())));
        }
        let mut out = Vec::with_capacity(self.total);
        for (b, e) in blocks.iter().zip(&self.entries) {
            if b.shape() != e.shape.as_slice() {
                return Err(Error::Shape(format!("block {} is {:?}, expected {:?}", e.name, b.shape(), e.shape)));
            }
            out.extend_from_slice(b.data());
        }
        Ok(out)
    }
}

/// Rebuilds a policy from the string its `describe` method returns.
pub fn policy_from_descriptor(desc: &str) -> Result<Box<dyn Policy>> {
    let bad = || Error::InvalidArgument(format!("unrecognized policy descriptor {desc:?}"));
    let parts: Vec<&str> = desc.split(':').collect();
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
    let dims = |s: &str| s.split('-').map(num).collect::<Result<Vec<usize>>>();
    match parts.as_slice() {
        ["convnet"] => Ok(Box::new(ConvNet::new())),
        ["identity", d] => Ok(Box::new(IdentityPolicy::new(num(d)?))),
        ["mlp", sizes, act] => {
            let act = Activation::parse(act).ok_or_else(bad)?;
            Ok(Box::new(Mlp::new(MlpSpec::new(dims(sizes)?, act)?)))
        }
        ["lstm", sizes] => match dims(sizes)?.as_slice() {
            &[input_dim, hidden_dim, output_dim] => {
                Ok(Box::new(LstmPolicy::new(LstmSpec { input_dim, hidden_dim, output_dim })?))
            }
            _ => Err(bad()),
        },
        ["seq2seq", d, h] => Ok(Box::new(Seq2Seq::new(num(d)?, num(h)?)?)),
        _ => Err(bad()),
    }
}

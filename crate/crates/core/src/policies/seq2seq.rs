//! LSTM encoder/decoder for digit-addition queries like `12+34=`.
//!
//! The encoder reads the one-hot query; the decoder starts from the encoder's
//! final state with `=` as its first input and feeds back its own greedy
//! argmax digit at every step.

use crate::error::{Error, Result};
use crate::policies::lstm::{cell_rows, CellScratch};
use crate::policies::ParamLayout;
use crate::policy::{check_params, Policy, PolicyState};
use crate::tensor::{affine_into, Observation, PopulationParams, Tensor};

pub const VOCAB: usize = 12;
pub const PLUS_TOKEN: u8 = 10;
pub const EQUALS_TOKEN: u8 = 11;
const DIGITS: usize = 10;

#[derive(Clone, Debug)]
pub struct Seq2Seq {
    digits: usize,
    hidden: usize,
    layout: ParamLayout,
}

impl Seq2Seq {
    pub fn new(digits: usize, hidden: usize) -> Result<Self> {
        if digits == 0 || hidden == 0 {
            return Err(Error::InvalidArgument(format!("seq2seq needs digits, hidden >= 1 (got {digits}, {hidden})")));
        }
        let mut layout = ParamLayout::new();
        layout.push("encoder.w", &[4 * hidden, VOCAB + hidden]);
        layout.push("encoder.b", &[4 * hidden]);
        layout.push("decoder.w", &[4 * hidden, VOCAB + hidden]);
        layout.push("decoder.b", &[4 * hidden]);
        layout.push("head.w", &[hidden, DIGITS]);
        layout.push("head.b", &[DIGITS]);
        Ok(Seq2Seq { digits, hidden, layout })
    }

    pub fn query_len(&self) -> usize {
        2 * self.digits + 2
    }

    pub fn answer_len(&self) -> usize {
        self.digits + 1
    }

    /// Greedy answers for n queries (n×query_len token ids) under one genome.
    pub fn predict_member(&self, queries: &[u8], genome: &[f32]) -> Vec<u8> {
        let (lq, la, hid) = (self.query_len(), self.answer_len(), self.hidden);
        let n = queries.len() / lq;
        let mut h = vec![0.0f32; n * hid];
        let mut c = vec![0.0f32; n * hid];
        let mut h2 = vec![0.0f32; n * hid];
        let mut c2 = vec![0.0f32; n * hid];
        let mut x = vec![0.0f32; n * VOCAB];
        let mut scratch = CellScratch::default();
        let l = &self.layout;

        let mut step = |tokens: &mut dyn Iterator<Item = u8>, w: &[f32], b: &[f32], h: &mut Vec<f32>, c: &mut Vec<f32>| {
            x.fill(0.0);
            for (lane, t) in tokens.enumerate() {
                x[lane * VOCAB + t as usize] = 1.0;
            }
            cell_rows(&x, h, c, w, b, VOCAB, hid, &mut h2, &mut c2, &mut scratch);
            std::mem::swap(h, &mut h2);
            std::mem::swap(c, &mut c2);
        };

        for t in 0..lq {
            step(&mut (0..n).map(|lane| queries[lane * lq + t]), l.slice(genome, 0), l.slice(genome, 1), &mut h, &mut c);
        }
        let mut answers = vec![0u8; n * la];
        let mut prev = vec![EQUALS_TOKEN; n];
        let mut logits = vec![0.0f32; n * DIGITS];
        for s in 0..la {
            step(&mut prev.iter().copied(), l.slice(genome, 2), l.slice(genome, 3), &mut h, &mut c);
            affine_into(&h, l.slice(genome, 4), Some(l.slice(genome, 5)), hid, DIGITS, &mut logits);
            for lane in 0..n {
                let row = &logits[lane * DIGITS..(lane + 1) * DIGITS];
                let mut best = 0;
                for (d, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = d;
                    }
                }
                answers[lane * la + s] = best as u8;
                prev[lane] = best as u8;
            }
        }
        answers
    }

    /// P×B×query_len token ids (as floats) to P×B×answer_len predicted ids.
    pub fn predict(&self, queries: &Observation, params: &PopulationParams) -> Result<Tensor> {
        check_params(self, queries, params)?;
        if queries.dim() != self.query_len() {
            return Err(Error::Shape(format!(
                "queries of length {} for {}-digit model",
                queries.dim(),
                self.digits
            )));
        }
        let (p, b) = (queries.pop_size(), queries.lanes());
        let mut out = Vec::with_capacity(p * b * self.answer_len());
        for i in 0..p {
            let tokens = to_tokens(queries.member(i))?;
            out.extend(self.predict_member(&tokens, params.row(i)).into_iter().map(f32::from));
        }
        Tensor::from_vec(&[p, b, self.answer_len()], out)
    }
}

fn to_tokens(values: &[f32]) -> Result<Vec<u8>> {
    values
        .iter()
        .map(|&v| {
            if v >= 0.0 && v < VOCAB as f32 && v.fract() == 0.0 {
                Ok(v as u8)
            } else {
                Err(Error::InvalidArgument(format!("token {v} outside vocabulary 0..{VOCAB}")))
            }
        })
        .collect()
}

impl Policy for Seq2Seq {
    fn num_params(&self) -> usize {
        self.layout.total()
    }

    fn layout(&self) -> ParamLayout {
        self.layout.clone()
    }

    fn describe(&self) -> String {
        format!("seq2seq:{}:{}", self.digits, self.hidden)
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
        Ok((self.predict(obs, params)?, state.clone()))
    }
}

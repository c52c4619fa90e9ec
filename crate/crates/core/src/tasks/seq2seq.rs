//! Digit addition as a single-step task: each lane is one `a+b=` problem
//! shared by all members, and the action is the predicted answer.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::policies::{EQUALS_TOKEN, PLUS_TOKEN};
use crate::splitrng::Key;
use crate::task::{check_actions, check_keys, StepResult, TaskState, VectorizedTask};
use crate::tensor::{Observation, Tensor};

/// One problem: query `a+b=` and the zero-padded (d+1)-digit sum.
pub fn make_problem(key: Key, digits: usize) -> (Vec<u8>, Vec<u8>) {
    let bound = 10u64.pow(digits as u32);
    let mut s = key.stream();
    let a = s.below(bound);
    let b = s.below(bound);
    let mut query = to_digits(a, digits);
    query.push(PLUS_TOKEN);
    query.extend(to_digits(b, digits));
    query.push(EQUALS_TOKEN);
    (query, to_digits(a + b, digits + 1))
}

fn to_digits(mut v: u64, width: usize) -> Vec<u8> {
    let mut out = vec![0u8; width];
    for slot in out.iter_mut().rev() {
        *slot = (v % 10) as u8;
        v /= 10;
    }
    out
}

/// Queries and answers for one problem per key, concatenated.
pub fn make_batch(keys: &[Key], digits: usize) -> Result<(Vec<u8>, Vec<u8>)> {
    if digits == 0 || digits > 9 {
        return Err(Error::InvalidArgument(format!("digits must be in 1..=9, got {digits}")));
    }
    let mut queries = Vec::with_capacity(keys.len() * (2 * digits + 2));
    let mut answers = Vec::with_capacity(keys.len() * (digits + 1));
    for &k in keys {
        let (q, a) = make_problem(k, digits);
        queries.extend(q);
        answers.extend(a);
    }
    Ok((queries, answers))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdditionMetric {
    /// Fraction of answer digits predicted correctly.
    TokenAccuracy,
    /// 1 if every digit is right, else 0.
    ExactMatch,
}

#[derive(Clone, Debug)]
pub struct AdditionTask {
    pub digits: usize,
    pub metric: AdditionMetric,
}

impl AdditionTask {
    pub fn new(digits: usize, metric: AdditionMetric) -> Result<Self> {
        if digits == 0 || digits > 9 {
            return Err(Error::InvalidArgument(format!("digits must be in 1..=9, got {digits}")));
        }
        Ok(AdditionTask { digits, metric })
    }

    fn score(&self, predicted: &[f32], answer: &[u8]) -> f32 {
        let correct = predicted.iter().zip(answer).filter(|(&p, &a)| p == a as f32).count();
        match self.metric {
            AdditionMetric::TokenAccuracy => correct as f32 / answer.len() as f32,
            AdditionMetric::ExactMatch => (correct == answer.len()) as u8 as f32,
        }
    }
}

impl VectorizedTask for AdditionTask {
    /// B×(d+1) answer digits.
    type Extra = Arc<Vec<u8>>;

    fn name(&self) -> &'static str {
        "seq2seq"
    }

    fn obs_dim(&self) -> usize {
        2 * self.digits + 2
    }

    fn act_dim(&self) -> usize {
        self.digits + 1
    }

    fn max_steps(&self) -> usize {
        1
    }

    fn reset(&self, keys: &[Key], pop: usize) -> Result<TaskState<Self::Extra>> {
        check_keys(keys)?;
        let (queries, answers) = make_batch(keys, self.digits)?;
        let obs = queries.into_iter().map(f32::from).collect();
        Ok(TaskState {
            obs: Observation::shared(pop, keys.len(), self.obs_dim(), Arc::new(obs))?,
            extra: Arc::new(answers),
        })
    }

    fn step(&self, state: &TaskState<Self::Extra>, actions: &Tensor) -> Result<StepResult<Self::Extra>> {
        let (p, b, la) = (state.pop_size(), state.lanes(), self.act_dim());
        check_actions(actions, p, b, la)?;
        let reward = actions
            .data()
            .chunks_exact(la)
            .enumerate()
            .map(|(idx, pred)| self.score(pred, &state.extra[(idx % b) * la..][..la]))
            .collect();
        Ok(StepResult {
            state: state.clone(),
            reward: Tensor::from_vec(&[p, b], reward)?,
            done: vec![true; p * b],
        })
    }
}

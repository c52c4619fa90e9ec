//! Rollout key scheduling, parallel population evaluation and the
//! ask → evaluate → tell training loop.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::algo::Algorithm;
use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::splitrng::{fold_in, split, Key};
use crate::task::VectorizedTask;
use crate::tensor::{FitnessVector, PopulationParams};

/// Domain constant for test-rollout keys.
pub const TEST_KEY_DOMAIN: u64 = 0x7E57;
/// Domain constant for the algorithm's own key.
pub const ALGORITHM_KEY_DOMAIN: u64 = u64::MAX;

/// `split(fold_in(master, iteration), lanes)`: the lane keys every member
/// shares in one iteration.
pub fn keys_for_iteration(master: Key, iteration: u64, lanes: usize) -> Result<Vec<Key>> {
    split(fold_in(master, iteration), lanes)
}

/// Training keys for a 1-based iteration. The fold-in value skips
/// [`TEST_KEY_DOMAIN`] so training keys never coincide with test keys.
pub fn training_keys(master: Key, iteration: u64, lanes: usize) -> Result<Vec<Key>> {
    let slot = if iteration >= TEST_KEY_DOMAIN { iteration + 1 } else { iteration };
    keys_for_iteration(master, slot, lanes)
}

pub fn test_keys(master: Key, n: usize) -> Result<Vec<Key>> {
    keys_for_iteration(master, TEST_KEY_DOMAIN, n)
}

pub fn algorithm_key(master: Key) -> Key {
    fold_in(master, ALGORITHM_KEY_DOMAIN)
}

/// Thread pool that evaluates population members in contiguous chunks.
pub struct WorkerPool {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidArgument("worker count must be >= 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))?;
        Ok(WorkerPool { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }
}

/// Cumulative reward per (member, lane) over one rollout, P×B row-major.
pub fn rollout_returns<T, P>(task: &T, policy: &P, params: &PopulationParams, keys: &[Key]) -> Result<Vec<f64>>
where
    T: VectorizedTask + ?Sized,
    P: Policy + ?Sized,
{
    let mut state = task.reset(keys, params.pop_size())?;
    let mut pstate = policy.reset(&state.obs);
    let mut totals = vec![0.0f64; params.pop_size() * keys.len()];
    for _ in 0..task.max_steps() {
        let (actions, next_pstate) = policy.get_actions(&state.obs, params, &pstate)?;
        let res = task.step(&state, &actions)?;
        for (t, &r) in totals.iter_mut().zip(res.reward.data()) {
            *t += r as f64;
        }
        state = res.state;
        pstate = next_pstate;
        if res.done.iter().all(|&d| d) {
            break;
        }
    }
    Ok(totals)
}

fn member_means(totals: &[f64], lanes: usize) -> Vec<f32> {
    totals.chunks_exact(lanes).map(|row| (row.iter().sum::<f64>() / lanes as f64) as f32).collect()
}

/// Fitness of each member: mean over lanes of cumulative reward. Separable
/// tasks are split into contiguous member chunks, one per worker, and the
/// result does not depend on the worker count.
pub fn evaluate_population<T, P>(
    pool: &WorkerPool,
    task: &T,
    policy: &P,
    params: &PopulationParams,
    keys: &[Key],
) -> Result<FitnessVector>
where
    T: VectorizedTask + ?Sized,
    P: Policy + ?Sized,
{
    let p = params.pop_size();
    if !task.separable() || pool.workers == 1 || p == 1 {
        let totals = pool.pool.install(|| rollout_returns(task, policy, params, keys))?;
        return Ok(FitnessVector(member_means(&totals, keys.len())));
    }
    let chunk = p.div_ceil(pool.workers);
    let bounds: Vec<(usize, usize)> = (0..p).step_by(chunk).map(|s| (s, (s + chunk).min(p))).collect();
    let parts: Vec<Result<Vec<f32>>> = pool.pool.install(|| {
        bounds
            .par_iter()
            .map(|&(s, e)| {
                let totals = rollout_returns(task, policy, &params.slice_rows(s, e), keys)?;
                Ok(member_means(&totals, keys.len()))
            })
            .collect()
    });
    let mut out = Vec::with_capacity(p);
    for part in parts {
        out.extend(part?);
    }
    Ok(FitnessVector(out))
}

/// Score of a single parameter vector: mean cumulative reward over `keys`.
pub fn evaluate_params<T, P>(pool: &WorkerPool, task: &T, policy: &P, params: &[f32], keys: &[Key]) -> Result<f32>
where
    T: VectorizedTask + ?Sized,
    P: Policy + ?Sized,
{
    let fit = evaluate_population(pool, task, policy, &PopulationParams::single(params), keys)?;
    Ok(fit.0[0])
}

#[derive(Clone, Debug)]
pub struct TrainerConfig {
    pub seed: u64,
    pub max_iters: u64,
    /// Lanes (B) per member in each training iteration.
    pub lanes: usize,
    pub test_interval: u64,
    pub n_test_rollouts: usize,
    pub checkpoint_path: Option<PathBuf>,
    /// Extra sidecar entries written with every checkpoint.
    pub checkpoint_meta: BTreeMap<String, String>,
}

impl TrainerConfig {
    pub fn new(seed: u64, max_iters: u64) -> Self {
        TrainerConfig {
            seed,
            max_iters,
            lanes: 1,
            test_interval: 10,
            n_test_rollouts: 16,
            checkpoint_path: None,
            checkpoint_meta: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1");
        }
        if self.test_interval < 1 {
            return bad("test_interval must be >= 1");
        }
        if self.lanes < 1 {
            return bad("repeats must be >= 1");
        }
        if self.n_test_rollouts < 1 {
            return bad("n_test_rollouts must be >= 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub iteration: u64,
    pub best_score: f32,
    pub mean_score: f32,
    pub sigma_mean: f32,
    pub elapsed_sec: f64,
}

/// Receives training progress as it happens.
pub trait LogSink {
    fn record(&mut self, rec: &LogRecord) -> Result<()>;

    fn test_result(&mut self, _iteration: u64, _score: f32) -> Result<()> {
        Ok(())
    }
}

/// Keeps everything in memory.
#[derive(Clone, Debug, Default)]
pub struct MemorySink {
    pub records: Vec<LogRecord>,
    pub tests: Vec<(u64, f32)>,
}

impl LogSink for MemorySink {
    fn record(&mut self, rec: &LogRecord) -> Result<()> {
        self.records.push(rec.clone());
        Ok(())
    }

    fn test_result(&mut self, iteration: u64, score: f32) -> Result<()> {
        self.tests.push((iteration, score));
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingOutcome {
    pub final_test_score: f32,
    pub best_test_score: f32,
    pub best_params: Vec<f32>,
}

/// Fails early if `path` cannot be opened for writing.
pub fn probe_writable(path: &Path) -> Result<()> {
    OpenOptions::new().create(true).append(true).open(path).map(|_| ()).map_err(|e| Error::io(path, e))
}

/// Runs `cfg.max_iters` iterations of ask → evaluate → tell.
///
/// The algorithm's center is scored on `test_task` with fixed test keys every
/// `test_interval` iterations and after the last one; a checkpoint is written
/// whenever that score improves.
#[allow(clippy::too_many_arguments)]
pub fn run_training<T, U, P>(
    cfg: &TrainerConfig,
    pool: &WorkerPool,
    algo: &mut dyn Algorithm,
    policy: &P,
    task: &T,
    test_task: &U,
    sink: &mut dyn LogSink,
) -> Result<TrainingOutcome>
where
    T: VectorizedTask + ?Sized,
    U: VectorizedTask + ?Sized,
    P: Policy + ?Sized,
{
    cfg.validate()?;
    if algo.dim() != policy.num_params() {
        return Err(Error::Shape(format!(
            "algorithm searches {} parameters but policy {} has {}",
            algo.dim(),
            policy.describe(),
            policy.num_params()
        )));
    }
    if let Some(path) = &cfg.checkpoint_path {
        probe_writable(path)?;
    }
    let master = crate::splitrng::new_key(cfg.seed);
    let tkeys = test_keys(master, cfg.n_test_rollouts)?;
    let start = Instant::now();
    let mut best_test = f32::NEG_INFINITY;
    let mut best_params = algo.best_params();
    let mut last_test = f32::NEG_INFINITY;
    for iteration in 1..=cfg.max_iters {
        let params = algo.ask()?;
        let keys = training_keys(master, iteration, cfg.lanes)?;
        let fitness = evaluate_population(pool, task, policy, &params, &keys)?;
        algo.tell(&fitness)?;
        sink.record(&LogRecord {
            iteration,
            best_score: fitness.max(),
            mean_score: fitness.mean(),
            sigma_mean: algo.sigma_mean(),
            elapsed_sec: start.elapsed().as_secs_f64(),
        })?;
        if iteration % cfg.test_interval == 0 || iteration == cfg.max_iters {
            let center = algo.best_params();
            last_test = evaluate_params(pool, test_task, policy, &center, &tkeys)?;
            sink.test_result(iteration, last_test)?;
            if last_test > best_test {
                best_test = last_test;
                best_params = center.clone();
                if let Some(path) = &cfg.checkpoint_path {
                    save_checkpoint(
                        path,
                        &Checkpoint {
                            params: center,
                            algorithm: algo.name().to_string(),
                            iteration,
                            score: last_test,
                            extra: cfg.checkpoint_meta.clone(),
                        },
                    )?;
                }
            }
        }
    }
    Ok(TrainingOutcome { final_test_score: last_test, best_test_score: best_test, best_params })
}

use nevo_core::algo::{Pgpe, PgpeConfig};
use nevo_core::checkpoint::load_checkpoint;
use nevo_core::policies::{Activation, IdentityPolicy, Mlp, MlpSpec};
use nevo_core::splitrng::{fold_in, new_key, Key};
use nevo_core::tasks::{CartPole, CartPoleMode, SphereTask, WaterWorld};
use nevo_core::trainer::{
    evaluate_population, run_training, test_keys, training_keys, MemorySink, TrainerConfig, WorkerPool,
};
use nevo_core::{Observation, PopulationParams, Result, StepResult, TaskState, Tensor, VectorizedTask};

/// Reward 1 on every step for `steps` steps, whatever the action.
struct ConstantReward {
    steps: usize,
}

impl VectorizedTask for ConstantReward {
    type Extra = usize;

    fn name(&self) -> &'static str {
        "constant"
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn max_steps(&self) -> usize {
        100
    }

    fn reset(&self, keys: &[Key], pop: usize) -> Result<TaskState<usize>> {
        let obs = Observation::per_member(pop, keys.len(), 1, vec![0.0; pop * keys.len()])?;
        Ok(TaskState { obs, extra: 0 })
    }

    fn step(&self, state: &TaskState<usize>, _actions: &Tensor) -> Result<StepResult<usize>> {
        let (p, b) = (state.pop_size(), state.lanes());
        let t = state.extra + 1;
        let live = state.extra < self.steps;
        Ok(StepResult {
            state: TaskState { obs: state.obs.clone(), extra: t },
            reward: Tensor::full(&[p, b], if live { 1.0 } else { 0.0 }),
            done: vec![t >= self.steps; p * b],
        })
    }
}

fn random_population(p: usize, d: usize, seed: u64) -> PopulationParams {
    let mut s = new_key(seed).stream();
    let rows: Vec<Vec<f32>> = (0..p).map(|_| (0..d).map(|_| 0.5 * s.normal()).collect()).collect();
    PopulationParams::from_rows(&rows).unwrap()
}

fn cartpole_setup() -> (CartPole, Mlp) {
    let mlp = Mlp::new(MlpSpec::new(vec![5, 16, 1], Activation::Tanh).unwrap());
    (CartPole::new(CartPoleMode::Hard), mlp)
}

#[test]
fn constant_reward_gives_fitness_ten() {
    let task = ConstantReward { steps: 10 };
    let policy = IdentityPolicy::new(1);
    let params = random_population(6, 1, 1);
    let keys = training_keys(new_key(0), 1, 3).unwrap();
    for workers in [1, 4] {
        let fit = evaluate_population(&WorkerPool::new(workers).unwrap(), &task, &policy, &params, &keys).unwrap();
        assert_eq!(fit.scores(), &[10.0; 6]);
    }
}

#[test]
fn worker_counts_give_bit_identical_fitness() {
    let (task, mlp) = cartpole_setup();
    let params = random_population(10, nevo_core::Policy::num_params(&mlp), 2);
    let keys = training_keys(new_key(3), 7, 2).unwrap();
    let one = evaluate_population(&WorkerPool::new(1).unwrap(), &task, &mlp, &params, &keys).unwrap();
    for workers in [2, 3, 4, 8] {
        let many = evaluate_population(&WorkerPool::new(workers).unwrap(), &task, &mlp, &params, &keys).unwrap();
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(one.scores()), bits(many.scores()), "workers = {workers}");
    }
}

#[test]
fn shared_arena_task_ignores_worker_count() {
    let task = WaterWorld::multi();
    let mlp = Mlp::new(MlpSpec::new(vec![66, 8, 2], Activation::Tanh).unwrap());
    let params = random_population(8, nevo_core::Policy::num_params(&mlp), 4);
    let keys = training_keys(new_key(5), 1, 1).unwrap();
    let one = evaluate_population(&WorkerPool::new(1).unwrap(), &task, &mlp, &params, &keys).unwrap();
    let four = evaluate_population(&WorkerPool::new(4).unwrap(), &task, &mlp, &params, &keys).unwrap();
    assert_eq!(one, four);
}

fn sphere_run(max_iters: u64, workers: usize) -> (MemorySink, f32, SphereTask) {
    let task = SphereTask::random(fold_in(new_key(11), 1), 100).unwrap();
    let policy = IdentityPolicy::new(100);
    let mut algo = Pgpe::new(PgpeConfig::default(), 100, new_key(12)).unwrap();
    let mut cfg = TrainerConfig::new(11, max_iters);
    cfg.test_interval = 50;
    cfg.n_test_rollouts = 1;
    let mut sink = MemorySink::default();
    let pool = WorkerPool::new(workers).unwrap();
    let out = run_training(&cfg, &pool, &mut algo, &policy, &task, &task, &mut sink).unwrap();
    (sink, out.final_test_score, task)
}

#[test]
fn one_iteration_writes_one_record() {
    let (sink, _, _) = sphere_run(1, 1);
    assert_eq!(sink.records.len(), 1);
    assert_eq!(sink.records[0].iteration, 1);
    assert_eq!(sink.tests.len(), 1);
}

#[test]
fn same_config_gives_same_trajectory() {
    let (a, sa, _) = sphere_run(40, 1);
    let (b, sb, _) = sphere_run(40, 3);
    let cols = |s: &MemorySink| {
        s.records.iter().map(|r| (r.iteration, r.best_score, r.mean_score, r.sigma_mean)).collect::<Vec<_>>()
    };
    assert_eq!(cols(&a), cols(&b));
    assert_eq!(sa.to_bits(), sb.to_bits());
}

#[test]
fn sphere_training_reaches_the_optimum() {
    let (sink, score, task) = sphere_run(1000, 1);
    assert!(score > -0.01, "final score {score}");
    let best: Vec<f32> = sink.tests.iter().map(|t| t.1).collect();
    assert!(best.last().unwrap() > best.first().unwrap());
    assert_eq!(task.value(task.center()), 0.0);
}

#[test]
fn checkpoints_track_the_best_test_score() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sphere.ckpt");
    let task = SphereTask::new(vec![0.3; 8]).unwrap();
    let policy = IdentityPolicy::new(8);
    let mut algo = Pgpe::new(PgpeConfig::default(), 8, new_key(1)).unwrap();
    let mut cfg = TrainerConfig::new(1, 60);
    cfg.test_interval = 7;
    cfg.n_test_rollouts = 1;
    cfg.checkpoint_path = Some(path.clone());
    cfg.checkpoint_meta.insert("task".into(), "sphere".into());
    let mut sink = MemorySink::default();
    let out = run_training(&cfg, &WorkerPool::new(1).unwrap(), &mut algo, &policy, &task, &task, &mut sink).unwrap();
    let ckpt = load_checkpoint(&path).unwrap();
    assert_eq!(ckpt.score, out.best_test_score);
    assert_eq!(ckpt.params, out.best_params);
    assert_eq!(ckpt.algorithm, "pgpe");
    assert_eq!(ckpt.extra.get("task").map(String::as_str), Some("sphere"));
    let best_seen = sink.tests.iter().map(|t| t.1).fold(f32::NEG_INFINITY, f32::max);
    assert_eq!(best_seen, out.best_test_score);
    assert_eq!(task.value(&ckpt.params), out.best_test_score);
}

#[test]
fn unwritable_checkpoint_fails_before_training() {
    let task = SphereTask::new(vec![0.0; 2]).unwrap();
    let policy = IdentityPolicy::new(2);
    let mut algo = Pgpe::new(PgpeConfig::default(), 2, new_key(1)).unwrap();
    let mut cfg = TrainerConfig::new(1, 5);
    cfg.checkpoint_path = Some("/nonexistent-dir/x.ckpt".into());
    let mut sink = MemorySink::default();
    let res = run_training(&cfg, &WorkerPool::new(1).unwrap(), &mut algo, &policy, &task, &task, &mut sink);
    assert!(matches!(res, Err(nevo_core::Error::Io { .. })));
    assert!(sink.records.is_empty());
}

#[test]
fn test_keys_never_meet_training_keys() {
    let master = new_key(9);
    let tests: std::collections::HashSet<Key> = test_keys(master, 16).unwrap().into_iter().collect();
    for it in 1..=3000u64 {
        for k in training_keys(master, it, 4).unwrap() {
            assert!(!tests.contains(&k));
        }
    }
}

//! Turns a [`Config`] into concrete algorithm, policy and task values.

use std::path::Path;
use std::sync::Arc;

use nevo_core::algo::{Pgpe, RandomSearch};
use nevo_core::image::RgbImage;
use nevo_core::policies::{ConvNet, IdentityPolicy, LstmPolicy, LstmSpec, Mlp, MlpSpec, Seq2Seq};
use nevo_core::splitrng::{fold_in, new_key};
use nevo_core::task::Render;
use nevo_core::tasks::mnist::MnistData;
use nevo_core::tasks::paint::GENOME_LEN;
use nevo_core::tasks::{
    procedural_target, AdditionMetric, AdditionTask, CartPole, CartPoleMode, MnistMode, MnistTask, PaintTask, SphereTask,
    WaterWorld,
};
use nevo_core::trainer::algorithm_key;
use nevo_core::{Algorithm, Policy, VectorizedTask};

use crate::config::{AlgorithmKind, Config, PolicyKind, TaskName, TaskSettings};
use crate::error::{CliError, CliResult};

/// Fold-in slot for the sphere task's center.
const SPHERE_CENTER_DOMAIN: u64 = u64::MAX - 1;

pub const MNIST_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const MNIST_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const MNIST_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Observation and action sizes of a control or optimization task.
pub fn io_dims(task: &TaskSettings) -> (usize, usize) {
    match task.name {
        TaskName::CartpoleEasy | TaskName::CartpoleHard => (5, 1),
        TaskName::Waterworld => (50, 2),
        TaskName::WaterworldMa => (66, 2),
        TaskName::Mnist => (784, 10),
        TaskName::Seq2seq => (2 * task.digits + 2, task.digits + 1),
        TaskName::Paint => (0, GENOME_LEN),
        TaskName::Sphere => (0, task.dim),
    }
}

pub fn build_policy(cfg: &Config) -> CliResult<Box<dyn Policy>> {
    let (obs, act) = io_dims(&cfg.task);
    let hidden = &cfg.policy.hidden;
    Ok(match cfg.policy.kind {
        PolicyKind::Mlp => {
            let mut sizes = vec![obs];
            sizes.extend(hidden);
            sizes.push(act);
            Box::new(Mlp::new(MlpSpec::new(sizes, cfg.policy.output_activation)?))
        }
        PolicyKind::Lstm => {
            Box::new(LstmPolicy::new(LstmSpec { input_dim: obs, hidden_dim: hidden[0], output_dim: act })?)
        }
        PolicyKind::ConvNet => Box::new(ConvNet::new()),
        PolicyKind::Seq2Seq => Box::new(Seq2Seq::new(cfg.task.digits, hidden[0])?),
        PolicyKind::Identity => Box::new(IdentityPolicy::new(act)),
    })
}

pub fn build_algorithm(cfg: &Config, dim: usize) -> CliResult<Box<dyn Algorithm>> {
    let key = algorithm_key(new_key(cfg.trainer.seed));
    let p = &cfg.algorithm.pgpe;
    Ok(match cfg.algorithm.kind {
        AlgorithmKind::Pgpe => Box::new(Pgpe::new(p.clone(), dim, key)?),
        AlgorithmKind::RandomSearch => Box::new(RandomSearch::new(p.pop_size, p.sigma_init, vec![p.center_init; dim], key)?),
    })
}

fn load_mnist(dir: &Path, images: &str, labels: &str) -> CliResult<MnistData> {
    let (ip, lp) = (dir.join(images), dir.join(labels));
    for p in [&ip, &lp] {
        if !p.exists() {
            return Err(CliError::Usage(format!(
                "MNIST file {} not found (run scripts/fetch_mnist.sh or set [task] data_dir)",
                p.display()
            )));
        }
    }
    Ok(MnistData::load_idx(&ip, &lp)?)
}

pub fn paint_task(task: &TaskSettings) -> CliResult<PaintTask> {
    Ok(match &task.target {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            let img = RgbImage::from_ppm(&bytes, &path.display().to_string())?;
            PaintTask::from_image(&img)?
        }
        None => PaintTask::new(task.width, task.height, procedural_target(task.width, task.height))?,
    })
}

pub fn sphere_task(task: &TaskSettings, seed: u64) -> CliResult<SphereTask> {
    Ok(SphereTask::random(fold_in(new_key(seed), SPHERE_CENTER_DOMAIN), task.dim)?)
}

/// Work to run against the training and test variants of a task.
pub trait TaskVisitor {
    type Output;
    fn visit<T: VectorizedTask, U: VectorizedTask>(self, train: &T, test: &U) -> CliResult<Self::Output>;
}

pub fn with_tasks<V: TaskVisitor>(cfg: &Config, v: V) -> CliResult<V::Output> {
    let t = &cfg.task;
    match t.name {
        TaskName::CartpoleEasy => {
            let task = CartPole::new(CartPoleMode::Easy);
            v.visit(&task, &task)
        }
        TaskName::CartpoleHard => {
            let task = CartPole::new(CartPoleMode::Hard);
            v.visit(&task, &task)
        }
        TaskName::Waterworld => v.visit(&WaterWorld::single(), &WaterWorld::single()),
        TaskName::WaterworldMa => v.visit(&WaterWorld::multi(), &WaterWorld::multi()),
        TaskName::Mnist => {
            let train = load_mnist(&t.data_dir, MNIST_TRAIN_IMAGES, MNIST_TRAIN_LABELS)?.truncated(t.train_size);
            if train.len() < t.batch_size {
                return Err(CliError::Usage(format!(
                    "batch_size {} exceeds the {} training images available",
                    t.batch_size,
                    train.len()
                )));
            }
            let test = load_mnist(&t.data_dir, MNIST_TEST_IMAGES, MNIST_TEST_LABELS)?;
            let train = MnistTask::new(Arc::new(train), MnistMode::Train { batch: t.batch_size })?;
            let test = MnistTask::new(Arc::new(test), MnistMode::FullSet)?;
            v.visit(&train, &test)
        }
        TaskName::Seq2seq => v.visit(
            &AdditionTask::new(t.digits, AdditionMetric::TokenAccuracy)?,
            &AdditionTask::new(t.digits, AdditionMetric::ExactMatch)?,
        ),
        TaskName::Paint => {
            let task = paint_task(t)?;
            v.visit(&task, &task)
        }
        TaskName::Sphere => {
            let task = sphere_task(t, cfg.trainer.seed)?;
            v.visit(&task, &task)
        }
    }
}

/// Work to run against a renderable task.
pub trait RenderVisitor {
    type Output;
    fn visit<T: Render>(self, task: &T) -> CliResult<Self::Output>;
}

pub fn with_render_task<V: RenderVisitor>(task: &TaskSettings, v: V) -> CliResult<V::Output> {
    match task.name {
        TaskName::CartpoleEasy => v.visit(&CartPole::new(CartPoleMode::Easy)),
        TaskName::CartpoleHard => v.visit(&CartPole::new(CartPoleMode::Hard)),
        TaskName::Waterworld => v.visit(&WaterWorld::single()),
        TaskName::WaterworldMa => v.visit(&WaterWorld::multi()),
        TaskName::Paint => v.visit(&paint_task(task)?),
        other => Err(CliError::Usage(format!(
            "task {other} cannot be rendered; renderable tasks: {}",
            renderable_list()
        ))),
    }
}

pub fn renderable_list() -> String {
    TaskName::ALL.iter().filter(|t| t.renderable()).map(|t| t.as_str()).collect::<Vec<_>>().join(", ")
}

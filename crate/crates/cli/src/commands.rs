//! `train`, `test` and `render`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nevo_core::checkpoint::load_checkpoint;
use nevo_core::policies::policy_from_descriptor;
use nevo_core::splitrng::new_key;
use nevo_core::task::Render;
use nevo_core::trainer::{
    evaluate_params, probe_writable, run_training, test_keys, LogRecord, LogSink, TrainerConfig, TrainingOutcome,
    WorkerPool,
};
use nevo_core::{Policy, VectorizedTask};

use crate::config::{preset, Config, TaskName};
use crate::error::{CliError, CliResult};
use crate::setup::{build_algorithm, build_policy, renderable_list, with_render_task, with_tasks, RenderVisitor, TaskVisitor};

pub const CSV_HEADER: &str = "iteration,best_score,mean_score,sigma_mean,elapsed_sec";

/// Worker count from `NE_WORKERS`, else the number of logical cores.
pub fn workers_from_env() -> CliResult<usize> {
    match std::env::var("NE_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Usage(format!("NE_WORKERS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

pub fn csv_row(r: &LogRecord) -> String {
    format!("{},{},{},{},{:.3}", r.iteration, r.best_score, r.mean_score, r.sigma_mean, r.elapsed_sec)
}

/// Writes one CSV row per iteration (flushed immediately) and reports test
/// results on `progress`.
pub struct CsvSink<'a> {
    csv: Option<(PathBuf, BufWriter<File>)>,
    progress: &'a mut dyn Write,
}

impl<'a> CsvSink<'a> {
    pub fn create(path: Option<&Path>, progress: &'a mut dyn Write) -> CliResult<Self> {
        let csv = match path {
            Some(p) => {
                let mut w = BufWriter::new(File::create(p).map_err(io_err(p))?);
                writeln!(w, "{CSV_HEADER}").and_then(|_| w.flush()).map_err(io_err(p))?;
                Some((p.to_path_buf(), w))
            }
            None => None,
        };
        Ok(CsvSink { csv, progress })
    }
}

impl LogSink for CsvSink<'_> {
    fn record(&mut self, rec: &LogRecord) -> nevo_core::Result<()> {
        if let Some((path, w)) = &mut self.csv {
            writeln!(w, "{}", csv_row(rec))
                .and_then(|_| w.flush())
                .map_err(|e| nevo_core::Error::Io { path: path.clone(), source: e })?;
        }
        Ok(())
    }

    fn test_result(&mut self, iteration: u64, score: f32) -> nevo_core::Result<()> {
        let _ = writeln!(self.progress, "iteration {iteration}: test score {score}");
        Ok(())
    }
}

fn checkpoint_meta(cfg: &Config, policy: &dyn Policy) -> BTreeMap<String, String> {
    let mut meta: BTreeMap<String, String> =
        cfg.resolved().into_iter().filter(|(k, _)| k.starts_with("task.")).collect();
    meta.insert("task".into(), cfg.task.name.to_string());
    meta.insert("policy".into(), policy.describe());
    meta
}

pub fn trainer_config(cfg: &Config, policy: &dyn Policy) -> TrainerConfig {
    let t = &cfg.trainer;
    TrainerConfig {
        seed: t.seed,
        max_iters: t.max_iters,
        lanes: t.repeats,
        test_interval: t.test_interval,
        n_test_rollouts: t.n_test_rollouts,
        checkpoint_path: t.checkpoint_path.clone(),
        checkpoint_meta: checkpoint_meta(cfg, policy),
    }
}

struct Train<'a> {
    cfg: &'a Config,
    workers: usize,
    out: &'a mut dyn Write,
}

impl TaskVisitor for Train<'_> {
    type Output = TrainingOutcome;

    fn visit<T: VectorizedTask, U: VectorizedTask>(self, train: &T, test: &U) -> CliResult<TrainingOutcome> {
        let cfg = self.cfg;
        let policy = build_policy(cfg)?;
        let mut algo = build_algorithm(cfg, policy.num_params())?;
        let pool = WorkerPool::new(self.workers)?;
        if let Some(p) = &cfg.trainer.checkpoint_path {
            probe_writable(p)?;
        }
        let _ = writeln!(self.out, "# policy = {} ({} parameters)", policy.describe(), policy.num_params());
        let _ = writeln!(self.out, "# workers = {}", self.workers);
        let tc = trainer_config(cfg, policy.as_ref());
        let mut sink = CsvSink::create(cfg.trainer.log_path.as_deref(), self.out)?;
        Ok(run_training(&tc, &pool, algo.as_mut(), policy.as_ref(), train, test, &mut sink)?)
    }
}

/// Runs training for a parsed configuration, echoing the resolved settings.
pub fn train(cfg: &Config, workers: usize, out: &mut dyn Write) -> CliResult<TrainingOutcome> {
    for (k, v) in cfg.resolved() {
        let _ = writeln!(out, "# {k} = {v}");
    }
    let outcome = with_tasks(cfg, Train { cfg, workers, out: &mut *out })?;
    let _ = writeln!(out, "final test score: {}", outcome.final_test_score);
    let _ = writeln!(out, "best test score: {}", outcome.best_test_score);
    Ok(outcome)
}

struct Evaluate<'a> {
    cfg: &'a Config,
    params: &'a [f32],
    workers: usize,
}

impl TaskVisitor for Evaluate<'_> {
    type Output = f32;

    fn visit<T: VectorizedTask, U: VectorizedTask>(self, _train: &T, test: &U) -> CliResult<f32> {
        let policy = build_policy(self.cfg)?;
        if policy.num_params() != self.params.len() {
            return Err(CliError::Usage(format!(
                "checkpoint holds {} parameters but policy {} needs {}",
                self.params.len(),
                policy.describe(),
                policy.num_params()
            )));
        }
        let pool = WorkerPool::new(self.workers)?;
        let keys = test_keys(new_key(self.cfg.trainer.seed), self.cfg.trainer.n_test_rollouts)?;
        Ok(evaluate_params(&pool, test, policy.as_ref(), self.params, &keys)?)
    }
}

/// Mean test score of a checkpoint under the configuration's test task.
pub fn test(cfg: &Config, checkpoint: &Path, workers: usize) -> CliResult<f32> {
    let ckpt = load_checkpoint(checkpoint)?;
    with_tasks(cfg, Evaluate { cfg, params: &ckpt.params, workers })
}

struct Frames<'a> {
    policy: &'a dyn Policy,
    params: &'a [f32],
    seed: u64,
    outdir: &'a Path,
}

impl RenderVisitor for Frames<'_> {
    type Output = usize;

    fn visit<T: Render>(self, task: &T) -> CliResult<usize> {
        let params = nevo_core::PopulationParams::single(self.params);
        let mut state = task.reset(&[new_key(self.seed)], 1)?;
        let mut pstate = self.policy.reset(&state.obs);
        let mut frames = 0;
        for _ in 0..task.max_steps() {
            let (actions, next) = self.policy.get_actions(&state.obs, &params, &pstate)?;
            let res = task.step(&state, &actions)?;
            state = res.state;
            pstate = next;
            frames += 1;
            let path = self.outdir.join(format!("frame_{frames:06}.ppm"));
            std::fs::write(&path, task.render(&state, 0, 0).to_ppm()).map_err(io_err(&path))?;
            if res.done[0] {
                break;
            }
        }
        Ok(frames)
    }
}

/// Rolls out a checkpoint on one lane and writes a PPM frame per step.
/// Returns the number of frames written.
pub fn render(checkpoint: &Path, task: &str, seed: u64, outdir: &Path) -> CliResult<usize> {
    let name = TaskName::parse(task).filter(|t| t.renderable()).ok_or_else(|| {
        CliError::Usage(format!("task {task:?} cannot be rendered; renderable tasks: {}", renderable_list()))
    })?;
    let ckpt = load_checkpoint(checkpoint)?;
    let desc = ckpt
        .extra
        .get("policy")
        .ok_or_else(|| CliError::Usage(format!("checkpoint {} has no policy entry in its metadata", checkpoint.display())))?;
    if let Some(trained) = ckpt.extra.get("task") {
        if trained != task {
            return Err(CliError::Usage(format!("checkpoint was trained on {trained}, not {task}")));
        }
    }
    let policy = policy_from_descriptor(desc)?;
    if policy.num_params() != ckpt.params.len() {
        return Err(CliError::Usage(format!(
            "checkpoint holds {} parameters but policy {desc} needs {}",
            ckpt.params.len(),
            policy.num_params()
        )));
    }
    let mut settings = preset(name, seed).task;
    for (k, v) in &ckpt.extra {
        let parse_err = || CliError::Usage(format!("bad checkpoint metadata {k}={v}"));
        match k.as_str() {
            "task.width" => settings.width = v.parse().map_err(|_| parse_err())?,
            "task.height" => settings.height = v.parse().map_err(|_| parse_err())?,
            "task.target" if v != "procedural" => settings.target = Some(PathBuf::from(v)),
            _ => {}
        }
    }
    std::fs::create_dir_all(outdir).map_err(io_err(outdir))?;
    with_render_task(&settings, Frames { policy: policy.as_ref(), params: &ckpt.params, seed, outdir })
}

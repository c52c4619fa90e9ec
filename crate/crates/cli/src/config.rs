//! INI-style configuration: `[section]` headers, `key = value` lines and `#`
//! comments. Sections are `trainer`, `algorithm`, `policy` and `task`.
//!
//! Only `[trainer] seed` and `[task] name` are required; every other key
//! falls back to the task's preset.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use nevo_core::algo::{Optimizer, PgpeConfig, Shaping};
use nevo_core::policies::Activation;

use crate::error::ConfigError;

pub const SECTIONS: [&str; 4] = ["trainer", "algorithm", "policy", "task"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Splits the text into entries, rejecting syntax errors, unknown sections
/// and duplicate keys.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut section: Option<String> = None;
    let mut entries: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line, detail: format!("unterminated section header {content:?}") })?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection { line, name: name.to_string() });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, detail: format!("expected `key = value`, found {content:?}") })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax { line, detail: format!("invalid key {key:?}") });
        }
        let section = section
            .clone()
            .ok_or_else(|| ConfigError::Syntax { line, detail: format!("key {key:?} appears before any [section]") })?;
        if let Some(first) = entries.iter().find(|e| e.section == section && e.key == key) {
            return Err(ConfigError::Duplicate { section, key: key.to_string(), first: first.line, second: line });
        }
        entries.push(Entry { section, key: key.to_string(), value: value.to_string(), line });
    }
    Ok(entries)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TaskName {
    CartpoleEasy,
    CartpoleHard,
    Waterworld,
    WaterworldMa,
    Mnist,
    Seq2seq,
    Paint,
    Sphere,
}

impl TaskName {
    pub const ALL: [TaskName; 8] = [
        TaskName::CartpoleEasy,
        TaskName::CartpoleHard,
        TaskName::Waterworld,
        TaskName::WaterworldMa,
        TaskName::Mnist,
        TaskName::Seq2seq,
        TaskName::Paint,
        TaskName::Sphere,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskName::CartpoleEasy => "cartpole_easy",
            TaskName::CartpoleHard => "cartpole_hard",
            TaskName::Waterworld => "waterworld",
            TaskName::WaterworldMa => "waterworld_ma",
            TaskName::Mnist => "mnist",
            TaskName::Seq2seq => "seq2seq",
            TaskName::Paint => "paint",
            TaskName::Sphere => "sphere",
        }
    }

    pub fn parse(s: &str) -> Option<TaskName> {
        TaskName::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn renderable(self) -> bool {
        matches!(
            self,
            TaskName::CartpoleEasy | TaskName::CartpoleHard | TaskName::Waterworld | TaskName::WaterworldMa | TaskName::Paint
        )
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgorithmKind {
    Pgpe,
    RandomSearch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    Mlp,
    Lstm,
    ConvNet,
    Seq2Seq,
    Identity,
}

impl PolicyKind {
    fn parse(s: &str) -> Option<PolicyKind> {
        match s {
            "mlp" => Some(PolicyKind::Mlp),
            "lstm" => Some(PolicyKind::Lstm),
            "convnet" => Some(PolicyKind::ConvNet),
            "seq2seq" => Some(PolicyKind::Seq2Seq),
            "identity" => Some(PolicyKind::Identity),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Mlp => "mlp",
            PolicyKind::Lstm => "lstm",
            PolicyKind::ConvNet => "convnet",
            PolicyKind::Seq2Seq => "seq2seq",
            PolicyKind::Identity => "identity",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerSettings {
    pub seed: u64,
    pub max_iters: u64,
    pub repeats: usize,
    pub test_interval: u64,
    pub n_test_rollouts: usize,
    pub log_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmSettings {
    pub kind: AlgorithmKind,
    pub pgpe: PgpeConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySettings {
    pub kind: PolicyKind,
    pub hidden: Vec<usize>,
    pub output_activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSettings {
    pub name: TaskName,
    /// seq2seq operand digits.
    pub digits: usize,
    /// MNIST training images per lane.
    pub batch_size: usize,
    /// MNIST training images used (leading prefix of the training set).
    pub train_size: usize,
    pub data_dir: PathBuf,
    pub width: usize,
    pub height: usize,
    /// Paint target image (binary PPM); procedural when absent.
    pub target: Option<PathBuf>,
    /// Sphere dimension.
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub trainer: TrainerSettings,
    pub algorithm: AlgorithmSettings,
    pub policy: PolicySettings,
    pub task: TaskSettings,
}

/// Defaults applied before the file's own values.
pub fn preset(task: TaskName, seed: u64) -> Config {
    let trainer = |max_iters, repeats, test_interval, n_test_rollouts| TrainerSettings {
        seed,
        max_iters,
        repeats,
        test_interval,
        n_test_rollouts,
        log_path: None,
        checkpoint_path: None,
    };
    let pgpe = |pop_size, sigma_init, center_lr, max_speed, sigma_lr| PgpeConfig {
        pop_size,
        sigma_init,
        center_lr,
        max_speed,
        sigma_lr,
        ..PgpeConfig::default()
    };
    let policy = |kind, hidden: &[usize]| PolicySettings { kind, hidden: hidden.to_vec(), output_activation: Activation::Tanh };
    let task_settings = TaskSettings {
        name: task,
        digits: 2,
        batch_size: 1024,
        train_size: 10_000,
        data_dir: PathBuf::from("data/mnist"),
        width: 64,
        height: 64,
        target: None,
        dim: 100,
    };
    let (trainer, pgpe, policy) = match task {
        TaskName::CartpoleEasy => (trainer(600, 4, 50, 16), pgpe(64, 0.1, 0.2, 0.4, 0.1), policy(PolicyKind::Mlp, &[64, 64])),
        TaskName::CartpoleHard => (trainer(2000, 4, 100, 16), pgpe(64, 0.1, 0.2, 0.4, 0.1), policy(PolicyKind::Mlp, &[64, 64])),
        TaskName::Waterworld => (trainer(1000, 8, 50, 16), pgpe(64, 0.1, 0.05, 0.1, 0.1), policy(PolicyKind::Mlp, &[32])),
        TaskName::WaterworldMa => (trainer(2000, 8, 100, 4), pgpe(16, 0.1, 0.05, 0.1, 0.1), policy(PolicyKind::Mlp, &[32])),
        TaskName::Mnist => (trainer(3000, 1, 100, 1), pgpe(64, 0.04, 0.02, 0.012, 0.09), policy(PolicyKind::ConvNet, &[])),
        TaskName::Seq2seq => (trainer(5000, 128, 100, 1024), pgpe(128, 0.05, 0.01, 0.02, 0.03), policy(PolicyKind::Seq2Seq, &[64])),
        TaskName::Paint => (trainer(1000, 1, 50, 1), pgpe(64, 0.1, 0.01, 0.02, 0.05), policy(PolicyKind::Identity, &[])),
        TaskName::Sphere => (trainer(1000, 1, 100, 1), pgpe(64, 0.1, 0.01, 0.02, 0.03), policy(PolicyKind::Identity, &[])),
    };
    let pgpe = match task {
        TaskName::Paint => PgpeConfig { center_init: 0.5, ..pgpe },
        TaskName::Mnist | TaskName::Seq2seq => PgpeConfig { optimizer: Optimizer::Adam, ..pgpe },
        _ => pgpe,
    };
    Config { trainer, algorithm: AlgorithmSettings { kind: AlgorithmKind::Pgpe, pgpe }, policy, task: task_settings }
}

/// Typed access to one section's entries, remembering which were used.
struct Section<'a> {
    name: &'static str,
    entries: Vec<&'a Entry>,
    used: Vec<bool>,
}

impl<'a> Section<'a> {
    fn new(name: &'static str, all: &'a [Entry]) -> Self {
        let entries: Vec<&Entry> = all.iter().filter(|e| e.section == name).collect();
        let used = vec![false; entries.len()];
        Section { name, entries, used }
    }

    fn raw(&mut self, key: &str) -> Option<&'a Entry> {
        let i = self.entries.iter().position(|e| e.key == key)?;
        self.used[i] = true;
        Some(self.entries[i])
    }

    fn get<T>(&mut self, key: &str, expected: &'static str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>, ConfigError> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        parse(&e.value).map(Some).ok_or_else(|| ConfigError::Type {
            section: self.name.to_string(),
            key: key.to_string(),
            line: e.line,
            value: e.value.clone(),
            expected,
        })
    }

    fn set<T>(&mut self, key: &str, expected: &'static str, target: &mut T, parse: impl Fn(&str) -> Option<T>) -> Result<(), ConfigError> {
        if let Some(v) = self.get(key, expected, parse)? {
            *target = v;
        }
        Ok(())
    }

    fn finish(self) -> Result<(), ConfigError> {
        for (e, used) in self.entries.iter().zip(&self.used) {
            if !used {
                return Err(ConfigError::UnknownKey { section: self.name.to_string(), key: e.key.clone(), line: e.line });
            }
        }
        Ok(())
    }
}

fn int<T: std::str::FromStr>(s: &str) -> Option<T> {
    s.parse().ok()
}

fn float(s: &str) -> Option<f32> {
    s.parse::<f32>().ok().filter(|v| v.is_finite())
}

fn path(s: &str) -> Option<PathBuf> {
    (!s.is_empty()).then(|| PathBuf::from(s))
}

fn list(s: &str) -> Option<Vec<usize>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|p| p.trim().parse().ok()).collect()
}

fn invalid(section: &str, key: &str, line: Option<usize>, detail: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { section: section.to_string(), key: key.to_string(), line, detail: detail.into() }
}

/// Builds a validated configuration from parsed entries.
pub fn from_entries(entries: &[Entry]) -> Result<Config, ConfigError> {
    let mut task_sec = Section::new("task", entries);
    let mut trainer_sec = Section::new("trainer", entries);
    let name = task_sec
        .get("name", "task name", TaskName::parse)?
        .ok_or(ConfigError::Missing { section: "task".into(), key: "name".into() })?;
    let seed = trainer_sec
        .get("seed", "unsigned integer", int::<u64>)?
        .ok_or(ConfigError::Missing { section: "trainer".into(), key: "seed".into() })?;
    let mut cfg = preset(name, seed);

    let t = &mut cfg.trainer;
    trainer_sec.set("max_iters", "unsigned integer", &mut t.max_iters, int)?;
    trainer_sec.set("repeats", "unsigned integer", &mut t.repeats, int)?;
    trainer_sec.set("test_interval", "unsigned integer", &mut t.test_interval, int)?;
    trainer_sec.set("n_test_rollouts", "unsigned integer", &mut t.n_test_rollouts, int)?;
    if let Some(p) = trainer_sec.get("log_path", "path", path)? {
        t.log_path = Some(p);
    }
    if let Some(p) = trainer_sec.get("checkpoint_path", "path", path)? {
        t.checkpoint_path = Some(p);
    }
    for (key, zero) in [("max_iters", t.max_iters == 0), ("repeats", t.repeats == 0), ("test_interval", t.test_interval == 0), ("n_test_rollouts", t.n_test_rollouts == 0)] {
        if zero {
            let line = trainer_sec.raw(key).map(|e| e.line);
            return Err(invalid("trainer", key, line, format!("{key} must be >= 1")));
        }
    }
    trainer_sec.finish()?;

    let mut alg = Section::new("algorithm", entries);
    if let Some(kind) = alg.get("name", "pgpe or random_search", |s| match s {
        "pgpe" => Some(AlgorithmKind::Pgpe),
        "random_search" => Some(AlgorithmKind::RandomSearch),
        _ => None,
    })? {
        cfg.algorithm.kind = kind;
    }
    let p = &mut cfg.algorithm.pgpe;
    alg.set("pop_size", "unsigned integer", &mut p.pop_size, int)?;
    alg.set("sigma_init", "number", &mut p.sigma_init, float)?;
    alg.set("center_lr", "number", &mut p.center_lr, float)?;
    alg.set("sigma_lr", "number", &mut p.sigma_lr, float)?;
    alg.set("max_speed", "number", &mut p.max_speed, float)?;
    alg.set("momentum", "number", &mut p.momentum, float)?;
    alg.set("sigma_max_change", "number", &mut p.sigma_max_change, float)?;
    alg.set("center_init", "number", &mut p.center_init, float)?;
    alg.set("optimizer", "clipup, adam or sgd", &mut p.optimizer, |s| match s {
        "clipup" => Some(Optimizer::ClipUp),
        "adam" => Some(Optimizer::Adam),
        "sgd" => Some(Optimizer::Sgd),
        _ => None,
    })?;
    alg.set("shaping", "centered_rank or raw", &mut p.shaping, |s| match s {
        "centered_rank" => Some(Shaping::CenteredRank),
        "raw" => Some(Shaping::Raw),
        _ => None,
    })?;
    if cfg.algorithm.kind == AlgorithmKind::Pgpe {
        if let Err(e) = p.validate() {
            let msg = e.to_string();
            let key = ["pop_size", "sigma_init", "center_lr", "sigma_lr", "max_speed", "momentum", "sigma_max_change", "center_init"]
                .into_iter()
                .find(|k| msg.contains(k))
                .unwrap_or("name");
            let line = alg.raw(key).map(|e| e.line);
            let detail = if key == "pop_size" { format!("pop_size must be even (got {})", p.pop_size) } else { msg };
            return Err(invalid("algorithm", key, line, detail));
        }
    } else if p.pop_size == 0 || !(p.sigma_init > 0.0) {
        return Err(invalid("algorithm", "pop_size", alg.raw("pop_size").map(|e| e.line), "random search needs pop_size >= 1 and sigma_init > 0"));
    }
    alg.finish()?;

    let mut pol = Section::new("policy", entries);
    pol.set("type", "mlp, lstm, convnet, seq2seq or identity", &mut cfg.policy.kind, PolicyKind::parse)?;
    pol.set("hidden", "comma-separated sizes", &mut cfg.policy.hidden, list)?;
    pol.set("output_activation", "tanh, identity or relu", &mut cfg.policy.output_activation, Activation::parse)?;
    check_policy(&cfg, &mut pol)?;
    pol.finish()?;

    let ts = &mut cfg.task;
    let applies = |key: &str| -> bool {
        match key {
            "digits" => name == TaskName::Seq2seq,
            "batch_size" | "train_size" | "data_dir" => name == TaskName::Mnist,
            "width" | "height" | "target" => name == TaskName::Paint,
            "dim" => name == TaskName::Sphere,
            _ => true,
        }
    };
    task_sec.set("digits", "unsigned integer", &mut ts.digits, int)?;
    task_sec.set("batch_size", "unsigned integer", &mut ts.batch_size, int)?;
    task_sec.set("train_size", "unsigned integer", &mut ts.train_size, int)?;
    task_sec.set("data_dir", "path", &mut ts.data_dir, path)?;
    task_sec.set("width", "unsigned integer", &mut ts.width, int)?;
    task_sec.set("height", "unsigned integer", &mut ts.height, int)?;
    task_sec.set("dim", "unsigned integer", &mut ts.dim, int)?;
    if let Some(p) = task_sec.get("target", "path", path)? {
        ts.target = Some(p);
    }
    for e in entries.iter().filter(|e| e.section == "task") {
        if !applies(&e.key) {
            return Err(invalid("task", &e.key, Some(e.line), format!("{} does not apply to task {name}", e.key)));
        }
    }
    for (key, value) in [("digits", ts.digits), ("batch_size", ts.batch_size), ("train_size", ts.train_size), ("width", ts.width), ("height", ts.height), ("dim", ts.dim)] {
        if value == 0 {
            let line = task_sec.raw(key).map(|e| e.line);
            return Err(invalid("task", key, line, format!("{key} must be >= 1")));
        }
    }
    if ts.digits > 9 {
        return Err(invalid("task", "digits", task_sec.raw("digits").map(|e| e.line), "digits must be <= 9"));
    }
    if ts.batch_size > ts.train_size {
        return Err(invalid("task", "batch_size", task_sec.raw("batch_size").map(|e| e.line), "batch_size must not exceed train_size"));
    }
    task_sec.finish()?;
    Ok(cfg)
}

fn check_policy(cfg: &Config, sec: &mut Section) -> Result<(), ConfigError> {
    let task = cfg.task.name;
    let kind = cfg.policy.kind;
    let ok = match task {
        TaskName::CartpoleEasy | TaskName::CartpoleHard | TaskName::Waterworld | TaskName::WaterworldMa => {
            matches!(kind, PolicyKind::Mlp | PolicyKind::Lstm)
        }
        TaskName::Mnist => kind == PolicyKind::ConvNet,
        TaskName::Seq2seq => kind == PolicyKind::Seq2Seq,
        TaskName::Paint | TaskName::Sphere => kind == PolicyKind::Identity,
    };
    let line = |sec: &mut Section, key| sec.raw(key).map(|e: &Entry| e.line);
    if !ok {
        return Err(invalid("policy", "type", line(sec, "type"), format!("policy {} cannot drive task {task}", kind.as_str())));
    }
    let hidden = &cfg.policy.hidden;
    let needs_one = matches!(kind, PolicyKind::Lstm | PolicyKind::Seq2Seq);
    if (needs_one && hidden.len() != 1) || hidden.contains(&0) {
        return Err(invalid("policy", "hidden", line(sec, "hidden"), format!("{} needs {} positive hidden size(s)", kind.as_str(), if needs_one { "exactly one" } else { "only" })));
    }
    Ok(())
}

pub fn parse_config_str(text: &str) -> Result<Config, ConfigError> {
    from_entries(&parse_entries(text)?)
}

pub fn parse_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config_str(&text)
}

impl Config {
    /// The fully resolved configuration, one `section.key = value` per line.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        let t = &self.trainer;
        put("trainer.seed", t.seed.to_string());
        put("trainer.max_iters", t.max_iters.to_string());
        put("trainer.repeats", t.repeats.to_string());
        put("trainer.test_interval", t.test_interval.to_string());
        put("trainer.n_test_rollouts", t.n_test_rollouts.to_string());
        put("trainer.log_path", t.log_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        put("trainer.checkpoint_path", t.checkpoint_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        let a = &self.algorithm.pgpe;
        put("algorithm.name", match self.algorithm.kind {
            AlgorithmKind::Pgpe => "pgpe".into(),
            AlgorithmKind::RandomSearch => "random_search".into(),
        });
        put("algorithm.pop_size", a.pop_size.to_string());
        put("algorithm.sigma_init", a.sigma_init.to_string());
        put("algorithm.center_lr", a.center_lr.to_string());
        put("algorithm.sigma_lr", a.sigma_lr.to_string());
        put("algorithm.max_speed", a.max_speed.to_string());
        put("algorithm.momentum", a.momentum.to_string());
        put("algorithm.sigma_max_change", a.sigma_max_change.to_string());
        put("algorithm.center_init", a.center_init.to_string());
        put("algorithm.optimizer", format!("{:?}", a.optimizer).to_lowercase());
        put("algorithm.shaping", match a.shaping {
            Shaping::CenteredRank => "centered_rank".into(),
            Shaping::Raw => "raw".into(),
        });
        put("policy.type", self.policy.kind.as_str().into());
        put("policy.hidden", self.policy.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","));
        put("policy.output_activation", self.policy.output_activation.name().into());
        let s = &self.task;
        put("task.name", s.name.to_string());
        match s.name {
            TaskName::Seq2seq => put("task.digits", s.digits.to_string()),
            TaskName::Mnist => {
                put("task.batch_size", s.batch_size.to_string());
                put("task.train_size", s.train_size.to_string());
                put("task.data_dir", s.data_dir.display().to_string());
            }
            TaskName::Paint => {
                put("task.width", s.width.to_string());
                put("task.height", s.height.to_string());
                put("task.target", s.target.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "procedural".into()));
            }
            TaskName::Sphere => put("task.dim", s.dim.to_string()),
            _ => {}
        }
        m
    }
}

//! Training runs on synthetic tasks: `key=value` configuration and the
//! pretrain-then-train protocol.

use std::fmt::Write as _;

use amwc_core::seed::derive;
use amwc_core::train::{
    evaluate, gen_task, pretrain_cross_entropy, train, IterationLog, LinearCostModel, LossKind, Optimizer,
    SyntheticTask, TaskSpec, TrainConfig,
};
use amwc_core::PerturbConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: unknown config key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: expected `key=value`")]
    Syntax { line: usize },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    Value { line: usize, key: String, value: String },
}

/// Everything a training run needs besides the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: TaskSpec,
    pub train_tasks: usize,
    pub eval_tasks: usize,
    pub pretrain_iterations: usize,
    pub pretrain_lr: f64,
    pub init_node_scale: f64,
    pub init_edge_scale: f64,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: TaskSpec::small(0.6),
            train_tasks: 64,
            eval_tasks: 16,
            pretrain_iterations: 100,
            pretrain_lr: 1.0,
            init_node_scale: 1.0,
            init_edge_scale: 0.1,
            train: TrainConfig { learning_rate: 0.01, ..TrainConfig::default() },
        }
    }
}

pub const KEYS: &[&str] = &[
    "seed",
    "lambda_min",
    "lambda_max",
    "n",
    "w",
    "lr",
    "iterations",
    "batch_size",
    "dropout",
    "loss",
    "optimizer",
    "lift_ground_truth",
    "height",
    "width",
    "instances",
    "thing_classes",
    "stuff_classes",
    "noise",
    "distances",
    "train_tasks",
    "eval_tasks",
    "pretrain_iterations",
    "pretrain_lr",
    "init_node_scale",
    "init_edge_scale",
];

impl RunConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = || ConfigError::Value { line, key: key.to_owned(), value: value.to_owned() };
        fn num<T: std::str::FromStr>(v: &str, bad: impl Fn() -> ConfigError) -> Result<T, ConfigError> {
            v.parse().map_err(|_| bad())
        }
        let t = &mut self.train;
        match key {
            "seed" => t.seed = num(value, bad)?,
            "lambda_min" => t.perturb.lambda_min = num(value, bad)?,
            "lambda_max" => t.perturb.lambda_max = num(value, bad)?,
            "n" => t.perturb.samples = num(value, bad)?,
            "w" => t.loss_scale = num(value, bad)?,
            "lr" => t.learning_rate = num(value, bad)?,
            "iterations" => t.iterations = num(value, bad)?,
            "batch_size" => t.batch_size = num(value, bad)?,
            "dropout" => t.dropout = num(value, bad)?,
            "loss" => {
                t.loss = match value {
                    "surrogate" => LossKind::Surrogate,
                    "node" => LossKind::Node,
                    "edge" => LossKind::Edge,
                    _ => return Err(bad()),
                }
            }
            "optimizer" => {
                t.optimizer = match value {
                    "sgd" => Optimizer::Sgd,
                    "adam" => Optimizer::adam(),
                    _ => return Err(bad()),
                }
            }
            "lift_ground_truth" => t.lift_ground_truth = num(value, bad)?,
            "height" => self.task.height = num(value, bad)?,
            "width" => self.task.width = num(value, bad)?,
            "instances" => self.task.num_instances = num(value, bad)?,
            "thing_classes" => self.task.thing_classes = num(value, bad)?,
            "stuff_classes" => self.task.stuff_classes = num(value, bad)?,
            "noise" => self.task.noise = num(value, bad)?,
            "distances" => {
                self.task.distances =
                    value.split(',').map(|d| d.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad())?
            }
            "train_tasks" => self.train_tasks = num(value, bad)?,
            "eval_tasks" => self.eval_tasks = num(value, bad)?,
            "pretrain_iterations" => self.pretrain_iterations = num(value, bad)?,
            "pretrain_lr" => self.pretrain_lr = num(value, bad)?,
            "init_node_scale" => self.init_node_scale = num(value, bad)?,
            "init_edge_scale" => self.init_edge_scale = num(value, bad)?,
            _ => return Err(ConfigError::UnknownKey { line, key: key.to_owned() }),
        }
        Ok(())
    }

    /// Defaults overridden by the lines of `text`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (key, value) = s.split_once('=').ok_or(ConfigError::Syntax { line })?;
            cfg.set(key.trim(), value.trim(), line)?;
        }
        Ok(cfg)
    }

    /// Full configuration as `key=value` lines, accepted by `parse`.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let loss = match t.loss {
            LossKind::Surrogate => "surrogate",
            LossKind::Node => "node",
            LossKind::Edge => "edge",
        };
        let optimizer = match t.optimizer {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam { .. } => "adam",
        };
        let distances: Vec<String> = self.task.distances.iter().map(|d| d.to_string()).collect();
        let mut out = String::new();
        let values: [(&str, String); 25] = [
            ("seed", t.seed.to_string()),
            ("lambda_min", format!("{:?}", t.perturb.lambda_min)),
            ("lambda_max", format!("{:?}", t.perturb.lambda_max)),
            ("n", t.perturb.samples.to_string()),
            ("w", format!("{:?}", t.loss_scale)),
            ("lr", format!("{:?}", t.learning_rate)),
            ("iterations", t.iterations.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("dropout", format!("{:?}", t.dropout)),
            ("loss", loss.to_owned()),
            ("optimizer", optimizer.to_owned()),
            ("lift_ground_truth", t.lift_ground_truth.to_string()),
            ("height", self.task.height.to_string()),
            ("width", self.task.width.to_string()),
            ("instances", self.task.num_instances.to_string()),
            ("thing_classes", self.task.thing_classes.to_string()),
            ("stuff_classes", self.task.stuff_classes.to_string()),
            ("noise", format!("{:?}", self.task.noise)),
            ("distances", distances.join(",")),
            ("train_tasks", self.train_tasks.to_string()),
            ("eval_tasks", self.eval_tasks.to_string()),
            ("pretrain_iterations", self.pretrain_iterations.to_string()),
            ("pretrain_lr", format!("{:?}", self.pretrain_lr)),
            ("init_node_scale", format!("{:?}", self.init_node_scale)),
            ("init_edge_scale", format!("{:?}", self.init_edge_scale)),
        ];
        for (k, v) in values {
            writeln!(out, "{k}={v}").unwrap();
        }
        out
    }

    pub fn perturb(&self) -> &PerturbConfig {
        &self.train.perturb
    }
}

/// Task `index` of a run: training tasks use stream 0, evaluation stream 1.
pub fn task_seed(seed: u64, stream: u64, index: usize) -> u64 {
    derive(seed, &[stream, index as u64])
}

pub fn generate_tasks(cfg: &RunConfig) -> amwc_core::Result<(Vec<SyntheticTask>, Vec<SyntheticTask>)> {
    let seed = cfg.train.seed;
    let train_set = (0..cfg.train_tasks).map(|i| gen_task(task_seed(seed, 0, i), &cfg.task)).collect::<Result<_, _>>()?;
    let eval_set = (0..cfg.eval_tasks).map(|i| gen_task(task_seed(seed, 1, i), &cfg.task)).collect::<Result<_, _>>()?;
    Ok((train_set, eval_set))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Model after cross-entropy pretraining, the starting point of training.
    pub initial_model: LinearCostModel,
    pub final_model: LinearCostModel,
    pub baseline_pq: f64,
    pub final_pq: f64,
    pub log: Vec<IterationLog>,
}

impl RunResult {
    pub fn improvement(&self) -> f64 {
        self.final_pq - self.baseline_pq
    }

    /// Mean logged loss over the last `window` iterations.
    pub fn final_loss(&self, window: usize) -> f64 {
        let tail = &self.log[self.log.len().saturating_sub(window)..];
        tail.iter().map(|l| l.loss).sum::<f64>() / tail.len() as f64
    }

    pub fn log_text(&self) -> String {
        self.log.iter().map(|l| format!("{l}\n")).collect()
    }
}

/// Generates tasks, pretrains by cross-entropy, trains, and evaluates on the
/// held-out tasks before and after.
pub fn run(cfg: &RunConfig) -> amwc_core::Result<RunResult> {
    let (train_set, eval_set) = generate_tasks(cfg)?;
    let k = cfg.task.num_classes();
    let init = LinearCostModel::identity(k, cfg.task.distances.len(), cfg.init_node_scale, cfg.init_edge_scale);
    let initial_model = pretrain_cross_entropy(&train_set, &init, cfg.pretrain_iterations, cfg.pretrain_lr)?;
    let baseline_pq = evaluate(&eval_set, &initial_model)?;
    let (final_model, log) = train(&train_set, &eval_set, &initial_model, &cfg.train)?;
    let final_pq = evaluate(&eval_set, &final_model)?;
    Ok(RunResult { initial_model, final_model, baseline_pq, final_pq, log })
}

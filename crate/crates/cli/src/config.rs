//! Run configuration: defaults, flat `key = value` files, and the manifest
//! written next to every run's outputs. A manifest is itself a valid config
//! file, so `--config <manifest>` replays a run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use iedl::loss::Objective;
use iedl::net::{OptimizerKind, TrainConfig};

use crate::error::{io_err, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Synthetic,
    Idx,
}

impl DatasetKind {
    fn name(self) -> &'static str {
        match self {
            DatasetKind::Synthetic => "synthetic",
            DatasetKind::Idx => "idx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Confidence,
    Ood,
    Noisy,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Confidence, Task::Ood, Task::Noisy];

    pub fn name(self) -> &'static str {
        match self {
            Task::Confidence => "confidence",
            Task::Ood => "ood",
            Task::Noisy => "noisy",
        }
    }

    pub fn parse_list(s: &str) -> CliResult<Vec<Task>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let task = Task::ALL.into_iter().find(|t| t.name() == part).ok_or_else(|| CliError::UnknownTask {
                task: part.to_string(),
                valid: Task::ALL.map(Task::name).join(", "),
            })?;
            if !out.contains(&task) {
                out.push(task);
            }
        }
        if out.is_empty() {
            return Err(CliError::Usage("tasks list is empty".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Objective,
    pub lambda1: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    /// 0 disables early stopping.
    pub patience: usize,
    pub hidden: Vec<usize>,
    pub seeds: Vec<u64>,

    pub dataset: DatasetKind,
    pub val_fraction: f64,
    pub blob_sigma: f64,
    pub n_per_class: usize,
    pub test_per_class: usize,
    pub ring_radius: f64,
    pub ring_sigma: f64,
    /// 0 means "as many as the ID test set".
    pub ood_n: usize,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub ood_images: Option<PathBuf>,
    pub classes: usize,
    /// Stratified training subset size; 0 keeps everything.
    pub subset: usize,
    pub ood_equal_size: bool,

    pub tasks: Vec<Task>,
    pub noise_sigma: f64,
    pub out: PathBuf,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            mode: t.objective,
            lambda1: t.lambda1,
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.learning_rate,
            optimizer: t.optimizer,
            patience: t.patience.unwrap_or(0),
            hidden: iedl::net::DEFAULT_HIDDEN.to_vec(),
            seeds: vec![0],
            dataset: DatasetKind::Synthetic,
            val_fraction: 0.2,
            blob_sigma: 0.1,
            n_per_class: 200,
            test_per_class: 200,
            ring_radius: 3.0,
            ring_sigma: 0.05,
            ood_n: 0,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            ood_images: None,
            classes: 10,
            subset: 0,
            ood_equal_size: true,
            tasks: Task::ALL.to_vec(),
            noise_sigma: iedl::eval::DEFAULT_NOISE_SIGMA,
            out: PathBuf::from("iedl-run"),
            checkpoint_dir: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| CliError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let v = value.trim();
        match key {
            "mode" => self.mode = parse(key, v)?,
            "lambda1" => self.lambda1 = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "optimizer" => self.optimizer = parse(key, v)?,
            "patience" => self.patience = parse(key, v)?,
            "hidden" => self.hidden = parse_list(key, v)?,
            "seeds" => self.seeds = parse_list(key, v)?,
            "dataset" => {
                self.dataset = match v {
                    "synthetic" => DatasetKind::Synthetic,
                    "idx" => DatasetKind::Idx,
                    _ => {
                        return Err(CliError::BadValue {
                            key: key.into(),
                            value: v.into(),
                            reason: "expected synthetic or idx".into(),
                        })
                    }
                }
            }
            "val_fraction" => self.val_fraction = parse(key, v)?,
            "blob_sigma" => self.blob_sigma = parse(key, v)?,
            "n_per_class" => self.n_per_class = parse(key, v)?,
            "test_per_class" => self.test_per_class = parse(key, v)?,
            "ring_radius" => self.ring_radius = parse(key, v)?,
            "ring_sigma" => self.ring_sigma = parse(key, v)?,
            "ood_n" => self.ood_n = parse(key, v)?,
            "train_images" => self.train_images = opt_path(v),
            "train_labels" => self.train_labels = opt_path(v),
            "test_images" => self.test_images = opt_path(v),
            "test_labels" => self.test_labels = opt_path(v),
            "ood_images" => self.ood_images = opt_path(v),
            "classes" => self.classes = parse(key, v)?,
            "subset" => self.subset = parse(key, v)?,
            "ood_equal_size" => self.ood_equal_size = parse(key, v)?,
            "tasks" => self.tasks = Task::parse_list(v)?,
            "noise_sigma" => self.noise_sigma = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "checkpoint_dir" => self.checkpoint_dir = opt_path(v),
            // Written into manifests; carries no setting.
            "command" => {}
            _ => return Err(CliError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("mode", self.mode.to_string()),
            ("lambda1", self.lambda1.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr", self.lr.to_string()),
            ("optimizer", self.optimizer.name().to_string()),
            ("patience", self.patience.to_string()),
            ("hidden", join(&self.hidden)),
            ("seeds", join(&self.seeds)),
            ("dataset", self.dataset.name().to_string()),
            ("val_fraction", self.val_fraction.to_string()),
            ("blob_sigma", self.blob_sigma.to_string()),
            ("n_per_class", self.n_per_class.to_string()),
            ("test_per_class", self.test_per_class.to_string()),
            ("ring_radius", self.ring_radius.to_string()),
            ("ring_sigma", self.ring_sigma.to_string()),
            ("ood_n", self.ood_n.to_string()),
            ("train_images", show_path(&self.train_images)),
            ("train_labels", show_path(&self.train_labels)),
            ("test_images", show_path(&self.test_images)),
            ("test_labels", show_path(&self.test_labels)),
            ("ood_images", show_path(&self.ood_images)),
            ("classes", self.classes.to_string()),
            ("subset", self.subset.to_string()),
            ("ood_equal_size", self.ood_equal_size.to_string()),
            ("tasks", self.tasks.iter().map(|t| t.name()).collect::<Vec<_>>().join(",")),
            ("noise_sigma", self.noise_sigma.to_string()),
            ("out", self.out.display().to_string()),
            ("checkpoint_dir", show_path(&self.checkpoint_dir)),
        ]
    }

    /// Applies a flat `key = value` file; `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::ConfigSyntax {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        if !path.exists() {
            return Err(CliError::MissingPath(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |key: &str, value: String, reason: &str| CliError::BadValue {
            key: key.into(),
            value,
            reason: reason.into(),
        };
        if self.seeds.is_empty() {
            return Err(bad("seeds", String::new(), "need at least one seed"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(bad("val_fraction", self.val_fraction.to_string(), "must lie in (0, 1)"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(bad("hidden", join(&self.hidden), "layer widths must be >= 1"));
        }
        self.train_config(0)
            .validate()
            .map_err(|e| CliError::Usage(format!("invalid training settings: {e}")))
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            lambda1: self.lambda1,
            objective: self.mode,
            optimizer: self.optimizer,
            patience: (self.patience > 0).then_some(self.patience),
            seed,
        }
    }

    pub fn manifest(&self, command: &str) -> String {
        let mut out = format!("command = {command}\n");
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

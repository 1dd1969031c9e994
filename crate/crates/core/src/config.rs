//! Run configuration: TOML with flat dotted keys, strict validation,
//! `key=value` overrides and a canonical resolved form.
//!
//! ```toml
//! task = "node"
//! dataset = "data/cora"
//! epochs = 100
//! model.mask_ratio = 0.5
//! [loss]
//! alpha = 0.1
//! ```
//!
//! Section tables and dotted keys are interchangeable. Keys not listed in
//! [`RunConfig::canonical`] are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Value;

use crate::compute::{AdamConfig, ReadoutMode};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::objective::{LossConfig, SceScope};
use crate::sampler::SamplerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Node,
    Edge,
    Graph,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Node => "node",
            Task::Edge => "edge",
            Task::Graph => "graph",
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node" => Ok(Task::Node),
            "edge" => Ok(Task::Edge),
            "graph" => Ok(Task::Graph),
            other => Err(Error::Config {
                key: "task".into(),
                msg: format!("unknown task `{other}` (node, edge, graph)"),
            }),
        }
    }
}

/// Model hyperparameters; the input width comes from the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub d_h: usize,
    pub d_disc: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub disc_layers: usize,
    pub readout: ReadoutMode,
    pub mask_ratio: f64,
    pub remask_decoder: bool,
    pub prelu_slope: f64,
}

impl ModelSettings {
    pub fn with_input_dim(&self, d_f: usize) -> ModelConfig {
        ModelConfig {
            d_f,
            d_h: self.d_h,
            d_disc: self.d_disc,
            enc_layers: self.enc_layers,
            dec_layers: self.dec_layers,
            disc_layers: self.disc_layers,
            readout: self.readout,
            mask_ratio: self.mask_ratio,
            remask_decoder: self.remask_decoder,
            prelu_slope: self.prelu_slope,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub lr_gen: f64,
    pub lr_disc: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl OptimConfig {
    pub fn generator(&self) -> AdamConfig {
        self.adam(self.lr_gen)
    }

    pub fn discriminator(&self) -> AdamConfig {
        self.adam(self.lr_disc)
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

/// Downstream probe settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Repetitions for node and edge tasks.
    pub seeds: usize,
    /// Cross-validation folds for graph tasks.
    pub folds: usize,
    pub probe_epochs: usize,
    pub probe_lr: f64,
    pub probe_weight_decay: f64,
    /// Subgraphs drawn per node; embeddings are averaged.
    pub samples_per_node: usize,
    /// Held-out edge fractions for the link split.
    pub val_fraction: f64,
    pub test_fraction: f64,
    /// Append the seed rows' encodings to the pooled subgraph embedding.
    pub seed_features: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    pub dataset: String,
    pub master_seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub disc_steps_per_gen: usize,
    /// Validation-probe period in epochs for best-checkpoint selection; 0 disables.
    pub eval_every: usize,
    /// Degree clip for the one-hot degree features of featureless graphs.
    pub max_degree: usize,
    pub sampler: SamplerConfig,
    pub model: ModelSettings,
    pub loss: LossConfig,
    pub optim: OptimConfig,
    pub eval: EvalConfig,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

/// Parses TOML text into a flat `dotted.key -> value` map.
pub fn parse_flat(text: &str) -> Result<BTreeMap<String, Value>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            file: "config".into(),
            line,
            msg: e.message().to_string(),
        }
    })?;
    let mut out = BTreeMap::new();
    flatten("", &table, &mut out);
    Ok(out)
}

/// Parses a `key=value` override. The value is read as a TOML literal and
/// falls back to a bare string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::Config {
        key: s.to_string(),
        msg: "override must look like key=value".into(),
    })?;
    let k = k.trim().to_string();
    let v = v.trim();
    let value = format!("x = {v}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|t| t.get("x").cloned())
        .unwrap_or_else(|| Value::String(v.to_string()));
    Ok((k, value))
}

struct Reader {
    map: BTreeMap<String, Value>,
}

impl Reader {
    fn err(key: &str, msg: impl Into<String>) -> Error {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.map.remove(key)
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(Value::Float(f)) => Ok(f),
            Some(Value::Integer(i)) => Ok(i as f64),
            Some(v) => Err(Self::err(key, format!("expected a number, got {v}"))),
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if i >= 0 => Ok(i as u64),
            Some(v) => Err(Self::err(key, format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        self.u64(key, default as u64).map(|v| v as usize)
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(b),
            Some(v) => Err(Self::err(key, format!("expected true or false, got {v}"))),
        }
    }

    fn string(&mut self, key: &str, default: Option<&str>) -> Result<String> {
        match self.take(key) {
            None => default.map(str::to_string).ok_or_else(|| Self::err(key, "required key is missing")),
            Some(Value::String(s)) => Ok(s),
            Some(v) => Err(Self::err(key, format!("expected a string, got {v}"))),
        }
    }

    fn parsed<T: FromStr<Err = Error>>(&mut self, key: &str, default: &str) -> Result<T> {
        let s = self.string(key, Some(default))?;
        s.parse().map_err(|e: Error| Self::err(key, e.to_string()))
    }
}

impl RunConfig {
    /// Builds a config from a flat key map, filling task-dependent defaults.
    pub fn from_flat(map: BTreeMap<String, Value>) -> Result<Self> {
        let mut r = Reader { map };
        let task: Task = r.string("task", None)?.parse()?;
        let dataset = r.string("dataset", None)?;
        let target_default = if task == Task::Edge { 20 } else { 16 };
        let seed_default = match task {
            Task::Node => 512,
            Task::Edge => 1024,
            Task::Graph => 0,
        };
        let target_size = r.usize("sampler.target_size", target_default)?;
        let cfg = RunConfig {
            task,
            dataset,
            master_seed: r.u64("master_seed", 0)?,
            epochs: r.usize("epochs", 100)?,
            batch_size: r.usize("batch_size", 32)?,
            disc_steps_per_gen: r.usize("disc_steps_per_gen", 1)?,
            eval_every: r.usize("eval_every", 0)?,
            max_degree: r.usize("max_degree", crate::graph::DEFAULT_MAX_DEGREE)?,
            sampler: SamplerConfig {
                restart_prob: r.f64("sampler.restart_prob", 0.5)?,
                target_size,
                max_steps: r.usize("sampler.max_steps", 100 * target_size)?,
                seed_count: r.usize("sampler.seed_count", seed_default)?,
            },
            model: ModelSettings {
                d_h: r.usize("model.d_h", if task == Task::Graph { 512 } else { 256 })?,
                d_disc: r.usize("model.d_disc", 64)?,
                enc_layers: r.usize("model.enc_layers", 2)?,
                dec_layers: r.usize("model.dec_layers", 1)?,
                disc_layers: r.usize("model.disc_layers", 1)?,
                readout: r.parsed("model.readout", "mean")?,
                mask_ratio: r.f64("model.mask_ratio", 0.5)?,
                remask_decoder: r.bool("model.remask_decoder", true)?,
                prelu_slope: r.f64("model.prelu_slope", 0.25)?,
            },
            loss: LossConfig {
                gamma: r.f64("loss.gamma", 2.0)?,
                alpha: r.f64("loss.alpha", 0.1)?,
                sce_scope: r.parsed::<SceScope>("loss.sce_scope", "masked_only")?,
                reconstruction: r.bool("loss.reconstruction", true)?,
            },
            optim: OptimConfig {
                lr_gen: r.f64("optim.lr_gen", 1e-3)?,
                lr_disc: r.f64("optim.lr_disc", 5e-4)?,
                beta1: r.f64("optim.beta1", 0.9)?,
                beta2: r.f64("optim.beta2", 0.999)?,
                eps: r.f64("optim.eps", 1e-8)?,
                weight_decay: r.f64("optim.weight_decay", 0.0)?,
            },
            eval: EvalConfig {
                seeds: r.usize("eval.seeds", 5)?,
                folds: r.usize("eval.folds", 10)?,
                probe_epochs: r.usize("eval.probe_epochs", 300)?,
                probe_lr: r.f64("eval.probe_lr", 0.01)?,
                probe_weight_decay: r.f64("eval.probe_weight_decay", 1e-4)?,
                samples_per_node: r.usize("eval.samples_per_node", 1)?,
                val_fraction: r.f64("eval.val_fraction", 0.05)?,
                test_fraction: r.f64("eval.test_fraction", 0.10)?,
                seed_features: r.bool("eval.seed_features", task == Task::Edge)?,
            },
        };
        if let Some(key) = r.map.keys().next() {
            return Err(Error::Config {
                key: key.clone(),
                msg: "unknown key".into(),
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str, overrides: &[(String, Value)]) -> Result<Self> {
        let mut map = parse_flat(text)?;
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::from_flat(map)
    }

    pub fn load(path: &Path, overrides: &[(String, Value)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, overrides).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                file: path.display().to_string(),
                line,
                msg,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::Config { key: key.into(), msg: msg.into() });
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        for (key, lr) in [("optim.lr_gen", self.optim.lr_gen), ("optim.lr_disc", self.optim.lr_disc)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return bad(key, "must be a finite non-negative number");
            }
        }
        if !(0.0..1.0).contains(&self.optim.beta1) || !(0.0..1.0).contains(&self.optim.beta2) {
            return bad("optim.beta1", "moment decay rates must lie in [0, 1)");
        }
        if !(self.optim.eps > 0.0) {
            return bad("optim.eps", "must be positive");
        }
        if self.eval.seeds == 0 {
            return bad("eval.seeds", "must be at least 1");
        }
        if self.eval.folds < 2 {
            return bad("eval.folds", "must be at least 2");
        }
        if self.eval.samples_per_node == 0 {
            return bad("eval.samples_per_node", "must be at least 1");
        }
        let (v, t) = (self.eval.val_fraction, self.eval.test_fraction);
        if !(v > 0.0 && t > 0.0 && v + t < 1.0) {
            return bad("eval.val_fraction", "edge split fractions must be positive and sum below 1");
        }
        self.sampler.validate()?;
        self.model.with_input_dim(1).validate()?;
        self.loss.validate()
    }

    /// Every key with its resolved value, one `key = value` line each,
    /// sorted. Feeding this text back reproduces the config exactly.
    pub fn canonical(&self) -> String {
        let mut kv: Vec<(&str, Value)> = vec![
            ("task", Value::String(self.task.as_str().into())),
            ("dataset", Value::String(self.dataset.clone())),
            ("master_seed", Value::Integer(self.master_seed as i64)),
            ("epochs", int(self.epochs)),
            ("batch_size", int(self.batch_size)),
            ("disc_steps_per_gen", int(self.disc_steps_per_gen)),
            ("eval_every", int(self.eval_every)),
            ("max_degree", int(self.max_degree)),
            ("sampler.restart_prob", Value::Float(self.sampler.restart_prob)),
            ("sampler.target_size", int(self.sampler.target_size)),
            ("sampler.max_steps", int(self.sampler.max_steps)),
            ("sampler.seed_count", int(self.sampler.seed_count)),
            ("model.d_h", int(self.model.d_h)),
            ("model.d_disc", int(self.model.d_disc)),
            ("model.enc_layers", int(self.model.enc_layers)),
            ("model.dec_layers", int(self.model.dec_layers)),
            ("model.disc_layers", int(self.model.disc_layers)),
            ("model.readout", Value::String(self.model.readout.as_str().into())),
            ("model.mask_ratio", Value::Float(self.model.mask_ratio)),
            ("model.remask_decoder", Value::Boolean(self.model.remask_decoder)),
            ("model.prelu_slope", Value::Float(self.model.prelu_slope)),
            ("loss.gamma", Value::Float(self.loss.gamma)),
            ("loss.alpha", Value::Float(self.loss.alpha)),
            ("loss.sce_scope", Value::String(self.loss.sce_scope.as_str().into())),
            ("loss.reconstruction", Value::Boolean(self.loss.reconstruction)),
            ("optim.lr_gen", Value::Float(self.optim.lr_gen)),
            ("optim.lr_disc", Value::Float(self.optim.lr_disc)),
            ("optim.beta1", Value::Float(self.optim.beta1)),
            ("optim.beta2", Value::Float(self.optim.beta2)),
            ("optim.eps", Value::Float(self.optim.eps)),
            ("optim.weight_decay", Value::Float(self.optim.weight_decay)),
            ("eval.seeds", int(self.eval.seeds)),
            ("eval.folds", int(self.eval.folds)),
            ("eval.probe_epochs", int(self.eval.probe_epochs)),
            ("eval.probe_lr", Value::Float(self.eval.probe_lr)),
            ("eval.probe_weight_decay", Value::Float(self.eval.probe_weight_decay)),
            ("eval.samples_per_node", int(self.eval.samples_per_node)),
            ("eval.val_fraction", Value::Float(self.eval.val_fraction)),
            ("eval.test_fraction", Value::Float(self.eval.test_fraction)),
            ("eval.seed_features", Value::Boolean(self.eval.seed_features)),
        ];
        kv.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = String::new();
        for (k, v) in kv {
            writeln!(out, "{k} = {v}").expect("string write");
        }
        out
    }

    /// Hex SHA-256 of [`RunConfig::canonical`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn hash_bytes(&self) -> [u8; 32] {
        Sha256::digest(self.canonical().as_bytes()).into()
    }
}

fn int(v: usize) -> Value {
    Value::Integer(v as i64)
}

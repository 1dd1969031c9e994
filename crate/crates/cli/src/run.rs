//! Orchestration of training, evaluation, ablations and the mask sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use amgae_core::config::{RunConfig, Task};
use amgae_core::eval::{eval_graph_classification, eval_link_prediction, eval_node_classification, link_split, EvalReport};
use amgae_core::graph::{load_graph_dataset_with, load_node_dataset, Graph, GraphCollection};
use amgae_core::model::ModelParams;
use amgae_core::rng::RngStream;
use amgae_core::sampler::{EdgeSplit, EdgeSubgraphSet};
use amgae_core::trainer::{decode_checkpoint, encode_checkpoint, fit, load_checkpoint, TrainData, TrainState};
use amgae_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::output::{resolve_dataset, write_atomic};

/// A loaded dataset in the form its task needs.
pub enum Dataset {
    Node(Graph),
    Edge { split: EdgeSplit },
    Graph(GraphCollection),
}

impl Dataset {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let dir = resolve_dataset(&cfg.dataset);
        Ok(match cfg.task {
            Task::Node => Dataset::Node(load_node_dataset(&dir)?),
            Task::Edge => {
                let split = link_split(&load_node_dataset(&dir)?, cfg)?;
                split.check_leakage()?;
                Dataset::Edge { split }
            }
            Task::Graph => Dataset::Graph(load_graph_dataset_with(&dir, cfg.max_degree)?),
        })
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Dataset::Node(g) => g.feature_dim(),
            Dataset::Edge { split } => split.train_graph.feature_dim(),
            Dataset::Graph(c) => c.feature_dim(),
        }
    }
}

/// Metric used to rank runs of a task.
pub fn primary_metric(task: Task) -> &'static str {
    match task {
        Task::Node | Task::Graph => "accuracy",
        Task::Edge => "auc",
    }
}

pub fn evaluate(cfg: &RunConfig, data: &Dataset, params: &ModelParams) -> Result<EvalReport> {
    match data {
        Dataset::Node(g) => eval_node_classification(params, g, cfg),
        Dataset::Edge { split } => eval_link_prediction(params, split, cfg),
        Dataset::Graph(c) => eval_graph_classification(params, c, cfg),
    }
}

fn validation_score(cfg: &RunConfig, data: &Dataset, params: &ModelParams) -> Result<Option<f64>> {
    let mut quick = cfg.clone();
    quick.eval.seeds = 1;
    Ok(match data {
        Dataset::Node(g) => eval_node_classification(params, g, &quick)?.metric("val_accuracy").map(|m| m.mean),
        Dataset::Edge { split } => eval_link_prediction(params, split, &quick)?.metric("val_auc").map(|m| m.mean),
        Dataset::Graph(_) => None,
    })
}

fn pool_key(cfg: &RunConfig) -> String {
    format!(
        "seed={} p={} t={} steps={} val={} test={}",
        cfg.master_seed,
        cfg.sampler.restart_prob,
        cfg.sampler.target_size,
        cfg.sampler.max_steps,
        cfg.eval.val_fraction,
        cfg.eval.test_fraction
    )
}

/// Edge subgraphs of the training pairs, reused from `cache` when its
/// hashes match.
pub fn edge_pool(cfg: &RunConfig, split: &EdgeSplit, cache: Option<&Path>) -> Result<EdgeSubgraphSet> {
    let dataset_hash = split.train_graph.content_hash();
    let key = pool_key(cfg);
    if let Some(path) = cache {
        if let Some(pool) = EdgeSubgraphSet::load_matching(path, &dataset_hash, &key)? {
            return Ok(pool);
        }
    }
    let mut rng = RngStream::new(cfg.master_seed).derive("edge_pool").rng();
    let pool = EdgeSubgraphSet::build(&split.train_graph, &split.train_pairs(), &cfg.sampler, &mut rng, &dataset_hash, &key)?;
    if let Some(path) = cache {
        write_atomic(path, &pool.to_bytes())?;
    }
    Ok(pool)
}

pub struct Trained {
    pub state: TrainState,
    /// Encoded checkpoint with the best validation score, when validation
    /// was run.
    pub best: Option<(usize, f64, Vec<u8>)>,
}

impl Trained {
    /// Parameters of the best validation checkpoint, else the final ones.
    pub fn selected_params(&self) -> Result<ModelParams> {
        match &self.best {
            Some((_, _, bytes)) => Ok(decode_checkpoint(bytes)?.params),
            None => Ok(self.state.params.clone()),
        }
    }
}

/// Trains on `data`, probing validation every `eval_every` epochs.
pub fn train(cfg: &RunConfig, data: &Dataset, pool_cache: Option<&Path>) -> Result<Trained> {
    cfg.validate()?;
    let pool;
    let train_data = match data {
        Dataset::Node(g) => TrainData::Node(g),
        Dataset::Edge { split } => {
            pool = edge_pool(cfg, split, pool_cache)?;
            TrainData::Edge {
                graph: &split.train_graph,
                pool: &pool,
            }
        }
        Dataset::Graph(c) => TrainData::Graph(c),
    };
    let mut best: Option<(usize, f64, Vec<u8>)> = None;
    let state = fit(cfg, train_data, None, |s| {
        if cfg.eval_every == 0 || s.epoch % cfg.eval_every != 0 {
            return Ok(());
        }
        if let Some(score) = validation_score(cfg, data, &s.params)? {
            if best.as_ref().is_none_or(|b| score > b.1) {
                best = Some((s.epoch, score, encode_checkpoint(s)));
            }
        }
        Ok(())
    })?;
    Ok(Trained { state, best })
}

fn timings_jsonl(state: &TrainState) -> String {
    state
        .timings
        .iter()
        .enumerate()
        .map(|(e, t)| format!("{{\"epoch\":{e},\"wall_secs\":{t}}}\n"))
        .collect()
}

/// Writes the resolved config, its hash, history, timings and both
/// checkpoints into `out`.
pub fn write_training_outputs(cfg: &RunConfig, trained: &Trained, out: &Path) -> Result<()> {
    let final_bytes = encode_checkpoint(&trained.state);
    write_atomic(&out.join("resolved.toml"), cfg.canonical().as_bytes())?;
    write_atomic(&out.join("config_hash"), format!("{}\n", cfg.hash()).as_bytes())?;
    write_atomic(&out.join("history.jsonl"), trained.state.history_jsonl().as_bytes())?;
    write_atomic(&out.join("timings.jsonl"), timings_jsonl(&trained.state).as_bytes())?;
    write_atomic(&out.join("final.ckpt"), &final_bytes)?;
    let best = trained.best.as_ref().map_or(&final_bytes, |b| &b.2);
    write_atomic(&out.join("best.ckpt"), best)?;
    if let Some((epoch, score, _)) = &trained.best {
        let json = serde_json::json!({ "epoch": epoch, "val_score": score });
        write_atomic(&out.join("best.json"), format!("{json}\n").as_bytes())?;
    }
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<Trained> {
    let data = Dataset::load(cfg)?;
    let trained = train(cfg, &data, Some(&out.join("edge_pool.bin")))?;
    write_training_outputs(cfg, &trained, out)?;
    Ok(trained)
}

pub fn write_report(report: &EvalReport, out: &Path) -> Result<()> {
    write_atomic(&out.join("report.json"), format!("{}\n", report.to_json()).as_bytes())?;
    write_atomic(&out.join("report.csv"), report.to_csv().as_bytes())
}

pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, out: &Path) -> Result<EvalReport> {
    let state = load_checkpoint(checkpoint)?;
    let data = Dataset::load(cfg)?;
    if state.params.cfg.d_f != data.feature_dim() {
        return Err(Error::Dimension(format!(
            "checkpoint expects {} input features, dataset `{}` has {}",
            state.params.cfg.d_f,
            cfg.dataset,
            data.feature_dim()
        )));
    }
    let report = evaluate(cfg, &data, &state.params)?;
    write_report(&report, out)?;
    Ok(report)
}

/// One row of an ablation or sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub variant: String,
    pub mask_ratio: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
    pub disc_updates: usize,
}

pub const ABLATION_VARIANTS: [&str; 4] = ["full", "w/o dis", "w/o rec", "w/o mask"];

/// The configuration of an ablation variant.
pub fn ablation_config(cfg: &RunConfig, variant: &str) -> Result<RunConfig> {
    let mut c = cfg.clone();
    match variant {
        "full" => {}
        "w/o dis" => {
            c.loss.alpha = 0.0;
            c.disc_steps_per_gen = 0;
        }
        "w/o rec" => c.loss.reconstruction = false,
        "w/o mask" => c.model.mask_ratio = 0.0,
        other => return Err(Error::Invalid(format!("unknown ablation variant `{other}`"))),
    }
    c.validate()?;
    Ok(c)
}

fn variant_dir(variant: &str) -> String {
    variant.replace("w/o ", "wo-")
}

fn run_variant(cfg: &RunConfig, data: &Dataset, label: &str, out: &Path) -> Result<Vec<TableRow>> {
    let trained = train(cfg, data, Some(&out.join("edge_pool.bin")))?;
    write_training_outputs(cfg, &trained, out)?;
    let report = evaluate(cfg, data, &trained.selected_params()?)?;
    write_report(&report, out)?;
    let disc_updates = trained.state.history.iter().map(|r| r.disc_updates).sum();
    Ok(report
        .metrics
        .iter()
        .filter(|(k, _)| !k.starts_with("val_"))
        .map(|(k, m)| TableRow {
            variant: label.to_string(),
            mask_ratio: cfg.model.mask_ratio,
            metric: k.clone(),
            mean: m.mean,
            std: m.std,
            values: m.values.clone(),
            disc_updates,
        })
        .collect())
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut s = String::from("variant,mask_ratio,metric,mean,std,disc_updates\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{},{}", r.variant, r.mask_ratio, r.metric, r.mean, r.std, r.disc_updates).expect("string write");
    }
    s
}

fn write_table(name: &str, rows: &[TableRow], out: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(rows).map_err(|e| Error::Invalid(e.to_string()))?;
    write_atomic(&out.join(format!("{name}.json")), format!("{json}\n").as_bytes())?;
    write_atomic(&out.join(format!("{name}.csv")), table_csv(rows).as_bytes())
}

pub fn cmd_ablate(cfg: &RunConfig, out: &Path) -> Result<Vec<TableRow>> {
    let data = Dataset::load(cfg)?;
    let mut rows = Vec::new();
    for variant in ABLATION_VARIANTS {
        let c = ablation_config(cfg, variant)?;
        rows.extend(run_variant(&c, &data, variant, &out.join(variant_dir(variant)))?);
    }
    write_table("ablation", &rows, out)?;
    Ok(rows)
}

/// Mask ratios 0.1, 0.2, ..., 0.9.
pub fn default_ratios() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

pub fn cmd_sweep(cfg: &RunConfig, ratios: &[f64], out: &Path) -> Result<Vec<TableRow>> {
    for &r in ratios {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::Invalid(format!("mask ratio {r} outside [0, 1)")));
        }
    }
    let data = Dataset::load(cfg)?;
    let mut rows = Vec::new();
    for &r in ratios {
        let mut c = cfg.clone();
        c.model.mask_ratio = r;
        c.validate()?;
        let label = format!("ratio-{r:.2}");
        rows.extend(run_variant(&c, &data, &label, &out.join(&label))?);
    }
    write_table("sweep", &rows, out)?;
    Ok(rows)
}

/// Markdown table of the reports found at `paths` (report files or
/// directories containing `report.json`).
pub fn cmd_report(paths: &[&Path]) -> Result<String> {
    let mut s = String::from("| run | task | metric | mean | std | runs |\n|---|---|---|---|---|---|\n");
    for p in paths {
        let file = if p.is_dir() { p.join("report.json") } else { p.to_path_buf() };
        if !file.exists() {
            return Err(Error::MissingFile(file));
        }
        let text = fs::read_to_string(&file).map_err(|e| Error::Invalid(format!("{}: {e}", file.display())))?;
        let report: EvalReport =
            serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", file.display())))?;
        for (k, m) in &report.metrics {
            writeln!(s, "| {} | {} | {k} | {:.4} | {:.4} | {} |", p.display(), report.task, m.mean, m.std, report.runs)
                .expect("string write");
        }
    }
    Ok(s)
}

//! Frozen-encoder evaluation: metrics, linear probes and the three task
//! protocols.

mod metrics;
mod probe;

pub use metrics::{accuracy, auc, average_precision};
pub use probe::{train_probe, Probe, ProbeConfig, Selection};

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::compute::{readout_pool, ReadoutMode, Tensor};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::{assemble_batch, normalize_adjacency, Graph, GraphCollection, Provenance};
use crate::model::{encode, ModelParams};
use crate::rng::RngStream;
use crate::sampler::{edge_subgraph, node_subgraph, EdgeSplit, LabeledSubgraph};

/// Subgraphs embedded per encoder pass.
const EMBED_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation; 0 for a single run.
    pub std: f64,
    pub values: Vec<f64>,
}

impl MetricSummary {
    pub fn new(values: Vec<f64>) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
        };
        Self { mean, std, values }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub metrics: BTreeMap<String, MetricSummary>,
    pub config_hash: String,
    pub wall_secs: f64,
    pub runs: usize,
}

impl EvalReport {
    fn new(task: &str, cfg: &RunConfig, metrics: Vec<(&str, Vec<f64>)>, started: Instant) -> Self {
        let runs = metrics.first().map_or(0, |(_, v)| v.len());
        Self {
            task: task.to_string(),
            metrics: metrics
                .into_iter()
                .map(|(k, v)| (k.to_string(), MetricSummary::new(v)))
                .collect(),
            config_hash: cfg.hash(),
            wall_secs: started.elapsed().as_secs_f64(),
            runs,
        }
    }

    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.get(name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// One `metric,run,value` row per raw value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,run,value\n");
        for (name, m) in &self.metrics {
            for (i, v) in m.values.iter().enumerate() {
                out.push_str(&format!("{name},{i},{v}\n"));
            }
        }
        out
    }
}

/// Pooled embeddings of `subs`, optionally followed by seed-row features:
/// the seed's own encoding for node subgraphs, the elementwise product of
/// the two endpoint encodings for edge subgraphs.
pub fn embed_subgraphs(params: &ModelParams, subs: &[LabeledSubgraph], mode: ReadoutMode, seed_features: bool) -> Result<Tensor> {
    let mut parts = Vec::new();
    for chunk in subs.chunks(EMBED_CHUNK) {
        let batch = assemble_batch(chunk)?;
        let a_hat = normalize_adjacency(&batch.union_graph);
        let h = encode(params, &a_hat, batch.union_graph.features())?;
        let (pooled, _) = readout_pool(&h, &batch.boundaries, mode)?;
        if !seed_features {
            parts.push(pooled);
            continue;
        }
        let mut seeds = Tensor::zeros(batch.len(), h.cols());
        for (b, prov) in batch.provenance.iter().enumerate() {
            let first = batch.boundaries[b];
            let row = seeds.row_mut(b);
            match prov {
                Provenance::Edge { .. } => {
                    for ((o, x), y) in row.iter_mut().zip(h.row(first)).zip(h.row(first + 1)) {
                        *o = x * y;
                    }
                }
                _ => row.copy_from_slice(h.row(first)),
            }
        }
        parts.push(Tensor::hconcat(&[&pooled, &seeds])?);
    }
    let refs: Vec<&Tensor> = parts.iter().collect();
    Tensor::vconcat(&refs)
}

fn probe_config(cfg: &RunConfig) -> ProbeConfig {
    ProbeConfig {
        epochs: cfg.eval.probe_epochs,
        lr: cfg.eval.probe_lr,
        weight_decay: cfg.eval.probe_weight_decay,
    }
}

fn check_dims(params: &ModelParams, d_f: usize) -> Result<()> {
    if params.cfg.d_f != d_f {
        return Err(Error::Dimension(format!(
            "encoder expects {} input features, dataset has {d_f}",
            params.cfg.d_f
        )));
    }
    Ok(())
}

/// Embeds one node-centered subgraph per node (averaged over
/// `samples_per_node` draws) for repetition `run`.
pub fn node_embeddings(params: &ModelParams, g: &Graph, cfg: &RunConfig, run: usize) -> Result<Tensor> {
    let mut rng = RngStream::new(cfg.master_seed).derive_indexed("eval.embed", run as u64).rng();
    let mut total: Option<Tensor> = None;
    for _ in 0..cfg.eval.samples_per_node {
        let subs = (0..g.num_nodes())
            .map(|v| node_subgraph(g, v, &cfg.sampler, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let z = embed_subgraphs(params, &subs, params.cfg.readout, cfg.eval.seed_features)?;
        match total.as_mut() {
            None => total = Some(z),
            Some(t) => t.axpy(1.0, &z)?,
        }
    }
    let mut z = total.expect("at least one sample");
    z.scale(1.0 / cfg.eval.samples_per_node as f64);
    Ok(z)
}

/// Test accuracy of a probe selected by validation accuracy, over
/// `eval.seeds` embedding and probe repetitions.
pub fn eval_node_classification(params: &ModelParams, g: &Graph, cfg: &RunConfig) -> Result<EvalReport> {
    let started = Instant::now();
    check_dims(params, g.feature_dim())?;
    let splits = g.splits().ok_or_else(|| Error::Invalid("node classification needs train/val/test splits".into()))?;
    let labels = g.node_labels().ok_or_else(|| Error::Invalid("node classification needs labels".into()))?;
    let classes = g.num_classes();
    let pick = |mask: &[bool]| -> Result<(Vec<usize>, Vec<usize>)> {
        let idx: Vec<usize> = crate::graph::SplitMasks::indices(mask);
        let y = idx
            .iter()
            .map(|&i| {
                usize::try_from(labels[i]).map_err(|_| Error::Invalid(format!("split node {i} has no label")))
            })
            .collect::<Result<_>>()?;
        Ok((idx, y))
    };
    let (tr, ytr) = pick(&splits.train)?;
    let (va, yva) = pick(&splits.val)?;
    let (te, yte) = pick(&splits.test)?;
    let (mut acc, mut val_acc) = (Vec::new(), Vec::new());
    for run in 0..cfg.eval.seeds {
        let z = node_embeddings(params, g, cfg, run)?;
        let (ztr, zva, zte) = (z.select_rows(&tr), z.select_rows(&va), z.select_rows(&te));
        let probe = train_probe(&ztr, &ytr, Some((&zva, &yva)), classes, &probe_config(cfg), Selection::Accuracy)?;
        acc.push(accuracy(&probe.predict(&zte)?, &yte)?);
        val_acc.push(accuracy(&probe.predict(&zva)?, &yva)?);
    }
    Ok(EvalReport::new("node", cfg, vec![("accuracy", acc), ("val_accuracy", val_acc)], started))
}

/// The edge split shared by link-prediction training and evaluation.
pub fn link_split(g: &Graph, cfg: &RunConfig) -> Result<EdgeSplit> {
    let mut rng = RngStream::new(cfg.master_seed).derive("edge_split").rng();
    EdgeSplit::new(g, cfg.eval.val_fraction, cfg.eval.test_fraction, &mut rng)
}

fn pair_embeddings(
    params: &ModelParams,
    split: &EdgeSplit,
    pairs: &[((usize, usize), bool)],
    cfg: &RunConfig,
    rng: &mut crate::rng::StreamRng,
) -> Result<(Tensor, Vec<usize>)> {
    let subs = pairs
        .iter()
        .map(|&(e, exists)| edge_subgraph(&split.train_graph, e, exists, &cfg.sampler, rng))
        .collect::<Result<Vec<_>>>()?;
    let z = embed_subgraphs(params, &subs, params.cfg.readout, cfg.eval.seed_features)?;
    Ok((z, pairs.iter().map(|&(_, l)| l as usize).collect()))
}

/// AUC and AP of a binary probe on edge-subgraph embeddings. Every
/// subgraph is drawn from the training graph with its own pair removed.
pub fn eval_link_prediction(params: &ModelParams, split: &EdgeSplit, cfg: &RunConfig) -> Result<EvalReport> {
    let started = Instant::now();
    check_dims(params, split.train_graph.feature_dim())?;
    split.check_leakage()?;
    let (mut aucs, mut aps, mut val_aucs) = (Vec::new(), Vec::new(), Vec::new());
    for run in 0..cfg.eval.seeds {
        let mut rng = RngStream::new(cfg.master_seed).derive_indexed("eval.link", run as u64).rng();
        let (ztr, ytr) = pair_embeddings(params, split, &split.train_pairs(), cfg, &mut rng)?;
        let (zva, yva) = pair_embeddings(params, split, &split.val_pairs(), cfg, &mut rng)?;
        let (zte, yte) = pair_embeddings(params, split, &split.test_pairs(), cfg, &mut rng)?;
        let probe = train_probe(&ztr, &ytr, Some((&zva, &yva)), 2, &probe_config(cfg), Selection::Auc)?;
        let val_truth: Vec<bool> = yva.iter().map(|&y| y == 1).collect();
        val_aucs.push(auc(&probe.positive_scores(&zva)?, &val_truth)?);
        let scores = probe.positive_scores(&zte)?;
        let truth: Vec<bool> = yte.iter().map(|&y| y == 1).collect();
        aucs.push(auc(&scores, &truth)?);
        aps.push(average_precision(&scores, &truth)?);
    }
    Ok(EvalReport::new("edge", cfg, vec![("auc", aucs), ("ap", aps), ("val_auc", val_aucs)], started))
}

/// Link AUC and AP with an untrained probe: standardized test embeddings
/// scored by random weights.
pub fn link_null_baseline(params: &ModelParams, split: &EdgeSplit, cfg: &RunConfig) -> Result<EvalReport> {
    let started = Instant::now();
    check_dims(params, split.train_graph.feature_dim())?;
    let (mut aucs, mut aps) = (Vec::new(), Vec::new());
    for run in 0..cfg.eval.seeds {
        let stream = RngStream::new(cfg.master_seed).derive_indexed("eval.null", run as u64);
        let mut rng = stream.rng();
        let (zte, yte) = pair_embeddings(params, split, &split.test_pairs(), cfg, &mut rng)?;
        let probe = Probe::random(&zte, 2, &mut stream.derive("probe").rng());
        let scores = probe.positive_scores(&zte)?;
        let truth: Vec<bool> = yte.iter().map(|&y| y == 1).collect();
        aucs.push(auc(&scores, &truth)?);
        aps.push(average_precision(&scores, &truth)?);
    }
    Ok(EvalReport::new("edge-null", cfg, vec![("auc", aucs), ("ap", aps)], started))
}

/// Stratified assignment of items to `k` folds: each class is shuffled and
/// dealt round-robin.
pub fn stratified_folds(labels: &[usize], k: usize, rng: &mut crate::rng::StreamRng) -> Vec<usize> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

/// Whole-graph embeddings in collection order.
pub fn graph_embeddings(params: &ModelParams, coll: &GraphCollection) -> Result<Tensor> {
    let subs: Vec<LabeledSubgraph> = coll
        .graphs
        .iter()
        .enumerate()
        .map(|(i, g)| (g.clone(), Provenance::Graph { index: i }, Some(coll.graph_labels[i] as i64)))
        .collect();
    embed_subgraphs(params, &subs, params.cfg.readout, false)
}

/// Stratified k-fold accuracy of a probe trained on the other folds.
pub fn eval_graph_classification(params: &ModelParams, coll: &GraphCollection, cfg: &RunConfig) -> Result<EvalReport> {
    let started = Instant::now();
    check_dims(params, coll.feature_dim())?;
    let z = graph_embeddings(params, coll)?;
    let y = &coll.graph_labels;
    let mut rng = RngStream::new(cfg.master_seed).derive("eval.folds").rng();
    let k = cfg.eval.folds;
    let folds = stratified_folds(y, k, &mut rng);
    let mut acc = Vec::new();
    for f in 0..k {
        let (te, tr): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| folds[i] == f);
        if te.is_empty() {
            continue;
        }
        let ytr: Vec<usize> = tr.iter().map(|&i| y[i]).collect();
        let yte: Vec<usize> = te.iter().map(|&i| y[i]).collect();
        let probe = train_probe(&z.select_rows(&tr), &ytr, None, coll.num_classes, &probe_config(cfg), Selection::Accuracy)?;
        acc.push(accuracy(&probe.predict(&z.select_rows(&te))?, &yte)?);
    }
    Ok(EvalReport::new("graph", cfg, vec![("accuracy", acc)], started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testing::graph;
    use crate::graph::SplitMasks;
    use crate::model::init_params;

    fn cfg(task: &str) -> RunConfig {
        let mut c = RunConfig::from_toml(&format!("task = \"{task}\"\ndataset = \"toy\"\n"), &[]).unwrap();
        c.model.d_h = 8;
        c.model.d_disc = 4;
        c.eval.seeds = 2;
        c.eval.probe_epochs = 100;
        c.eval.probe_lr = 0.05;
        c
    }

    #[test]
    fn summary_statistics() {
        let m = MetricSummary::new(vec![1.0, 3.0]);
        assert_eq!((m.mean, m.std), (2.0, 1.0));
        assert_eq!(MetricSummary::new(vec![0.7]).std, 0.0);
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let folds = stratified_folds(&labels, 10, &mut RngStream::new(0).rng());
        for f in 0..10 {
            let members: Vec<_> = (0..40).filter(|&i| folds[i] == f).collect();
            assert_eq!(members.len(), 4);
            assert_eq!(members.iter().filter(|&&i| labels[i] == 1).count(), 2);
        }
    }

    #[test]
    fn separable_graph_collection() {
        let c = cfg("graph");
        let mut graphs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let (g, l) = if i % 2 == 0 {
                (Graph::from_edges(3, &[(0, 1), (1, 2)], Tensor::filled(3, 2, 1.0)).unwrap(), 0)
            } else {
                let f = Tensor::from_rows(&[[1.0, -1.0], [1.0, -1.0], [1.0, -1.0], [1.0, -1.0]]).unwrap();
                (Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], f).unwrap(), 1)
            };
            graphs.push(g);
            labels.push(l);
        }
        let coll = GraphCollection::new(graphs, labels).unwrap();
        let params = init_params(&c.model.with_input_dim(2), RngStream::new(1)).unwrap();
        let before = params.clone();
        let report = eval_graph_classification(&params, &coll, &c).unwrap();
        assert_eq!(report.metric("accuracy").unwrap().mean, 1.0);
        assert_eq!(report.runs, 10);
        assert_eq!(params, before);
    }

    #[test]
    fn node_report_shape_and_determinism() {
        let c = cfg("node");
        let n = 24;
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let feats = Tensor::from_vec(n, 2, (0..n).flat_map(|i| if i < 12 { [1.0, 0.1] } else { [0.1, 1.0] }).collect()).unwrap();
        let labels = (0..n).map(|i| (i >= 12) as i64).collect();
        let splits = SplitMasks::from_indices(n, &[0, 1, 12, 13], &[2, 3, 14, 15], &[5, 6, 7, 18, 19, 20]).unwrap();
        let g = Graph::from_edges(n, &edges, feats).unwrap().with_labels(labels).unwrap().with_splits(splits).unwrap();
        let params = init_params(&c.model.with_input_dim(2), RngStream::new(1)).unwrap();
        let a = eval_node_classification(&params, &g, &c).unwrap();
        let b = eval_node_classification(&params, &g, &c).unwrap();
        assert_eq!(a.metric("accuracy").unwrap().values.len(), 2);
        assert_eq!(a.metrics, b.metrics);
        assert!(a.metric("accuracy").unwrap().mean > 0.8);
        let wrong = init_params(&c.model.with_input_dim(3), RngStream::new(1)).unwrap();
        assert!(matches!(eval_node_classification(&wrong, &g, &c), Err(Error::Dimension(_))));
        assert!(a.to_csv().starts_with("metric,run,value\naccuracy,0,"));
        let back: EvalReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn link_report_has_auc_and_ap() {
        let c = cfg("edge");
        let n = 40;
        let edges: Vec<_> = (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 2) % n)]).collect();
        let g = graph(n, &edges);
        let split = link_split(&g, &c).unwrap();
        let params = init_params(&c.model.with_input_dim(3), RngStream::new(1)).unwrap();
        let r = eval_link_prediction(&params, &split, &c).unwrap();
        for m in ["auc", "ap"] {
            let s = r.metric(m).unwrap();
            assert_eq!(s.values.len(), 2);
            assert!(s.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let null = link_null_baseline(&params, &split, &c).unwrap();
        assert_eq!(null.metric("auc").unwrap().values.len(), 2);
    }
}

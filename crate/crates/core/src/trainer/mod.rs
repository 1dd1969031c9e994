//! Alternating generator / discriminator training.

mod checkpoint;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::compute::{adam_step, SparseOp, Tensor};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::{assemble_batch, normalize_adjacency, Graph, GraphCollection, Provenance, SubgraphBatch};
use crate::model::{
    choose_mask, disc_backward, disc_forward, generator_backward, generator_forward, init_params, ModelParams,
};
use crate::objective::{disc_loss, gen_adv_loss, gen_total_loss, sce_loss, SceScope};
use crate::rng::{RngStream, StreamRng};
use crate::sampler::{node_subgraph, sample_seed_nodes, EdgeSubgraphSet, LabeledSubgraph};

/// Losses of one training step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepMetrics {
    pub l_rec: f64,
    pub l_gen: f64,
    pub l_g: f64,
    pub l_d: f64,
    pub disc_updates: usize,
    pub zero_norm_rows: usize,
}

/// Per-epoch means of the step losses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_rec: f64,
    pub l_gen: f64,
    pub l_g: f64,
    pub l_d: f64,
    pub steps: usize,
    pub disc_updates: usize,
    pub zero_norm_rows: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    /// Completed epochs.
    pub epoch: usize,
    /// Source of feature masks; persisted so resumed runs continue the stream.
    pub mask_rng: StreamRng,
    pub history: Vec<EpochRecord>,
    /// Wall-clock seconds per epoch. Kept apart from `history`, which must
    /// be reproducible byte for byte.
    pub timings: Vec<f64>,
    pub config_hash: [u8; 32],
}

impl TrainState {
    pub fn new(cfg: &RunConfig, d_f: usize) -> Result<Self> {
        let master = RngStream::new(cfg.master_seed);
        let params = init_params(&cfg.model.with_input_dim(d_f), master.derive("init"))?;
        Ok(Self {
            params,
            epoch: 0,
            mask_rng: master.derive("mask").rng(),
            history: Vec::new(),
            timings: Vec::new(),
            config_hash: cfg.hash_bytes(),
        })
    }

    pub fn history_jsonl(&self) -> String {
        self.history
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serialization") + "\n")
            .collect()
    }
}

fn finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            what: what.into(),
            location: "training step".into(),
        })
    }
}

/// One generator update followed by `disc_steps_per_gen` discriminator
/// updates on the same batch.
pub fn train_step(params: &mut ModelParams, cfg: &RunConfig, batch: &SubgraphBatch, rng: &mut StreamRng) -> Result<StepMetrics> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let a_hat = normalize_adjacency(&batch.union_graph);
    let x = batch.union_graph.features();
    let n = x.rows();
    let mask = choose_mask(n, params.cfg.mask_ratio, rng);
    let loss = &cfg.loss;

    // Generator pass; the discriminator only relays gradient to the reconstruction.
    let fwd = generator_forward(params, &a_hat, x, &mask)?;
    let all: Vec<usize>;
    let scope: &[usize] = if loss.sce_scope == SceScope::MaskedOnly && !mask.is_empty() {
        &mask
    } else {
        all = (0..n).collect();
        &all
    };
    let rec = sce_loss(x, fwd.reconstruction(), scope, loss.gamma)?;
    let fake_fwd = disc_forward(params, &a_hat, fwd.reconstruction(), &batch.boundaries)?;
    let (l_gen, g_adv) = gen_adv_loss(&fake_fwd.prob)?;
    let l_rec = finite("reconstruction loss", rec.loss)?;
    let l_gen = finite("adversarial loss", l_gen)?;
    let l_g = gen_total_loss(if loss.reconstruction { l_rec } else { 0.0 }, l_gen, loss.alpha);

    let mut g_recon = if loss.reconstruction {
        rec.grad
    } else {
        Tensor::zeros(n, x.cols())
    };
    if loss.alpha != 0.0 {
        let g_in = disc_backward(params, &a_hat, &fake_fwd, &g_adv, false, true)?.expect("input gradient requested");
        g_recon.axpy(loss.alpha, &g_in)?;
    }
    generator_backward(params, &a_hat, &fwd, g_recon)?;
    adam_step(&mut params.gen, &cfg.optim.generator());
    if !params.gen.iter().all(|s| s.value.is_finite()) {
        return Err(Error::NonFinite {
            what: "generator parameters".into(),
            location: "training step".into(),
        });
    }

    // Discriminator passes on the updated generator's output, treated as constant.
    let l_d = if cfg.disc_steps_per_gen == 0 {
        let real = disc_forward(params, &a_hat, x, &batch.boundaries)?;
        disc_loss(&real.prob, &fake_fwd.prob)?.loss
    } else {
        let fake = generator_forward(params, &a_hat, x, &mask)?.reconstruction().clone();
        let mut total = 0.0;
        for _ in 0..cfg.disc_steps_per_gen {
            total += disc_update(params, cfg, &a_hat, x, &fake, &batch.boundaries)?;
        }
        total / cfg.disc_steps_per_gen as f64
    };
    Ok(StepMetrics {
        l_rec,
        l_gen,
        l_g: finite("generator loss", l_g)?,
        l_d: finite("discriminator loss", l_d)?,
        disc_updates: cfg.disc_steps_per_gen,
        zero_norm_rows: rec.zero_norm_rows,
    })
}

fn disc_update(params: &mut ModelParams, cfg: &RunConfig, a_hat: &SparseOp, x: &Tensor, fake: &Tensor, bounds: &[usize]) -> Result<f64> {
    let real = disc_forward(params, a_hat, x, bounds)?;
    let fake = disc_forward(params, a_hat, fake, bounds)?;
    let out = disc_loss(&real.prob, &fake.prob)?;
    disc_backward(params, a_hat, &real, &out.grad_real, true, false)?;
    disc_backward(params, a_hat, &fake, &out.grad_fake, true, false)?;
    adam_step(&mut params.disc, &cfg.optim.discriminator());
    Ok(out.loss)
}

/// What a run trains on.
#[derive(Clone, Copy, Debug)]
pub enum TrainData<'a> {
    /// Node-centered subgraphs, redrawn every epoch.
    Node(&'a Graph),
    /// A fixed pool of edge subgraphs over the training graph.
    Edge { graph: &'a Graph, pool: &'a EdgeSubgraphSet },
    /// Whole graphs, each its own subgraph.
    Graph(&'a GraphCollection),
}

impl TrainData<'_> {
    pub fn feature_dim(&self) -> usize {
        match self {
            TrainData::Node(g) | TrainData::Edge { graph: g, .. } => g.feature_dim(),
            TrainData::Graph(c) => c.feature_dim(),
        }
    }
}

/// Subgraphs of one epoch, shuffled and split into batches. A pure
/// function of `(master_seed, epoch)`.
pub fn epoch_subgraphs(cfg: &RunConfig, data: TrainData<'_>, epoch: usize) -> Result<Vec<Vec<LabeledSubgraph>>> {
    let mut rng = RngStream::new(cfg.master_seed).derive_indexed("epoch", epoch as u64).rng();
    let subs: Vec<LabeledSubgraph> = match data {
        TrainData::Node(g) => {
            let n = match cfg.sampler.seed_count {
                0 => g.num_nodes(),
                k => k.min(g.num_nodes()),
            };
            let seeds = sample_seed_nodes(g, n, &mut rng)?;
            seeds
                .into_iter()
                .map(|v| node_subgraph(g, v, &cfg.sampler, &mut rng))
                .collect::<Result<_>>()?
        }
        TrainData::Edge { graph, pool } => {
            let mut idx: Vec<usize> = (0..pool.records.len()).collect();
            idx.shuffle(&mut rng);
            if cfg.sampler.seed_count > 0 {
                idx.truncate(cfg.sampler.seed_count);
            }
            pool.materialize(graph, &idx)?
        }
        TrainData::Graph(c) => {
            let mut idx: Vec<usize> = (0..c.len()).collect();
            idx.shuffle(&mut rng);
            if cfg.sampler.seed_count > 0 {
                idx.truncate(cfg.sampler.seed_count);
            }
            idx.into_iter()
                .map(|i| (c.graphs[i].clone(), Provenance::Graph { index: i }, Some(c.graph_labels[i] as i64)))
                .collect()
        }
    };
    let mut batches = Vec::new();
    let mut it = subs.into_iter().peekable();
    while it.peek().is_some() {
        batches.push(it.by_ref().take(cfg.batch_size).collect());
    }
    Ok(batches)
}

/// Trains until `cfg.epochs` epochs are complete, starting from `state`
/// (fresh when `None`). `on_epoch` runs after every epoch.
pub fn fit<F>(cfg: &RunConfig, data: TrainData<'_>, state: Option<TrainState>, mut on_epoch: F) -> Result<TrainState>
where
    F: FnMut(&TrainState) -> Result<()>,
{
    cfg.validate()?;
    let d_f = data.feature_dim();
    let mut state = match state {
        Some(s) => s,
        None => TrainState::new(cfg, d_f)?,
    };
    if state.params.cfg.d_f != d_f {
        return Err(Error::Dimension(format!(
            "model expects {} input features, dataset has {d_f}",
            state.params.cfg.d_f
        )));
    }
    while state.epoch < cfg.epochs {
        let started = Instant::now();
        let epoch = state.epoch;
        let mut sums = [0.0; 4];
        let mut steps = 0;
        let mut disc_updates = 0;
        let mut zero_norm_rows = 0;
        for subs in epoch_subgraphs(cfg, data, epoch)? {
            let batch = assemble_batch(&subs)?;
            let m = train_step(&mut state.params, cfg, &batch, &mut state.mask_rng).map_err(|e| match e {
                Error::NonFinite { what, .. } => Error::NonFinite {
                    what,
                    location: format!("epoch {epoch}, step {steps}"),
                },
                other => other,
            })?;
            for (s, v) in sums.iter_mut().zip([m.l_rec, m.l_gen, m.l_g, m.l_d]) {
                *s += v;
            }
            steps += 1;
            disc_updates += m.disc_updates;
            zero_norm_rows += m.zero_norm_rows;
        }
        let mean = |v: f64| if steps == 0 { 0.0 } else { v / steps as f64 };
        state.history.push(EpochRecord {
            epoch,
            l_rec: mean(sums[0]),
            l_gen: mean(sums[1]),
            l_g: mean(sums[2]),
            l_d: mean(sums[3]),
            steps,
            disc_updates,
            zero_norm_rows,
        });
        state.timings.push(started.elapsed().as_secs_f64());
        state.epoch += 1;
        on_epoch(&state)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testing::graph;

    fn toy_cfg() -> RunConfig {
        let mut cfg = RunConfig::from_toml("task = \"graph\"\ndataset = \"toy\"\n", &[]).unwrap();
        cfg.master_seed = 7;
        cfg.model.d_h = 8;
        cfg.model.d_disc = 4;
        cfg.batch_size = 2;
        cfg.epochs = 2;
        cfg
    }

    fn toy_batch() -> SubgraphBatch {
        let a = graph(3, &[(0, 1), (1, 2)]);
        let b = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assemble_batch(&[(a, Provenance::Graph { index: 0 }, None), (b, Provenance::Graph { index: 1 }, None)]).unwrap()
    }

    fn toy_collection() -> GraphCollection {
        let graphs = (0..6)
            .map(|i| {
                let n = 3 + i % 3;
                let edges: Vec<_> = (0..n - 1).map(|j| (j, j + 1)).collect();
                graph(n, &edges)
            })
            .collect();
        GraphCollection::new(graphs, vec![0, 1, 0, 1, 0, 1]).unwrap()
    }

    #[test]
    fn no_adversary_leaves_discriminator_untouched() {
        let mut cfg = toy_cfg();
        cfg.loss.alpha = 0.0;
        cfg.disc_steps_per_gen = 0;
        let mut state = TrainState::new(&cfg, 3).unwrap();
        let before = state.params.disc.clone();
        let gen_before = state.params.gen.clone();
        let m = train_step(&mut state.params, &cfg, &toy_batch(), &mut state.mask_rng).unwrap();
        assert_eq!(state.params.disc, before);
        assert_ne!(state.params.gen, gen_before);
        assert_eq!(m.disc_updates, 0);
        assert!(m.l_d.is_finite());
    }

    #[test]
    fn zero_learning_rates_freeze_params() {
        let mut cfg = toy_cfg();
        cfg.optim.lr_gen = 0.0;
        cfg.optim.lr_disc = 0.0;
        let mut state = TrainState::new(&cfg, 3).unwrap();
        let before = state.params.clone();
        let m = train_step(&mut state.params, &cfg, &toy_batch(), &mut state.mask_rng).unwrap();
        for (a, b) in state.params.gen.iter().chain(&state.params.disc).zip(before.gen.iter().chain(&before.disc)) {
            assert_eq!(a.value, b.value, "{}", a.name);
        }
        assert!([m.l_rec, m.l_gen, m.l_g, m.l_d].iter().all(|v| v.is_finite()));
    }

    #[test]
    fn generator_step_never_touches_discriminator() {
        let mut cfg = toy_cfg();
        cfg.disc_steps_per_gen = 0;
        let mut state = TrainState::new(&cfg, 3).unwrap();
        let before = state.params.disc.clone();
        train_step(&mut state.params, &cfg, &toy_batch(), &mut state.mask_rng).unwrap();
        assert_eq!(state.params.disc, before);
    }

    #[test]
    fn reconstruction_trend_decreases() {
        let cfg = toy_cfg();
        let mut state = TrainState::new(&cfg, 3).unwrap();
        let batch = toy_batch();
        let losses: Vec<f64> = (0..200)
            .map(|_| train_step(&mut state.params, &cfg, &batch, &mut state.mask_rng).unwrap().l_rec)
            .collect();
        let window = |i: usize| losses[i..i + 50].iter().sum::<f64>() / 50.0;
        for i in (0..=100).step_by(50) {
            assert!(window(i + 50) < window(i), "window {i}: {} -> {}", window(i), window(i + 50));
        }
    }

    #[test]
    fn fit_records_history_and_is_deterministic() {
        let cfg = toy_cfg();
        let coll = toy_collection();
        let a = fit(&cfg, TrainData::Graph(&coll), None, |_| Ok(())).unwrap();
        let b = fit(&cfg, TrainData::Graph(&coll), None, |_| Ok(())).unwrap();
        assert_eq!(a.history.len(), 2);
        assert_eq!(a.history[0].steps, 3);
        assert!(a.history.iter().all(|r| [r.l_rec, r.l_gen, r.l_g, r.l_d].iter().all(|v| v.is_finite())));
        assert_eq!(a.params, b.params);
        assert_eq!(a.history_jsonl(), b.history_jsonl());
    }

    #[test]
    fn generator_ignores_discriminator_init_without_adversary() {
        let mut cfg = toy_cfg();
        cfg.loss.alpha = 0.0;
        let coll = toy_collection();
        let a = fit(&cfg, TrainData::Graph(&coll), None, |_| Ok(())).unwrap();
        let mut other = TrainState::new(&cfg, 3).unwrap();
        let reinit = init_params(&other.params.cfg, RngStream::new(999)).unwrap();
        other.params.disc = reinit.disc;
        let b = fit(&cfg, TrainData::Graph(&coll), Some(other), |_| Ok(())).unwrap();
        assert_eq!(a.params.gen, b.params.gen);
        assert_ne!(a.params.disc, b.params.disc);
    }

    #[test]
    fn node_epochs_depend_only_on_seed_and_epoch() {
        let mut cfg = RunConfig::from_toml("task = \"node\"\ndataset = \"toy\"\n", &[]).unwrap();
        cfg.sampler.seed_count = 5;
        cfg.batch_size = 2;
        let edges: Vec<_> = (0..9).map(|i| (i, i + 1)).collect();
        let g = graph(10, &edges);
        let a = epoch_subgraphs(&cfg, TrainData::Node(&g), 3).unwrap();
        let b = epoch_subgraphs(&cfg, TrainData::Node(&g), 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2, 1]);
        assert_ne!(a, epoch_subgraphs(&cfg, TrainData::Node(&g), 4).unwrap());
    }
}

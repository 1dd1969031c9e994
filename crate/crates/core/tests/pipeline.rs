use amgae_core::compute::Tensor;
use amgae_core::config::RunConfig;
use amgae_core::eval::{eval_graph_classification, eval_link_prediction, eval_node_classification, link_split};
use amgae_core::graph::{load_graph_dataset, load_node_dataset, write_graph_dataset, write_node_dataset, Graph, GraphCollection, SplitMasks};
use amgae_core::rng::RngStream;
use amgae_core::sampler::EdgeSubgraphSet;
use amgae_core::trainer::{fit, load_checkpoint, save_checkpoint, TrainData};
use rand::Rng;

/// Two noisy communities whose features encode the community.
fn communities(n: usize, seed: u64) -> Graph {
    let mut rng = RngStream::new(seed).rng();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let same = u % 2 == v % 2;
            if rng.gen_bool(if same { 0.15 } else { 0.01 }) {
                edges.push((u, v));
            }
        }
    }
    let d = 6;
    let mut f = Tensor::zeros(n, d);
    for u in 0..n {
        for j in 0..d {
            let signal = if j % 2 == u % 2 { 1.0 } else { 0.0 };
            f.set(u, j, signal + rng.gen_range(-0.3..0.3));
        }
    }
    let labels = (0..n).map(|u| (u % 2) as i64).collect();
    let idx: Vec<usize> = (0..n).collect();
    let (a, b) = (n / 3, 2 * n / 3);
    Graph::from_edges(n, &edges, f)
        .unwrap()
        .with_labels(labels)
        .unwrap()
        .with_splits(SplitMasks::from_indices(n, &idx[..a], &idx[a..b], &idx[b..]).unwrap())
        .unwrap()
}

fn small(task: &str) -> RunConfig {
    let text = format!(
        "task = \"{task}\"\ndataset = \"synthetic\"\nmaster_seed = 3\nepochs = 4\nbatch_size = 8\n\
         sampler.seed_count = 32\nmodel.d_h = 16\nmodel.d_disc = 8\neval.seeds = 2\neval.probe_epochs = 150\n\
         eval.probe_lr = 0.05\n"
    );
    RunConfig::from_toml(&text, &[]).unwrap()
}

#[test]
fn node_task_end_to_end() {
    let g = communities(90, 1);
    let tmp = tempfile::tempdir().unwrap();
    write_node_dataset(tmp.path(), &g).unwrap();
    let g = load_node_dataset(tmp.path()).unwrap();
    let cfg = small("node");
    let state = fit(&cfg, TrainData::Node(&g), None, |_| Ok(())).unwrap();
    assert_eq!(state.history.len(), 4);
    assert!(state.history.iter().all(|r| r.l_rec.is_finite() && r.l_d.is_finite()));
    let report = eval_node_classification(&state.params, &g, &cfg).unwrap();
    let acc = report.metric("accuracy").unwrap();
    assert_eq!(acc.values.len(), 2);
    assert!(acc.mean > 0.8, "separable communities should be easy, got {}", acc.mean);
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let g = communities(60, 2);
    let cfg = small("node");
    let full = fit(&cfg, TrainData::Node(&g), None, |_| Ok(())).unwrap();
    let mut half_cfg = cfg.clone();
    half_cfg.epochs = 2;
    let half = fit(&half_cfg, TrainData::Node(&g), None, |_| Ok(())).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("half.ckpt");
    save_checkpoint(&half, &path).unwrap();
    let mut resumed_state = load_checkpoint(&path).unwrap();
    resumed_state.config_hash = cfg.hash_bytes();
    let resumed = fit(&cfg, TrainData::Node(&g), Some(resumed_state), |_| Ok(())).unwrap();
    assert_eq!(resumed.params, full.params);
    assert_eq!(resumed.history, full.history);
}

#[test]
fn edge_task_end_to_end() {
    let g = communities(80, 4);
    let mut cfg = small("edge");
    cfg.eval.val_fraction = 0.1;
    cfg.eval.test_fraction = 0.2;
    let split = link_split(&g, &cfg).unwrap();
    split.check_leakage().unwrap();
    for (u, v) in split.test_pos.iter().chain(&split.val_pos) {
        assert!(!split.train_graph.has_edge(*u, *v));
    }
    let mut rng = RngStream::new(cfg.master_seed).derive("edge_pool").rng();
    let hash = split.train_graph.content_hash();
    let pool = EdgeSubgraphSet::build(&split.train_graph, &split.train_pairs(), &cfg.sampler, &mut rng, &hash, "k").unwrap();
    let state = fit(&cfg, TrainData::Edge { graph: &split.train_graph, pool: &pool }, None, |_| Ok(())).unwrap();
    let report = eval_link_prediction(&state.params, &split, &cfg).unwrap();
    for key in ["auc", "ap"] {
        let m = report.metric(key).unwrap();
        assert!(m.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn graph_task_end_to_end() {
    let mut rng = RngStream::new(5).rng();
    let mut graphs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..40 {
        let n = rng.gen_range(4..9);
        let edges: Vec<_> = if i % 2 == 0 {
            (1..n).map(|v| (v - 1, v)).collect()
        } else {
            (1..n).map(|v| (0, v)).collect()
        };
        graphs.push(Graph::from_edges(n, &edges, Tensor::zeros(n, 0)).unwrap());
        labels.push(i % 2);
    }
    let tmp = tempfile::tempdir().unwrap();
    write_graph_dataset(tmp.path(), &GraphCollection::new(graphs, labels).unwrap(), false).unwrap();
    let coll = load_graph_dataset(tmp.path()).unwrap();
    assert!(coll.feature_dim() > 1, "featureless graphs get degree features");
    let mut cfg = small("graph");
    cfg.eval.folds = 5;
    let state = fit(&cfg, TrainData::Graph(&coll), None, |_| Ok(())).unwrap();
    let report = eval_graph_classification(&state.params, &coll, &cfg).unwrap();
    let acc = report.metric("accuracy").unwrap();
    assert_eq!(acc.values.len(), 5);
    assert!(acc.mean > 0.8, "paths and stars differ in degree profile, got {}", acc.mean);
}

#[test]
fn wrong_input_width_is_a_dimension_error() {
    let g = communities(40, 6);
    let cfg = small("node");
    let state = fit(&cfg, TrainData::Node(&g), None, |_| Ok(())).unwrap();
    let narrow = Graph::from_edges(3, &[(0, 1)], Tensor::zeros(3, 2)).unwrap();
    let err = fit(&cfg, TrainData::Node(&narrow), Some(state), |_| Ok(())).unwrap_err();
    assert_eq!(err.code(), "dimension");
}

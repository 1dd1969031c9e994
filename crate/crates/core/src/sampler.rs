//! Seed selection and random-walk-with-restart subgraph construction.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{induced_subgraph, induced_subgraph_excluding, Graph, Provenance};
use crate::rng::StreamRng;

/// A subgraph ready for [`crate::graph::assemble_batch`].
pub type LabeledSubgraph = (Graph, Provenance, Option<i64>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub restart_prob: f64,
    pub target_size: usize,
    pub max_steps: usize,
    pub seed_count: usize,
}

impl SamplerConfig {
    /// Config with `max_steps` set to 100 × `target_size`.
    pub fn new(restart_prob: f64, target_size: usize, seed_count: usize) -> Self {
        Self {
            restart_prob,
            target_size,
            max_steps: 100 * target_size,
            seed_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.restart_prob) {
            return Err(Error::Config {
                key: "sampler.restart_prob".into(),
                msg: format!("{} is outside [0, 1)", self.restart_prob),
            });
        }
        if self.target_size == 0 {
            return Err(Error::Config {
                key: "sampler.target_size".into(),
                msg: "must be at least 1".into(),
            });
        }
        if self.max_steps < self.target_size {
            return Err(Error::Config {
                key: "sampler.max_steps".into(),
                msg: format!("{} is below target_size {}", self.max_steps, self.target_size),
            });
        }
        Ok(())
    }
}

/// Nodes collected by one walk, in discovery order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RwrResult {
    pub nodes: Vec<usize>,
    /// The step budget ran out before `target_size` nodes were found.
    pub truncated: bool,
}

/// Random walk with restart from `v` until `target` distinct nodes are seen.
fn rwr_walk(g: &Graph, v: usize, target: usize, p: f64, max_steps: usize, rng: &mut StreamRng) -> RwrResult {
    let mut nodes = Vec::with_capacity(target);
    let mut seen = HashSet::with_capacity(target * 2);
    if target == 0 {
        return RwrResult { nodes, truncated: false };
    }
    let mut u = v;
    let mut steps = 0;
    while nodes.len() < target {
        if seen.insert(u) {
            nodes.push(u);
            if nodes.len() == target {
                break;
            }
        }
        if steps == max_steps || g.degree(v) == 0 {
            return RwrResult { nodes, truncated: true };
        }
        steps += 1;
        let r: f64 = rng.gen();
        if r < p {
            u = v;
        } else {
            let nbrs = g.neighbors(u);
            u = nbrs[rng.gen_range(0..nbrs.len())];
        }
    }
    RwrResult { nodes, truncated: false }
}

pub fn rwr_sample(g: &Graph, v: usize, cfg: &SamplerConfig, rng: &mut StreamRng) -> Result<RwrResult> {
    cfg.validate()?;
    check_node(g, v)?;
    Ok(rwr_walk(g, v, cfg.target_size, cfg.restart_prob, cfg.max_steps, rng))
}

fn check_node(g: &Graph, v: usize) -> Result<()> {
    if v >= g.num_nodes() {
        return Err(Error::NodeOutOfRange {
            index: v,
            num_nodes: g.num_nodes(),
        });
    }
    Ok(())
}

/// Subgraph around `v`, seed at position 0, labeled with `v`'s label.
pub fn node_subgraph(g: &Graph, v: usize, cfg: &SamplerConfig, rng: &mut StreamRng) -> Result<LabeledSubgraph> {
    let walk = rwr_sample(g, v, cfg, rng)?;
    let sub = induced_subgraph(g, &walk.nodes)?;
    let label = g.node_labels().map(|l| l[v]).filter(|&l| l >= 0);
    Ok((sub, Provenance::Node { seed: v }, label))
}

/// Node list for the pair `(u, v)`: `u`, `v`, then the remaining nodes of
/// the walk from `u` (⌈t/2⌉ nodes) and from `v` (⌊t/2⌋, at least 1).
pub fn edge_subgraph_nodes(g: &Graph, u: usize, v: usize, cfg: &SamplerConfig, rng: &mut StreamRng) -> Result<Vec<usize>> {
    cfg.validate()?;
    check_node(g, u)?;
    check_node(g, v)?;
    if u == v {
        return Err(Error::Invalid(format!("edge subgraph needs two distinct endpoints, got ({u},{u})")));
    }
    let t = cfg.target_size;
    let from_u = rwr_walk(g, u, t.div_ceil(2), cfg.restart_prob, cfg.max_steps, rng);
    let from_v = rwr_walk(g, v, (t / 2).max(1), cfg.restart_prob, cfg.max_steps, rng);
    let mut nodes = vec![u, v];
    let mut seen: HashSet<usize> = nodes.iter().copied().collect();
    for x in from_u.nodes.into_iter().chain(from_v.nodes) {
        if seen.insert(x) {
            nodes.push(x);
        }
    }
    Ok(nodes)
}

/// Subgraph around the pair `(u, v)` with the pair's own edge removed.
/// The endpoints occupy positions 0 and 1.
pub fn edge_subgraph(
    g: &Graph,
    (u, v): (usize, usize),
    exists: bool,
    cfg: &SamplerConfig,
    rng: &mut StreamRng,
) -> Result<LabeledSubgraph> {
    let nodes = edge_subgraph_nodes(g, u, v, cfg, rng)?;
    let sub = induced_subgraph_excluding(g, &nodes, (u, v))?;
    Ok((sub, Provenance::Edge { u, v, exists }, Some(exists as i64)))
}

/// `n` distinct nodes drawn uniformly without replacement.
pub fn sample_seed_nodes(g: &Graph, n: usize, rng: &mut StreamRng) -> Result<Vec<usize>> {
    let total = g.num_nodes();
    if n == 0 || n > total {
        return Err(Error::Invalid(format!("cannot draw {n} seed nodes from {total}")));
    }
    Ok(index::sample(rng, total, n).into_vec())
}

fn canonical(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

/// `m` distinct non-adjacent pairs `(u, v)` with `u < v`, none in `exclude`.
pub fn sample_negative_edges(
    g: &Graph,
    m: usize,
    rng: &mut StreamRng,
    exclude: &HashSet<(usize, usize)>,
) -> Result<Vec<(usize, usize)>> {
    let n = g.num_nodes();
    if m == 0 {
        return Err(Error::Invalid("negative edge count must be at least 1".into()));
    }
    let pairs = n * n.saturating_sub(1) / 2;
    let blocked = g.num_edges() + exclude.iter().filter(|&&(a, b)| a != b && !g.has_edge(a, b)).count();
    if pairs.saturating_sub(blocked) < m {
        return Err(Error::Sampling(format!(
            "only {} non-edges available, {m} requested",
            pairs.saturating_sub(blocked)
        )));
    }
    let budget = 100 * m + 10_000;
    let mut chosen = HashSet::with_capacity(m);
    let mut out = Vec::with_capacity(m);
    for _ in 0..budget {
        if out.len() == m {
            break;
        }
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b {
            continue;
        }
        let e = canonical(a, b);
        if g.has_edge(a, b) || exclude.contains(&e) || !chosen.insert(e) {
            continue;
        }
        out.push(e);
    }
    if out.len() < m {
        return Err(Error::Sampling(format!(
            "found {} of {m} negative edges within {budget} draws",
            out.len()
        )));
    }
    Ok(out)
}

/// A precomputed set of edge subgraphs, stored as node lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSubgraphSet {
    pub dataset_hash: String,
    pub config_hash: String,
    pub records: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeRecord {
    pub u: usize,
    pub v: usize,
    pub exists: bool,
    pub nodes: Vec<usize>,
}

const CACHE_MAGIC: &[u8; 8] = b"AMGEDGE1";

impl EdgeSubgraphSet {
    pub fn build(
        g: &Graph,
        pairs: &[((usize, usize), bool)],
        cfg: &SamplerConfig,
        rng: &mut StreamRng,
        dataset_hash: &str,
        config_hash: &str,
    ) -> Result<Self> {
        let records = pairs
            .iter()
            .map(|&((u, v), exists)| {
                Ok(EdgeRecord {
                    u,
                    v,
                    exists,
                    nodes: edge_subgraph_nodes(g, u, v, cfg, rng)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            dataset_hash: dataset_hash.to_string(),
            config_hash: config_hash.to_string(),
            records,
        })
    }

    /// Rebuilds the subgraphs for records `idx` against `g`.
    pub fn materialize(&self, g: &Graph, idx: &[usize]) -> Result<Vec<LabeledSubgraph>> {
        idx.iter()
            .map(|&i| {
                let r = &self.records[i];
                let sub = induced_subgraph_excluding(g, &r.nodes, (r.u, r.v))?;
                Ok((
                    sub,
                    Provenance::Edge {
                        u: r.u,
                        v: r.v,
                        exists: r.exists,
                    },
                    Some(r.exists as i64),
                ))
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CACHE_MAGIC);
        for s in [&self.dataset_hash, &self.config_hash] {
            out.extend_from_slice(&(s.len() as u64).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.u as u64).to_le_bytes());
            out.extend_from_slice(&(r.v as u64).to_le_bytes());
            out.push(r.exists as u8);
            out.extend_from_slice(&(r.nodes.len() as u64).to_le_bytes());
            for &x in &r.nodes {
                out.extend_from_slice(&(x as u64).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != CACHE_MAGIC {
            return Err(Error::Invalid("not an edge subgraph cache".into()));
        }
        let dataset_hash = cur.string()?;
        let config_hash = cur.string()?;
        let count = cur.u64()? as usize;
        let mut records = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let u = cur.u64()? as usize;
            let v = cur.u64()? as usize;
            let exists = cur.take(1)?[0] != 0;
            let len = cur.u64()? as usize;
            let nodes = (0..len).map(|_| cur.u64().map(|x| x as usize)).collect::<Result<_>>()?;
            records.push(EdgeRecord { u, v, exists, nodes });
        }
        if cur.pos != bytes.len() {
            return Err(Error::Invalid("trailing bytes in edge subgraph cache".into()));
        }
        Ok(Self {
            dataset_hash,
            config_hash,
            records,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Loads a cache if it exists and matches both hashes.
    pub fn load_matching(path: &Path, dataset_hash: &str, config_hash: &str) -> Result<Option<Self>> {
        if !path.exists() {
            return Ok(None);
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let set = Self::from_bytes(&bytes)?;
        Ok((set.dataset_hash == dataset_hash && set.config_hash == config_hash).then_some(set))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Invalid("truncated edge subgraph cache".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u64()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Invalid("bad string in cache".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testing::{cycle, graph, path, star, triangle};
    use crate::rng::RngStream;

    fn cfg(p: f64, t: usize) -> SamplerConfig {
        SamplerConfig::new(p, t, 1)
    }

    fn rng(seed: u64) -> StreamRng {
        RngStream::new(seed).rng()
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1.0, 4).validate().is_err());
        assert!(cfg(-0.1, 4).validate().is_err());
        assert!(cfg(0.5, 0).validate().is_err());
        let mut c = cfg(0.5, 4);
        c.max_steps = 3;
        assert!(c.validate().is_err());
        assert!(cfg(0.0, 1).validate().is_ok());
    }

    #[test]
    fn single_edge_walk() {
        let g = graph(2, &[(0, 1)]);
        let r = rwr_sample(&g, 0, &cfg(0.0, 2), &mut rng(0)).unwrap();
        assert_eq!(r.nodes, vec![0, 1]);
        assert!(!r.truncated);
    }

    #[test]
    fn target_one_is_seed() {
        let g = cycle(6);
        for v in 0..6 {
            assert_eq!(rwr_sample(&g, v, &cfg(0.3, 1), &mut rng(v as u64)).unwrap().nodes, vec![v]);
        }
    }

    #[test]
    fn star_leaf_frequencies() {
        let g = star(4);
        let mut r = rng(11);
        let trials = 10_000;
        let mut counts = [0usize; 5];
        for _ in 0..trials {
            let s = rwr_sample(&g, 0, &cfg(0.0, 3), &mut r).unwrap();
            assert_eq!(s.nodes.len(), 3);
            for &x in &s.nodes[1..] {
                counts[x] += 1;
            }
        }
        let sigma = (trials as f64 * 0.25).sqrt();
        for leaf in 1..5 {
            let dev = (counts[leaf] as f64 - trials as f64 / 2.0).abs();
            assert!(dev < 3.0 * sigma, "leaf {leaf}: {}", counts[leaf]);
        }
    }

    #[test]
    fn isolated_seed_is_truncated() {
        let g = graph(3, &[(1, 2)]);
        let r = rwr_sample(&g, 0, &cfg(0.5, 3), &mut rng(0)).unwrap();
        assert_eq!(r.nodes, vec![0]);
        assert!(r.truncated);
    }

    #[test]
    fn small_component_is_truncated() {
        let g = graph(5, &[(0, 1), (2, 3), (3, 4)]);
        let r = rwr_sample(&g, 0, &cfg(0.2, 4), &mut rng(3)).unwrap();
        assert_eq!(r.nodes, vec![0, 1]);
        assert!(r.truncated);
    }

    #[test]
    fn node_subgraph_examples() {
        let g = graph(3, &[(1, 2)]).with_labels(vec![4, 0, 1]).unwrap();
        let (s, prov, label) = node_subgraph(&g, 0, &cfg(0.5, 5), &mut rng(0)).unwrap();
        assert_eq!((s.num_nodes(), prov, label), (1, Provenance::Node { seed: 0 }, Some(4)));

        let (s, _, _) = node_subgraph(&path(3), 1, &cfg(0.0, 3), &mut rng(1)).unwrap();
        assert_eq!((s.num_nodes(), s.num_edges()), (3, 2));

        for seed in 0..20 {
            let (s, _, _) = node_subgraph(&triangle(), 0, &cfg(0.5, 2), &mut rng(seed)).unwrap();
            assert_eq!((s.num_nodes(), s.num_edges()), (2, 1));
            assert_eq!(s.features().row(0), triangle().features().row(0));
        }
    }

    #[test]
    fn edge_subgraph_examples() {
        let g = graph(2, &[(0, 1)]);
        let (s, _, label) = edge_subgraph(&g, (0, 1), true, &cfg(0.5, 2), &mut rng(0)).unwrap();
        assert_eq!((s.num_nodes(), s.num_edges(), label), (2, 0, Some(1)));

        let (s, _, label) = edge_subgraph(&path(3), (0, 2), false, &cfg(0.5, 2), &mut rng(0)).unwrap();
        assert_eq!((s.num_nodes(), s.num_edges(), label), (2, 0, Some(0)));

        let (s, _, _) = edge_subgraph(&cycle(4), (0, 1), true, &cfg(0.0, 4), &mut rng(5)).unwrap();
        assert_eq!((s.num_nodes(), s.num_edges()), (4, 3));

        assert!(edge_subgraph(&g, (1, 1), true, &cfg(0.5, 2), &mut rng(0)).is_err());
    }

    #[test]
    fn seed_nodes() {
        let g = cycle(7);
        let mut all = sample_seed_nodes(&g, 7, &mut rng(2)).unwrap();
        all.sort();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        assert!(sample_seed_nodes(&g, 0, &mut rng(2)).is_err());
        assert!(sample_seed_nodes(&g, 8, &mut rng(2)).is_err());

        let k2 = graph(2, &[(0, 1)]);
        let mut r = rng(4);
        let zeros = (0..10_000).filter(|_| sample_seed_nodes(&k2, 1, &mut r).unwrap()[0] == 0).count();
        assert!((zeros as f64 - 5000.0).abs() < 150.0, "{zeros}");
    }

    #[test]
    fn negative_edges() {
        let none = HashSet::new();
        assert_eq!(sample_negative_edges(&path(3), 1, &mut rng(0), &none).unwrap(), vec![(0, 2)]);
        assert!(sample_negative_edges(&triangle(), 1, &mut rng(0), &none).is_err());
        assert!(sample_negative_edges(&path(3), 0, &mut rng(0), &none).is_err());
        let ex: HashSet<_> = [(0, 2)].into_iter().collect();
        assert!(sample_negative_edges(&path(3), 1, &mut rng(0), &ex).is_err());

        let g = cycle(12);
        let negs = sample_negative_edges(&g, 30, &mut rng(1), &none).unwrap();
        let uniq: HashSet<_> = negs.iter().collect();
        assert_eq!(uniq.len(), 30);
        assert!(negs.iter().all(|&(u, v)| u < v && !g.has_edge(u, v)));
    }

    #[test]
    fn cache_round_trip() {
        let g = cycle(8);
        let pairs = vec![((0, 1), true), ((0, 4), false), ((2, 3), true)];
        let set = EdgeSubgraphSet::build(&g, &pairs, &cfg(0.5, 4), &mut rng(0), "d", "c").unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("edges.bin");
        set.save(&path).unwrap();
        assert_eq!(EdgeSubgraphSet::load_matching(&path, "d", "c").unwrap(), Some(set.clone()));
        assert_eq!(EdgeSubgraphSet::load_matching(&path, "d", "other").unwrap(), None);
        let subs = set.materialize(&g, &[0, 2]).unwrap();
        assert!(subs.iter().all(|(s, _, _)| !s.has_edge(0, 1)));
        let mut bytes = set.to_bytes();
        bytes.pop();
        assert!(EdgeSubgraphSet::from_bytes(&bytes).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let g = cycle(30);
        let a = node_subgraph(&g, 3, &cfg(0.3, 8), &mut rng(9)).unwrap();
        let b = node_subgraph(&g, 3, &cfg(0.3, 8), &mut rng(9)).unwrap();
        assert_eq!(a, b);
    }
}

/// Held-out positive and negative pairs for link prediction, plus the
/// training graph with every held-out positive removed.
#[derive(Clone, Debug)]
pub struct EdgeSplit {
    pub train_graph: Graph,
    pub train_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

impl EdgeSplit {
    /// Shuffles the edge list and cuts `floor(E * test)` test and
    /// `floor(E * val)` validation positives; negatives are drawn 1:1 per
    /// part, disjoint from each other and from every edge of `g`.
    pub fn new(g: &Graph, val_fraction: f64, test_fraction: f64, rng: &mut StreamRng) -> Result<Self> {
        use rand::seq::SliceRandom;
        let mut edges: Vec<(usize, usize)> = g.edges().collect();
        edges.shuffle(rng);
        let n_test = (edges.len() as f64 * test_fraction).floor() as usize;
        let n_val = (edges.len() as f64 * val_fraction).floor() as usize;
        if n_test == 0 || n_val == 0 || n_test + n_val >= edges.len() {
            return Err(Error::Invalid(format!(
                "cannot split {} edges into {val_fraction}/{test_fraction} held-out fractions",
                edges.len()
            )));
        }
        let test_pos = edges[..n_test].to_vec();
        let val_pos = edges[n_test..n_test + n_val].to_vec();
        let train_pos = edges[n_test + n_val..].to_vec();
        let mut used = HashSet::new();
        let negs = |m: usize, used: &mut HashSet<(usize, usize)>, rng: &mut StreamRng| -> Result<Vec<(usize, usize)>> {
            let out = sample_negative_edges(g, m, rng, used)?;
            used.extend(out.iter().copied());
            Ok(out)
        };
        let test_neg = negs(test_pos.len(), &mut used, rng)?;
        let val_neg = negs(val_pos.len(), &mut used, rng)?;
        let train_neg = negs(train_pos.len(), &mut used, rng)?;
        let train_graph = g.with_edge_list(&train_pos)?;
        let split = Self {
            train_graph,
            train_pos,
            train_neg,
            val_pos,
            val_neg,
            test_pos,
            test_neg,
        };
        split.check_leakage()?;
        Ok(split)
    }

    /// Fails if any held-out positive is an edge of the training graph.
    pub fn check_leakage(&self) -> Result<()> {
        for &(u, v) in self.val_pos.iter().chain(&self.test_pos) {
            if self.train_graph.has_edge(u, v) {
                return Err(Error::Leakage(format!("held-out edge ({u},{v}) is present in the training graph")));
            }
        }
        Ok(())
    }

    /// Training pairs with labels, positives first.
    pub fn train_pairs(&self) -> Vec<((usize, usize), bool)> {
        labeled(&self.train_pos, &self.train_neg)
    }

    pub fn val_pairs(&self) -> Vec<((usize, usize), bool)> {
        labeled(&self.val_pos, &self.val_neg)
    }

    pub fn test_pairs(&self) -> Vec<((usize, usize), bool)> {
        labeled(&self.test_pos, &self.test_neg)
    }
}

fn labeled(pos: &[(usize, usize)], neg: &[(usize, usize)]) -> Vec<((usize, usize), bool)> {
    pos.iter().map(|&e| (e, true)).chain(neg.iter().map(|&e| (e, false))).collect()
}

#[cfg(test)]
mod split_tests {
    use super::*;
    use crate::graph::testing::graph;
    use crate::rng::RngStream;

    #[test]
    fn split_partitions_edges() {
        let n = 30;
        let edges: Vec<_> = (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 7) % n)]).collect();
        let g = graph(n, &edges);
        let s = EdgeSplit::new(&g, 0.1, 0.2, &mut RngStream::new(3).rng()).unwrap();
        assert_eq!(s.test_pos.len(), (g.num_edges() as f64 * 0.2) as usize);
        assert_eq!(s.train_pos.len() + s.val_pos.len() + s.test_pos.len(), g.num_edges());
        assert_eq!(s.train_graph.num_edges(), s.train_pos.len());
        let negs: HashSet<_> = s.train_neg.iter().chain(&s.val_neg).chain(&s.test_neg).collect();
        assert_eq!(negs.len(), s.train_neg.len() + s.val_neg.len() + s.test_neg.len());
        assert!(negs.iter().all(|&&(u, v)| !g.has_edge(u, v)));
        assert!(s.check_leakage().is_ok());

        let mut leaky = s.clone();
        leaky.train_graph = g.clone();
        assert!(matches!(leaky.check_leakage(), Err(Error::Leakage(_))));
    }
}

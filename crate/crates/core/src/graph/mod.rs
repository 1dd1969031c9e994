//! Graph storage, dataset ingestion, induced subgraphs and disjoint-union batching.

mod batch;
mod io;

pub use batch::{assemble_batch, induced_subgraph, induced_subgraph_excluding, normalize_adjacency, SubgraphBatch};
pub use io::{load_graph_dataset, load_graph_dataset_with, load_node_dataset, write_graph_dataset, write_node_dataset, DEFAULT_MAX_DEGREE};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compute::Tensor;
use crate::error::{Error, Result};

/// Train/validation/test node masks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl SplitMasks {
    pub fn from_indices(n: usize, train: &[usize], val: &[usize], test: &[usize]) -> Result<Self> {
        let mut masks = [vec![false; n], vec![false; n], vec![false; n]];
        for (mask, ids) in masks.iter_mut().zip([train, val, test]) {
            for &i in ids {
                if i >= n {
                    return Err(Error::NodeOutOfRange { index: i, num_nodes: n });
                }
                mask[i] = true;
            }
        }
        for i in 0..n {
            if masks.iter().filter(|m| m[i]).count() > 1 {
                return Err(Error::Invalid(format!("node {i} appears in more than one split")));
            }
        }
        let [train, val, test] = masks;
        Ok(Self { train, val, test })
    }

    pub fn indices(mask: &[bool]) -> Vec<usize> {
        mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
    }
}

/// Undirected graph in CSR form with dense node features.
///
/// Neighbor lists are sorted, free of self-loops and duplicates, and the
/// adjacency is symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    features: Tensor,
    node_labels: Option<Vec<i64>>,
    splits: Option<SplitMasks>,
}

impl Graph {
    /// Builds a graph from a possibly directed, duplicated edge list.
    /// Edges are symmetrized and deduplicated; self-loops are dropped.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)], features: Tensor) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::shape(
                "graph",
                format!("{} feature rows for {num_nodes} nodes", features.rows()),
            ));
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            for x in [u, v] {
                if x >= num_nodes {
                    return Err(Error::NodeOutOfRange { index: x, num_nodes });
                }
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }
        Ok(Self {
            offsets,
            targets,
            features,
            node_labels: None,
            splits: None,
        })
    }

    /// Builds a graph from raw CSR arrays, checking every storage invariant.
    pub fn from_csr(offsets: Vec<usize>, targets: Vec<usize>, features: Tensor) -> Result<Self> {
        let n = features.rows();
        if offsets.len() != n + 1 || offsets[0] != 0 || offsets[n] != targets.len() {
            return Err(Error::shape("graph", "csr offsets inconsistent with targets"));
        }
        if offsets.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::shape("graph", "csr offsets decrease"));
        }
        let g = Self {
            offsets,
            targets,
            features,
            node_labels: None,
            splits: None,
        };
        for u in 0..n {
            let nb = g.neighbors(u);
            if let Some(&t) = nb.iter().find(|&&t| t >= n) {
                return Err(Error::NodeOutOfRange { index: t, num_nodes: n });
            }
            if nb.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Invalid(format!("neighbors of {u} not strictly ascending")));
            }
            if nb.contains(&u) {
                return Err(Error::Invalid(format!("self-loop at {u}")));
            }
            if let Some(&v) = nb.iter().find(|&&v| !g.has_edge(v, u)) {
                return Err(Error::Invalid(format!("edge ({u},{v}) has no reverse")));
            }
        }
        Ok(g)
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.num_nodes() {
            return Err(Error::shape(
                "graph",
                format!("{} labels for {} nodes", labels.len(), self.num_nodes()),
            ));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn with_splits(mut self, splits: SplitMasks) -> Result<Self> {
        let n = self.num_nodes();
        if splits.train.len() != n || splits.val.len() != n || splits.test.len() != n {
            return Err(Error::shape("graph", "split masks do not match node count"));
        }
        self.splits = Some(splits);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Undirected edge count.
    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn node_labels(&self) -> Option<&[i64]> {
        self.node_labels.as_deref()
    }

    pub fn splits(&self) -> Option<&SplitMasks> {
        self.splits.as_ref()
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes() && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u).iter().copied().filter(move |&v| u < v).map(move |v| (u, v))
        })
    }

    /// Number of distinct labels `>= 0`, taken as `max + 1`.
    pub fn num_classes(&self) -> usize {
        self.node_labels
            .as_ref()
            .and_then(|l| l.iter().copied().max())
            .map_or(0, |m| (m.max(-1) + 1) as usize)
    }

    /// Copy of this graph with a different edge set (features, labels and splits kept).
    pub fn with_edge_list(&self, edges: &[(usize, usize)]) -> Result<Graph> {
        let mut g = Graph::from_edges(self.num_nodes(), edges, self.features.clone())?;
        g.node_labels = self.node_labels.clone();
        g.splits = self.splits.clone();
        Ok(g)
    }

    /// Connected component containing `v`, by breadth-first search.
    pub fn component_of(&self, v: usize) -> Vec<usize> {
        let mut seen = vec![false; self.num_nodes()];
        let mut queue = std::collections::VecDeque::from([v]);
        seen[v] = true;
        let mut out = Vec::new();
        while let Some(u) = queue.pop_front() {
            out.push(u);
            for &w in self.neighbors(u) {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        out
    }

    /// Hex SHA-256 over structure and features; keys on-disk caches.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_nodes() as u64).to_le_bytes());
        for &o in &self.offsets {
            h.update((o as u64).to_le_bytes());
        }
        for &t in &self.targets {
            h.update((t as u64).to_le_bytes());
        }
        h.update((self.features.cols() as u64).to_le_bytes());
        for v in self.features.data() {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Labeled set of graphs for whole-graph tasks.
#[derive(Clone, Debug)]
pub struct GraphCollection {
    pub graphs: Vec<Graph>,
    pub graph_labels: Vec<usize>,
    pub num_classes: usize,
}

impl GraphCollection {
    pub fn new(graphs: Vec<Graph>, graph_labels: Vec<usize>) -> Result<Self> {
        if graphs.len() != graph_labels.len() {
            return Err(Error::Invalid(format!(
                "{} graphs but {} labels",
                graphs.len(),
                graph_labels.len()
            )));
        }
        let num_classes = graph_labels.iter().copied().max().map_or(0, |m| m + 1);
        Ok(Self {
            graphs,
            graph_labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.graphs.first().map_or(0, |g| g.feature_dim())
    }

    pub fn avg_nodes(&self) -> f64 {
        if self.graphs.is_empty() {
            return 0.0;
        }
        self.graphs.iter().map(|g| g.num_nodes()).sum::<usize>() as f64 / self.graphs.len() as f64
    }
}

/// Where a subgraph came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Node { seed: usize },
    Edge { u: usize, v: usize, exists: bool },
    Graph { index: usize },
}

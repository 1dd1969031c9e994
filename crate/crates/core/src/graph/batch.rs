use std::collections::HashMap;

use super::{Graph, Provenance};
use crate::compute::{SparseOp, Tensor};
use crate::error::{Error, Result};

/// Block-diagonal union of subgraphs.
#[derive(Clone, Debug)]
pub struct SubgraphBatch {
    pub union_graph: Graph,
    /// Node range of subgraph `b` is `boundaries[b]..boundaries[b + 1]`.
    pub boundaries: Vec<usize>,
    pub sub_labels: Option<Vec<i64>>,
    pub provenance: Vec<Provenance>,
}

impl SubgraphBatch {
    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_nodes(&self) -> usize {
        self.union_graph.num_nodes()
    }

    /// First node of each subgraph.
    pub fn seed_rows(&self) -> Vec<usize> {
        self.boundaries[..self.len()].to_vec()
    }
}

/// Subgraph induced by `nodes`, renumbered in the given order.
pub fn induced_subgraph(g: &Graph, nodes: &[usize]) -> Result<Graph> {
    induced_inner(g, nodes, None)
}

/// Like [`induced_subgraph`] but drops the edge `(u, v)` if present.
///
/// Used for link-prediction subgraphs so the seed edge never leaks into the
/// structure the model sees.
pub fn induced_subgraph_excluding(g: &Graph, nodes: &[usize], excluded: (usize, usize)) -> Result<Graph> {
    induced_inner(g, nodes, Some(excluded))
}

fn induced_inner(g: &Graph, nodes: &[usize], excluded: Option<(usize, usize)>) -> Result<Graph> {
    let n = g.num_nodes();
    let mut local: HashMap<usize, usize> = HashMap::with_capacity(nodes.len());
    for (i, &v) in nodes.iter().enumerate() {
        if v >= n {
            return Err(Error::NodeOutOfRange { index: v, num_nodes: n });
        }
        if local.insert(v, i).is_some() {
            return Err(Error::DuplicateNode(v));
        }
    }
    let is_excluded = |a: usize, b: usize| match excluded {
        Some((x, y)) => (a == x && b == y) || (a == y && b == x),
        None => false,
    };
    let mut offsets = Vec::with_capacity(nodes.len() + 1);
    let mut targets = Vec::new();
    offsets.push(0);
    let mut buf = Vec::new();
    for &v in nodes {
        buf.clear();
        for &w in g.neighbors(v) {
            if let Some(&j) = local.get(&w) {
                if !is_excluded(v, w) {
                    buf.push(j);
                }
            }
        }
        buf.sort_unstable();
        targets.extend_from_slice(&buf);
        offsets.push(targets.len());
    }
    let features = g.features().select_rows(nodes);
    let mut sub = Graph {
        offsets,
        targets,
        features,
        node_labels: None,
        splits: None,
    };
    if let Some(labels) = g.node_labels() {
        sub.node_labels = Some(nodes.iter().map(|&v| labels[v]).collect());
    }
    Ok(sub)
}

/// Stacks subgraphs block-diagonally into one batch.
pub fn assemble_batch(subs: &[(Graph, Provenance, Option<i64>)]) -> Result<SubgraphBatch> {
    if subs.is_empty() {
        return Err(Error::Invalid("cannot assemble an empty batch".into()));
    }
    let d = subs[0].0.feature_dim();
    if let Some((i, _)) = subs.iter().enumerate().find(|(_, s)| s.0.feature_dim() != d) {
        return Err(Error::shape(
            "assemble_batch",
            format!("subgraph {i} has feature width {}, expected {d}", subs[i].0.feature_dim()),
        ));
    }
    let total: usize = subs.iter().map(|s| s.0.num_nodes()).sum();
    let mut boundaries = Vec::with_capacity(subs.len() + 1);
    let mut offsets = Vec::with_capacity(total + 1);
    let mut targets = Vec::with_capacity(subs.iter().map(|s| s.0.targets().len()).sum());
    let mut features = Vec::with_capacity(total * d);
    let all_labeled = subs.iter().all(|s| s.0.node_labels().is_some());
    let mut node_labels = Vec::new();
    boundaries.push(0);
    offsets.push(0);
    let mut base = 0;
    for (g, _, _) in subs {
        for u in 0..g.num_nodes() {
            targets.extend(g.neighbors(u).iter().map(|&v| v + base));
            offsets.push(targets.len());
        }
        features.extend_from_slice(g.features().data());
        if all_labeled {
            node_labels.extend_from_slice(g.node_labels().unwrap());
        }
        base += g.num_nodes();
        boundaries.push(base);
    }
    let mut union_graph = Graph {
        offsets,
        targets,
        features: Tensor::from_vec(total, d, features)?,
        node_labels: None,
        splits: None,
    };
    if all_labeled {
        union_graph.node_labels = Some(node_labels);
    }
    let sub_labels = if subs.iter().all(|s| s.2.is_some()) {
        Some(subs.iter().map(|s| s.2.unwrap()).collect())
    } else {
        None
    };
    Ok(SubgraphBatch {
        union_graph,
        boundaries,
        sub_labels,
        provenance: subs.iter().map(|s| s.1).collect(),
    })
}

/// Symmetric normalization with self-loops: `D^-1/2 (A + I) D^-1/2`, `D` the degree of `A + I`.
pub fn normalize_adjacency(g: &Graph) -> SparseOp {
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt()).collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut targets = Vec::with_capacity(g.targets().len() + n);
    let mut values = Vec::with_capacity(g.targets().len() + n);
    offsets.push(0);
    for u in 0..n {
        let mut placed_self = false;
        for &v in g.neighbors(u) {
            if !placed_self && v > u {
                targets.push(u);
                values.push(inv_sqrt[u] * inv_sqrt[u]);
                placed_self = true;
            }
            targets.push(v);
            values.push(inv_sqrt[u] * inv_sqrt[v]);
        }
        if !placed_self {
            targets.push(u);
            values.push(inv_sqrt[u] * inv_sqrt[u]);
        }
        offsets.push(targets.len());
    }
    SparseOp::new(n, offsets, targets, values).expect("normalized adjacency is well formed")
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;

    #[test]
    fn induced_triangle_pair() {
        let s = induced_subgraph(&triangle(), &[0, 1]).unwrap();
        assert_eq!(s.num_nodes(), 2);
        assert_eq!(s.num_edges(), 1);
    }

    #[test]
    fn induced_identity() {
        let g = cycle(6);
        let s = induced_subgraph(&g, &(0..6).collect::<Vec<_>>()).unwrap();
        assert_eq!(s, g);
    }

    #[test]
    fn induced_c4_opposite_corners() {
        // C4 edges are 01,12,23,30; none joins 0 and 2.
        let s = induced_subgraph(&cycle(4), &[0, 2]).unwrap();
        assert_eq!(s.num_nodes(), 2);
        assert_eq!(s.num_edges(), 0);
    }

    #[test]
    fn induced_keeps_given_order_and_features() {
        let g = path(4);
        let s = induced_subgraph(&g, &[2, 0, 1]).unwrap();
        assert_eq!(s.features().row(0), g.features().row(2));
        assert_eq!(s.neighbors(0), &[2]); // 2-1 becomes 0-2
        assert_eq!(s.neighbors(1), &[2]); // 0-1 becomes 1-2
    }

    #[test]
    fn induced_rejects_bad_indices() {
        assert!(matches!(induced_subgraph(&triangle(), &[0, 0]), Err(Error::DuplicateNode(0))));
        assert!(matches!(
            induced_subgraph(&triangle(), &[3]),
            Err(Error::NodeOutOfRange { .. })
        ));
    }

    #[test]
    fn excluding_drops_only_seed_edge() {
        let s = induced_subgraph_excluding(&cycle(4), &[0, 1, 2, 3], (1, 0)).unwrap();
        assert_eq!(s.num_edges(), 3);
        assert!(!s.has_edge(0, 1));
    }

    #[test]
    fn assemble_two_blocks() {
        let a = graph(3, &[(0, 1)]);
        let b = cycle(4);
        let batch = assemble_batch(&[
            (a, Provenance::Graph { index: 0 }, Some(0)),
            (b, Provenance::Graph { index: 1 }, Some(1)),
        ])
        .unwrap();
        assert_eq!(batch.num_nodes(), 7);
        assert_eq!(batch.boundaries, vec![0, 3, 7]);
        assert_eq!(batch.union_graph.num_edges(), 5);
        assert_eq!(batch.sub_labels, Some(vec![0, 1]));
    }

    #[test]
    fn assemble_singleton_is_identity() {
        let g = cycle(5);
        let batch = assemble_batch(&[(g.clone(), Provenance::Graph { index: 0 }, None)]).unwrap();
        assert_eq!(batch.union_graph, g);
        assert_eq!(batch.boundaries, vec![0, 5]);
        assert!(batch.sub_labels.is_none());
    }

    #[test]
    fn assemble_edge_and_triangle() {
        let batch = assemble_batch(&[
            (path(2), Provenance::Graph { index: 0 }, None),
            (triangle(), Provenance::Graph { index: 1 }, None),
        ])
        .unwrap();
        assert_eq!(batch.union_graph.num_edges(), 4);
        assert!(batch.union_graph.edges().all(|(u, v)| (u < 2) == (v < 2)));
    }

    #[test]
    fn assemble_rejects_width_mismatch_and_empty() {
        let a = Graph::from_edges(1, &[], Tensor::zeros(1, 2)).unwrap();
        let b = Graph::from_edges(1, &[], Tensor::zeros(1, 3)).unwrap();
        let p = Provenance::Graph { index: 0 };
        assert!(assemble_batch(&[(a, p, None), (b, p, None)]).is_err());
        assert!(assemble_batch(&[]).is_err());
    }

    #[test]
    fn normalized_small_cases() {
        let iso = Graph::from_edges(1, &[], Tensor::zeros(1, 1)).unwrap();
        assert_eq!(normalize_adjacency(&iso).to_dense().data(), &[1.0]);

        let edge = normalize_adjacency(&path(2)).to_dense();
        for v in edge.data() {
            assert!((v - 0.5).abs() < 1e-15);
        }

        let tri = normalize_adjacency(&triangle()).to_dense();
        for v in tri.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normalized_rows_sorted_with_diagonal() {
        let a = normalize_adjacency(&star(3));
        for i in 0..a.dim() {
            let cols: Vec<usize> = a.row(i).map(|(c, _)| c).collect();
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
            assert!(cols.contains(&i));
        }
        assert!(a.max_asymmetry() < 1e-12);
    }
}

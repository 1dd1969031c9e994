//! On-disk dataset formats.
//!
//! Node-task directory: `edges.tsv` (two 0-based integer columns per line),
//! `features.csv` (one comma-separated row per node), optional `labels.txt`
//! (one integer per node, -1 for unlabeled) and optional `splits.json`
//! (`{"train": [...], "val": [...], "test": [...]}`).
//!
//! Graph-task directory: `graph_indicator.txt` (graph id per node, 0-based),
//! `edges.tsv` over global node ids, `graph_labels.txt` (one per graph) and an
//! optional `features.csv` over global node ids.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Graph, GraphCollection, SplitMasks};
use crate::compute::Tensor;
use crate::error::{Error, Result};

/// Degree clip for the one-hot degree surrogate on featureless graphs.
pub const DEFAULT_MAX_DEGREE: usize = 400;

#[derive(Serialize, Deserialize)]
struct SplitFile {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

fn read_required(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
}

fn read_optional(dir: &Path, name: &str) -> Result<Option<String>> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    fs::read_to_string(&path).map(Some).map_err(|e| Error::io(&path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_edges(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (line, l) in content_lines(text) {
        let mut it = l.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err("edges.tsv", line, "expected two integer columns"));
        };
        let u = a.parse().map_err(|_| parse_err("edges.tsv", line, format!("bad node id `{a}`")))?;
        let v = b.parse().map_err(|_| parse_err("edges.tsv", line, format!("bad node id `{b}`")))?;
        edges.push((u, v));
    }
    Ok(edges)
}

fn parse_features(text: &str) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, l) in content_lines(text) {
        let before = data.len();
        for field in l.split(',') {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err("features.csv", line, format!("bad value `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err("features.csv", line, "non-finite value"));
            }
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(parse_err("features.csv", line, format!("{width} columns, expected {c}")));
            }
            _ => {}
        }
        rows += 1;
    }
    Tensor::from_vec(rows, cols.unwrap_or(0), data)
}

fn parse_ints(text: &str, file: &str) -> Result<Vec<i64>> {
    content_lines(text)
        .map(|(line, l)| l.parse().map_err(|_| parse_err(file, line, format!("bad integer `{l}`"))))
        .collect()
}

/// Loads a node-task dataset directory.
pub fn load_node_dataset(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let features = parse_features(&read_required(dir, "features.csv")?)?;
    let edges = parse_edges(&read_required(dir, "edges.tsv")?)?;
    let labels = read_optional(dir, "labels.txt")?
        .map(|t| parse_ints(&t, "labels.txt"))
        .transpose()?;
    let n = match &labels {
        Some(l) => l.len(),
        None => features.rows(),
    };
    if features.rows() != n {
        return Err(Error::Invalid(format!(
            "features.csv has {} rows but labels.txt declares {n} nodes",
            features.rows()
        )));
    }
    let mut g = Graph::from_edges(n, &edges, features)?;
    if let Some(l) = labels {
        g = g.with_labels(l)?;
    }
    if let Some(text) = read_optional(dir, "splits.json")? {
        let s: SplitFile = serde_json::from_str(&text).map_err(|e| parse_err("splits.json", e.line(), e.to_string()))?;
        g = g.with_splits(SplitMasks::from_indices(n, &s.train, &s.val, &s.test)?)?;
    }
    Ok(g)
}

fn write_file(path: &Path, body: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body).map_err(|e| Error::io(path, e))
}

fn features_csv(features: &Tensor) -> String {
    let mut out = String::with_capacity(features.len() * 2);
    for r in 0..features.rows() {
        for (j, v) in features.row(r).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Writes `g` in the node-task directory format.
pub fn write_node_dataset(dir: impl AsRef<Path>, g: &Graph) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut edges = String::new();
    for (u, v) in g.edges() {
        edges.push_str(&format!("{u}\t{v}\n"));
    }
    write_file(&dir.join("edges.tsv"), edges.as_bytes())?;
    write_file(&dir.join("features.csv"), features_csv(g.features()).as_bytes())?;
    if let Some(labels) = g.node_labels() {
        let body: String = labels.iter().map(|l| format!("{l}\n")).collect();
        write_file(&dir.join("labels.txt"), body.as_bytes())?;
    }
    if let Some(s) = g.splits() {
        let file = SplitFile {
            train: SplitMasks::indices(&s.train),
            val: SplitMasks::indices(&s.val),
            test: SplitMasks::indices(&s.test),
        };
        let body = serde_json::to_string(&file).expect("split serialization");
        write_file(&dir.join("splits.json"), body.as_bytes())?;
    }
    Ok(())
}

/// Loads a graph-task dataset with the default degree clip.
pub fn load_graph_dataset(dir: impl AsRef<Path>) -> Result<GraphCollection> {
    load_graph_dataset_with(dir, DEFAULT_MAX_DEGREE)
}

/// Loads a graph-task dataset; featureless collections get one-hot degree
/// features, clipped at `max_degree`.
pub fn load_graph_dataset_with(dir: impl AsRef<Path>, max_degree: usize) -> Result<GraphCollection> {
    let dir = dir.as_ref();
    let indicator = parse_ints(&read_required(dir, "graph_indicator.txt")?, "graph_indicator.txt")?;
    let raw_labels = parse_ints(&read_required(dir, "graph_labels.txt")?, "graph_labels.txt")?;
    let edges = parse_edges(&read_required(dir, "edges.tsv")?)?;
    let features = read_optional(dir, "features.csv")?.map(|t| parse_features(&t)).transpose()?;

    let num_graphs = raw_labels.len();
    let total = indicator.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
    let mut local = vec![0usize; total];
    for (node, &gid) in indicator.iter().enumerate() {
        if gid < 0 || gid as usize >= num_graphs {
            return Err(Error::Invalid(format!(
                "node {node} points at graph {gid}, but only {num_graphs} graph labels exist"
            )));
        }
        let list = &mut members[gid as usize];
        local[node] = list.len();
        list.push(node);
    }
    if let Some(gid) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::Invalid(format!("graph {gid} has a label but no nodes")));
    }
    if let Some(f) = &features {
        if f.rows() != total {
            return Err(Error::Invalid(format!(
                "features.csv has {} rows for {total} nodes",
                f.rows()
            )));
        }
    }

    let mut per_graph_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for &(u, v) in &edges {
        if u >= total || v >= total {
            return Err(Error::NodeOutOfRange {
                index: u.max(v),
                num_nodes: total,
            });
        }
        let (gu, gv) = (indicator[u], indicator[v]);
        if gu != gv {
            return Err(Error::Invalid(format!("edge ({u},{v}) joins graphs {gu} and {gv}")));
        }
        per_graph_edges[gu as usize].push((local[u], local[v]));
    }

    // Remap arbitrary label values (e.g. -1/1) to 0..C in sorted order.
    let distinct: BTreeSet<i64> = raw_labels.iter().copied().collect();
    let label_index: Vec<i64> = distinct.into_iter().collect();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| label_index.binary_search(l).expect("label present"))
        .collect();

    let mut graphs = Vec::with_capacity(num_graphs);
    for (gid, nodes) in members.iter().enumerate() {
        let placeholder = Tensor::zeros(nodes.len(), 0);
        let g = Graph::from_edges(nodes.len(), &per_graph_edges[gid], placeholder)?;
        let feats = match &features {
            Some(f) => f.select_rows(nodes),
            None => Tensor::zeros(nodes.len(), 0),
        };
        graphs.push(Graph { features: feats, ..g });
    }
    if features.is_none() {
        let top = graphs
            .iter()
            .flat_map(|g| (0..g.num_nodes()).map(move |v| g.degree(v)))
            .max()
            .unwrap_or(0)
            .min(max_degree);
        for g in graphs.iter_mut() {
            let mut f = Tensor::zeros(g.num_nodes(), top + 1);
            for v in 0..g.num_nodes() {
                f.set(v, g.degree(v).min(top), 1.0);
            }
            g.features = f;
        }
    }
    GraphCollection::new(graphs, labels)
}

/// Writes a collection in the graph-task directory format.
pub fn write_graph_dataset(dir: impl AsRef<Path>, coll: &GraphCollection, with_features: bool) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut indicator = String::new();
    let mut edges = String::new();
    let mut feats = String::new();
    let mut base = 0;
    for (gid, g) in coll.graphs.iter().enumerate() {
        for _ in 0..g.num_nodes() {
            indicator.push_str(&format!("{gid}\n"));
        }
        for (u, v) in g.edges() {
            edges.push_str(&format!("{}\t{}\n", u + base, v + base));
        }
        if with_features {
            feats.push_str(&features_csv(g.features()));
        }
        base += g.num_nodes();
    }
    let labels: String = coll.graph_labels.iter().map(|l| format!("{l}\n")).collect();
    write_file(&dir.join("graph_indicator.txt"), indicator.as_bytes())?;
    write_file(&dir.join("edges.tsv"), edges.as_bytes())?;
    write_file(&dir.join("graph_labels.txt"), labels.as_bytes())?;
    if with_features {
        write_file(&dir.join("features.csv"), feats.as_bytes())?;
    }
    Ok(())
}

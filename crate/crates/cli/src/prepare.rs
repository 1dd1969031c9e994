//! Conversion of public dataset dumps into the directory formats read by
//! the core loaders.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use amgae_core::compute::Tensor;
use amgae_core::graph::{write_graph_dataset, write_node_dataset, Graph, GraphCollection, SplitMasks};
use amgae_core::rng::RngStream;
use amgae_core::{Error, Result};
use rand::seq::SliceRandom;

fn read(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Sizes of the planetoid-style split.
#[derive(Clone, Copy, Debug)]
pub struct SplitSizes {
    pub train_per_class: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            train_per_class: 20,
            val: 500,
            test: 1000,
        }
    }
}

/// Seeded split: `train_per_class` nodes of every class for training, then
/// `val` and `test` nodes from the shuffled remainder.
pub fn planetoid_split(labels: &[i64], sizes: SplitSizes, seed: u64) -> Result<SplitMasks> {
    let mut rng = RngStream::new(seed).derive("planetoid_split").rng();
    let classes: BTreeSet<i64> = labels.iter().copied().filter(|&l| l >= 0).collect();
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for c in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        if members.len() <= sizes.train_per_class {
            return Err(Error::Invalid(format!("class {c} has only {} nodes", members.len())));
        }
        let tail = members.split_off(sizes.train_per_class);
        train.extend(members);
        rest.extend(tail);
    }
    rest.sort_unstable();
    rest.shuffle(&mut rng);
    if rest.len() < sizes.val + sizes.test {
        return Err(Error::Invalid(format!(
            "{} nodes left for {} validation and {} test nodes",
            rest.len(),
            sizes.val,
            sizes.test
        )));
    }
    let val = &rest[..sizes.val];
    let test = &rest[sizes.val..sizes.val + sizes.test];
    SplitMasks::from_indices(labels.len(), &train, val, test)
}

/// Reads a LINQS citation dump (`<id> <features...> <label>` lines plus
/// `<cited> <citing>` pairs). Citations naming unknown papers are dropped
/// and counted.
pub fn read_linqs(content: &Path, cites: &Path) -> Result<(Graph, Vec<String>, usize)> {
    let text = read(content)?;
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 3 {
            return Err(parse_err(content, i + 1, "expected id, features and label"));
        }
        let feats = fields[1..fields.len() - 1]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(content, i + 1, format!("bad feature `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != feats.len() {
                return Err(parse_err(content, i + 1, "feature width differs from the first row"));
            }
        }
        if ids.insert(fields[0].to_string(), rows.len()).is_some() {
            return Err(parse_err(content, i + 1, format!("duplicate paper id {}", fields[0])));
        }
        rows.push(feats);
        raw_labels.push(fields[fields.len() - 1].to_string());
    }
    let names: Vec<String> = raw_labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let labels: Vec<i64> = raw_labels
        .iter()
        .map(|l| names.binary_search(l).expect("known label") as i64)
        .collect();

    let text = read(cites)?;
    let mut edges = Vec::new();
    let mut dropped = 0;
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 {
            return Err(parse_err(cites, i + 1, "expected two paper ids"));
        }
        match (ids.get(fields[0]), ids.get(fields[1])) {
            (Some(&a), Some(&b)) => edges.push((a, b)),
            _ => dropped += 1,
        }
    }
    let n = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    let features = Tensor::from_vec(n, width, rows.into_iter().flatten().collect())?;
    let g = Graph::from_edges(n, &edges, features)?.with_labels(labels)?;
    Ok((g, names, dropped))
}

pub fn prepare_linqs(content: &Path, cites: &Path, out: &Path, seed: u64, sizes: SplitSizes) -> Result<Graph> {
    let (g, _, _) = read_linqs(content, cites)?;
    let labels = g.node_labels().expect("labels set").to_vec();
    let g = g.with_splits(planetoid_split(&labels, sizes, seed)?)?;
    write_node_dataset(out, &g)?;
    Ok(g)
}

fn ints(path: &Path) -> Result<Vec<i64>> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.trim().parse().map_err(|_| parse_err(path, i + 1, format!("bad integer `{}`", l.trim()))))
        .collect()
}

/// Reads a TU-format collection (`NAME_A.txt`, `NAME_graph_indicator.txt`,
/// `NAME_graph_labels.txt`, optional `NAME_node_labels.txt`). Node labels
/// become one-hot features; without them the graphs are featureless.
pub fn read_tu(dir: &Path, name: &str) -> Result<(GraphCollection, bool)> {
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));
    let indicator = ints(&file("graph_indicator"))?;
    let raw_labels = ints(&file("graph_labels"))?;
    let node_labels_path = file("node_labels");
    let node_labels = if node_labels_path.exists() {
        Some(ints(&node_labels_path)?)
    } else {
        None
    };
    let a_path = file("A");
    let mut edges = Vec::new();
    for (i, line) in read(&a_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| s.parse::<usize>().map_err(|_| parse_err(&a_path, i + 1, format!("bad node id `{s}`")));
        if parts.len() != 2 {
            return Err(parse_err(&a_path, i + 1, "expected `i, j`"));
        }
        let (u, v) = (parse(parts[0])?, parse(parts[1])?);
        if u == 0 || v == 0 || u > indicator.len() || v > indicator.len() {
            return Err(parse_err(&a_path, i + 1, "node id outside 1..N"));
        }
        edges.push((u - 1, v - 1));
    }

    let num_graphs = raw_labels.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
    let mut local = vec![0; indicator.len()];
    for (node, &gid) in indicator.iter().enumerate() {
        if gid < 1 || gid as usize > num_graphs {
            return Err(Error::Invalid(format!("node {} belongs to unknown graph {gid}", node + 1)));
        }
        local[node] = members[gid as usize - 1].len();
        members[gid as usize - 1].push(node);
    }
    let mut per_graph: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for (u, v) in edges {
        if indicator[u] != indicator[v] {
            return Err(Error::Invalid(format!("edge ({}, {}) joins two graphs", u + 1, v + 1)));
        }
        per_graph[indicator[u] as usize - 1].push((local[u], local[v]));
    }
    let vocab: BTreeMap<i64, usize> = node_labels
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    let classes: Vec<i64> = raw_labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut graphs = Vec::with_capacity(num_graphs);
    for (gid, nodes) in members.iter().enumerate() {
        let mut f = Tensor::zeros(nodes.len(), vocab.len());
        if let Some(nl) = &node_labels {
            for (i, &node) in nodes.iter().enumerate() {
                f.set(i, vocab[&nl[node]], 1.0);
            }
        }
        graphs.push(Graph::from_edges(nodes.len(), &per_graph[gid], f)?);
    }
    let labels = raw_labels
        .iter()
        .map(|l| classes.binary_search(l).expect("known class"))
        .collect();
    Ok((GraphCollection::new(graphs, labels)?, node_labels.is_some()))
}

pub fn prepare_tu(dir: &Path, name: &str, out: &Path) -> Result<GraphCollection> {
    let (coll, has_features) = read_tu(dir, name)?;
    write_graph_dataset(out, &coll, has_features)?;
    Ok(coll)
}

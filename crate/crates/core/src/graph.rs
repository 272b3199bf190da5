//! Undirected weighted graph in CSR form, plus the degree statistics and
//! per-node alias tables that back weighted neighbor sampling.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;

use crate::alias;
use crate::error::{Error, Result};
use crate::NodeId;

/// Immutable training substrate: symmetric adjacency with positive edge
/// weights, dense node ids, no self-loops.
///
/// Adjacency is CSR with per-node neighbor lists sorted by id. Each node also
/// carries a prebuilt alias segment so a weighted walk step costs O(1).
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    weights: Vec<f32>,
    degrees: Vec<f64>,
    edge_count: usize,
    // Per-edge alias slots; alias indices are local to the node's segment.
    step_prob: Vec<f64>,
    step_alias: Vec<u32>,
    labels: Option<LabelMap>,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Graph")
            .field("nodes", &self.node_count())
            .field("edges", &self.edge_count)
            .finish()
    }
}

/// Original node labels and their dense ids, first-seen order.
#[derive(Clone)]
pub struct LabelMap {
    names: Vec<String>,
    ids: HashMap<String, NodeId>,
}

impl LabelMap {
    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v as usize]
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.ids.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, NodeId)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i as NodeId))
    }
}

/// Counts reported by edge ingestion.
#[derive(Debug, Default, Clone, Copy)]
pub struct IngestStats {
    pub self_loops_dropped: u64,
    pub duplicate_edges_merged: u64,
}

impl Graph {
    /// Builds a graph from raw (src, dst, weight) records with dense ids in
    /// `[0, node_count)`. Edges are symmetrized, duplicates (in either
    /// direction) have their weights summed, and self-loops are dropped.
    pub fn from_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId, f32)>,
        labels: Option<LabelMap>,
    ) -> Result<Graph> {
        let (g, _) = Graph::ingest(node_count, edges, labels)?;
        Ok(g)
    }

    pub fn ingest(
        node_count: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId, f32)>,
        labels: Option<LabelMap>,
    ) -> Result<(Graph, IngestStats)> {
        let mut stats = IngestStats::default();
        let mut undirected: Vec<(NodeId, NodeId, f32)> = Vec::new();
        for (u, v, w) in edges {
            if u as usize >= node_count || v as usize >= node_count {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) outside node range"
                )));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) has weight {w}, must be > 0"
                )));
            }
            if u == v {
                stats.self_loops_dropped += 1;
                continue;
            }
            undirected.push((u.min(v), u.max(v), w));
        }
        if undirected.is_empty() {
            return Err(Error::invalid("graph has no edges"));
        }

        undirected.sort_unstable_by_key(|&(u, v, _)| (u, v));
        let mut merged: Vec<(NodeId, NodeId, f32)> = Vec::with_capacity(undirected.len());
        for (u, v, w) in undirected {
            match merged.last_mut() {
                Some(last) if last.0 == u && last.1 == v => {
                    last.2 += w;
                    stats.duplicate_edges_merged += 1;
                }
                _ => merged.push((u, v, w)),
            }
        }
        let edge_count = merged.len();

        let mut counts = vec![0usize; node_count];
        for &(u, v, _) in &merged {
            counts[u as usize] += 1;
            counts[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for c in &counts {
            acc += c;
            offsets.push(acc);
        }

        let mut neighbors = vec![0 as NodeId; acc];
        let mut weights = vec![0f32; acc];
        let mut cursor = offsets[..node_count].to_vec();
        // Insert in (u, v) sorted order so each segment comes out sorted.
        for &(u, v, w) in &merged {
            let cu = &mut cursor[u as usize];
            neighbors[*cu] = v;
            weights[*cu] = w;
            *cu += 1;
        }
        for &(u, v, w) in &merged {
            let cv = &mut cursor[v as usize];
            neighbors[*cv] = u;
            weights[*cv] = w;
            *cv += 1;
        }
        // The two passes above leave each segment as "greater ids then
        // smaller ids"; sort segments to restore neighbor order.
        for v in 0..node_count {
            let seg = offsets[v]..offsets[v + 1];
            let mut pairs: Vec<(NodeId, f32)> = neighbors[seg.clone()]
                .iter()
                .copied()
                .zip(weights[seg.clone()].iter().copied())
                .collect();
            pairs.sort_unstable_by_key(|&(n, _)| n);
            for (k, (n, w)) in pairs.into_iter().enumerate() {
                neighbors[offsets[v] + k] = n;
                weights[offsets[v] + k] = w;
            }
        }

        let degrees: Vec<f64> = (0..node_count)
            .map(|v| {
                weights[offsets[v]..offsets[v + 1]]
                    .iter()
                    .map(|&w| w as f64)
                    .sum()
            })
            .collect();

        let (step_prob, step_alias) = build_step_tables(&offsets, &weights);

        Ok((
            Graph {
                offsets,
                neighbors,
                weights,
                degrees,
                edge_count,
                step_prob,
                step_alias,
                labels,
            },
            stats,
        ))
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, v: NodeId) -> f64 {
        self.degrees[v as usize]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.neighbors[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    pub fn neighbor_weights(&self, v: NodeId) -> &[f32] {
        &self.weights[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    pub fn labels(&self) -> Option<&LabelMap> {
        self.labels.as_ref()
    }

    /// Printable name for a node: its original label when one exists,
    /// otherwise the dense id.
    pub fn node_name(&self, v: NodeId) -> String {
        match &self.labels {
            Some(m) => m.name(v).to_string(),
            None => v.to_string(),
        }
    }

    /// Resolves a node reference from a label file: label-map lookup first,
    /// falling back to a dense-id literal for unlabeled graphs.
    pub fn resolve(&self, name: &str) -> Option<NodeId> {
        if let Some(m) = &self.labels {
            return m.id(name);
        }
        name.parse::<NodeId>()
            .ok()
            .filter(|&v| (v as usize) < self.node_count())
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// One weighted walk step from `v`; `None` if `v` is isolated.
    pub fn step<R: Rng + ?Sized>(&self, v: NodeId, rng: &mut R) -> Option<NodeId> {
        let seg = self.offsets[v as usize]..self.offsets[v as usize + 1];
        let deg = seg.len();
        if deg == 0 {
            return None;
        }
        let k = rng.random_range(0..deg);
        let local = if rng.random::<f64>() < self.step_prob[seg.start + k] {
            k
        } else {
            self.step_alias[seg.start + k] as usize
        };
        Some(self.neighbors[seg.start + local])
    }

    /// Iterates undirected edges as (u, v, w) with u < v.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f32)> + '_ {
        (0..self.node_count() as NodeId).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .zip(self.neighbor_weights(u))
                .filter(move |&(&v, _)| u < v)
                .map(move |(&v, &w)| (u, v, w))
        })
    }
}

fn build_step_tables(offsets: &[usize], weights: &[f32]) -> (Vec<f64>, Vec<u32>) {
    let mut prob = vec![1.0f64; weights.len()];
    let mut alias: Vec<u32> = Vec::with_capacity(weights.len());
    for v in 0..offsets.len() - 1 {
        for k in 0..offsets[v + 1] - offsets[v] {
            alias.push(k as u32);
        }
    }
    let mut scaled = Vec::new();
    for v in 0..offsets.len() - 1 {
        let seg = offsets[v]..offsets[v + 1];
        if seg.is_empty() {
            continue;
        }
        let total: f64 = weights[seg.clone()].iter().map(|&w| w as f64).sum();
        let n = seg.len() as f64;
        scaled.clear();
        scaled.extend(weights[seg.clone()].iter().map(|&w| w as f64 * n / total));
        alias::vose_fill(&mut scaled, &mut prob[seg.clone()], &mut alias[seg]);
    }
    (prob, alias)
}

/// Per-node weights `degree^power` for the negative-sampling noise
/// distribution. Isolated nodes get weight 0 for every power.
pub fn degree_noise_weights(g: &Graph, power: f64) -> Vec<f64> {
    debug_assert!(power >= 0.0);
    g.degrees().iter().map(|&d| if d > 0.0 { d.powf(power) } else { 0.0 }).collect()
}

/// Loads a tab- or space-separated edge list. Lines are `src dst` or
/// `src dst weight`; `#` starts a comment. Node labels are arbitrary strings
/// mapped to dense ids in first-seen order. With `weighted` unset the third
/// column is ignored and every edge has weight 1.
pub fn load_edge_list(path: &Path, weighted: bool) -> Result<(Graph, IngestStats)> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let reader = BufReader::new(file);

    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut edges: Vec<(NodeId, NodeId, f32)> = Vec::new();
    let intern = |tok: &str, names: &mut Vec<String>, ids: &mut HashMap<String, NodeId>| {
        *ids.entry(tok.to_string()).or_insert_with(|| {
            names.push(tok.to_string());
            (names.len() - 1) as NodeId
        })
    };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let parts: Vec<&str> = body.split_whitespace().collect();
        let parse_err = |reason: String| Error::ParseEdge {
            path: path.to_path_buf(),
            line: lineno,
            reason,
        };
        if parts.len() < 2 || parts.len() > 3 {
            return Err(parse_err(format!(
                "expected 2 or 3 columns, found {}",
                parts.len()
            )));
        }
        let w = if weighted && parts.len() == 3 {
            let w: f64 = parts[2]
                .parse()
                .map_err(|_| parse_err(format!("bad weight {:?}", parts[2])))?;
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid(format!(
                    "{}:{lineno}: negative or non-finite weight {w}",
                    path.display()
                )));
            }
            if w == 0.0 {
                return Err(Error::invalid(format!(
                    "{}:{lineno}: zero-weight edge",
                    path.display()
                )));
            }
            w as f32
        } else {
            1.0
        };
        let u = intern(parts[0], &mut names, &mut ids);
        let v = intern(parts[1], &mut names, &mut ids);
        edges.push((u, v, w));
    }

    if names.is_empty() {
        return Err(Error::invalid(format!("{}: empty graph", path.display())));
    }
    let labels = LabelMap { names, ids };
    Graph::ingest(labels.names.len(), edges, Some(labels))
}

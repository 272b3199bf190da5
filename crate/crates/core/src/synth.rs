//! Synthetic test graphs: stochastic block models for community-recovery
//! checks and uniform random graphs for throughput work.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seeds;
use crate::NodeId;

/// Stochastic block model with `communities` equal contiguous blocks:
/// within-block pairs get an edge with probability `p_in`, cross-block pairs
/// with `p_out`. Returns the graph and each node's community id.
///
/// Pairwise sampling, so only sensible for a few thousand nodes.
pub fn sbm(
    nodes: usize,
    communities: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, Vec<u32>)> {
    if communities == 0 || communities > nodes {
        return Err(Error::config("bad community count"));
    }
    let labels: Vec<u32> = (0..nodes)
        .map(|v| (v * communities / nodes) as u32)
        .collect();
    let mut rng = seeds::rng(seed, &[0x5b]);
    let mut edges = Vec::new();
    for u in 0..nodes {
        for v in u + 1..nodes {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u as NodeId, v as NodeId, 1.0));
            }
        }
    }
    let graph = Graph::from_edges(nodes, edges, None)?;
    Ok((graph, labels))
}

/// Uniform random graph with exactly `edges` distinct undirected edges.
pub fn gnm(nodes: usize, edges: usize, seed: u64) -> Result<Graph> {
    let max_edges = nodes * (nodes - 1) / 2;
    if edges == 0 || edges > max_edges {
        return Err(Error::config(format!(
            "cannot place {edges} edges on {nodes} nodes"
        )));
    }
    let mut rng = seeds::rng(seed, &[0x63]);
    let mut seen: HashSet<(NodeId, NodeId)> = HashSet::with_capacity(edges);
    let mut list = Vec::with_capacity(edges);
    while list.len() < edges {
        let u = rng.random_range(0..nodes as NodeId);
        let v = rng.random_range(0..nodes as NodeId);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            list.push((key.0, key.1, 1.0));
        }
    }
    Graph::from_edges(nodes, list, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sbm_shape_and_density() {
        let (g, labels) = sbm(300, 3, 0.2, 0.01, 7).unwrap();
        assert_eq!(g.node_count(), 300);
        assert_eq!(labels.iter().filter(|&&c| c == 0).count(), 100);
        // expected edges: 3 * C(100,2) * 0.2 + cross * 0.01 ~ 2970 + 300
        let e = g.edge_count() as f64;
        assert!(e > 2500.0 && e < 4000.0, "edge count {e}");
    }

    #[test]
    fn gnm_exact_edge_count() {
        let g = gnm(1000, 5000, 3).unwrap();
        assert_eq!(g.node_count(), 1000);
        assert_eq!(g.edge_count(), 5000);
    }
}

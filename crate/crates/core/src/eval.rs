//! Embedding quality protocols: multi-label node classification with
//! one-vs-rest linear classifiers, and link prediction scored by cosine
//! similarity and summarized as AUC.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seeds;
use crate::trainer::EmbeddingMatrix;
use crate::NodeId;

/// Multi-label ground truth: rows (into an embedding matrix) with their
/// class-id sets. Class ids are dense.
#[derive(Debug, Clone)]
pub struct LabeledNodes {
    entries: Vec<(u32, Vec<u32>)>,
    num_classes: usize,
}

impl LabeledNodes {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut by_node: std::collections::BTreeMap<u32, Vec<u32>> = Default::default();
        let mut num_classes = 0;
        for (node, class) in pairs {
            num_classes = num_classes.max(class as usize + 1);
            let classes = by_node.entry(node).or_default();
            if !classes.contains(&class) {
                classes.push(class);
            }
        }
        LabeledNodes {
            entries: by_node.into_iter().collect(),
            num_classes,
        }
    }

    /// One single-label entry per node, as produced by a community model.
    pub fn from_community_labels(labels: &[u32]) -> Self {
        Self::from_pairs(labels.iter().enumerate().map(|(v, &c)| (v as u32, c)))
    }

    /// Parses `node_label<TAB>class_id` lines (multiple lines per node
    /// allowed); `resolve` maps node labels to embedding rows. Class labels
    /// are interned densely in first-seen order.
    pub fn load(path: &Path, mut resolve: impl FnMut(&str) -> Option<u32>) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        let mut class_ids: std::collections::HashMap<String, u32> = Default::default();
        let mut pairs = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| Error::Io {
                path: path.into(),
                source: e,
            })?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut cols = body.split_whitespace();
            let (Some(node), Some(class), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::ParseLabel {
                    path: path.into(),
                    line: lineno,
                    reason: "expected exactly 2 columns".into(),
                });
            };
            let Some(row) = resolve(node) else {
                return Err(Error::ParseLabel {
                    path: path.into(),
                    line: lineno,
                    reason: format!("unknown node {node:?}"),
                });
            };
            let next_id = class_ids.len() as u32;
            let class = *class_ids.entry(class.to_string()).or_insert(next_id);
            pairs.push((row, class));
        }
        Ok(Self::from_pairs(pairs))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn entries(&self) -> &[(u32, Vec<u32>)] {
        &self.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Scores {
    pub micro_f1: f64,
    pub macro_f1: f64,
}

/// One-vs-rest evaluation protocol: train linear classifiers on a labeled
/// fraction, score the rest, and predict each test node's top-k classes
/// where k is its true label count. Micro/Macro F1 are averaged over
/// `trials` reshuffled splits.
pub fn node_classification(
    x: &EmbeddingMatrix,
    labeled: &LabeledNodes,
    train_fraction: f64,
    trials: usize,
    normalize: bool,
    seed: u64,
) -> Result<F1Scores> {
    if labeled.is_empty() {
        return Err(Error::invalid("no labeled nodes"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid("train fraction must be in (0, 1)"));
    }
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }

    let features = if normalize {
        let mut copy = x.clone();
        copy.normalize_rows();
        copy
    } else {
        x.clone()
    };

    let k = labeled.num_classes();
    let mut micro_sum = 0.0;
    let mut macro_sum = 0.0;
    for trial in 0..trials {
        let mut order: Vec<usize> = (0..labeled.len()).collect();
        let mut train_len = ((labeled.len() as f64) * train_fraction).round() as usize;
        train_len = train_len.clamp(1, labeled.len() - 1);

        // resample until every class has a training example
        let mut rng = seeds::rng(seed, &[0xc1, trial as u64]);
        let mut found = false;
        for _ in 0..50 {
            order.shuffle(&mut rng);
            let mut present = vec![false; k];
            for &i in &order[..train_len] {
                for &c in &labeled.entries()[i].1 {
                    present[c as usize] = true;
                }
            }
            if present.iter().all(|&p| p) {
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::invalid(
                "could not sample a training split covering every class",
            ));
        }

        let (train_idx, test_idx) = order.split_at(train_len);
        let classifiers = train_one_vs_rest(&features, labeled, train_idx, k);
        let (micro, macro_f1) = score_top_k(&features, labeled, test_idx, &classifiers);
        micro_sum += micro;
        macro_sum += macro_f1;
    }

    Ok(F1Scores {
        micro_f1: micro_sum / trials as f64,
        macro_f1: macro_sum / trials as f64,
    })
}

/// Full-batch gradient descent on logistic loss, fixed iteration budget.
/// Weight layout: dim coefficients then a bias term.
fn train_one_vs_rest(
    x: &EmbeddingMatrix,
    labeled: &LabeledNodes,
    train_idx: &[usize],
    num_classes: usize,
) -> Vec<Vec<f64>> {
    const ITERS: usize = 300;
    const STEP: f64 = 2.0;

    let dim = x.dim;
    let m = train_idx.len() as f64;
    (0..num_classes as u32)
        .map(|class| {
            let mut w = vec![0.0f64; dim + 1];
            let targets: Vec<f64> = train_idx
                .iter()
                .map(|&i| labeled.entries()[i].1.contains(&class) as u8 as f64)
                .collect();
            for _ in 0..ITERS {
                let mut grad = vec![0.0f64; dim + 1];
                for (&i, &y) in train_idx.iter().zip(&targets) {
                    let row = x.row(labeled.entries()[i].0 as usize);
                    let mut z = w[dim];
                    for (j, &v) in row.iter().enumerate() {
                        z += w[j] * v as f64;
                    }
                    let p = 1.0 / (1.0 + (-z).exp());
                    let err = p - y;
                    for (j, &v) in row.iter().enumerate() {
                        grad[j] += err * v as f64;
                    }
                    grad[dim] += err;
                }
                for (wj, gj) in w.iter_mut().zip(&grad) {
                    *wj -= STEP * gj / m;
                }
            }
            w
        })
        .collect()
}

fn score_top_k(
    x: &EmbeddingMatrix,
    labeled: &LabeledNodes,
    test_idx: &[usize],
    classifiers: &[Vec<f64>],
) -> (f64, f64) {
    let dim = x.dim;
    let k = classifiers.len();
    let mut tp = vec![0u64; k];
    let mut fp = vec![0u64; k];
    let mut fn_ = vec![0u64; k];

    for &i in test_idx {
        let (row_id, truth) = &labeled.entries()[i];
        let row = x.row(*row_id as usize);
        let mut scores: Vec<(f64, u32)> = classifiers
            .iter()
            .enumerate()
            .map(|(c, w)| {
                let mut z = w[dim];
                for (j, &v) in row.iter().enumerate() {
                    z += w[j] * v as f64;
                }
                (z, c as u32)
            })
            .collect();
        // top-k classes, k = number of true labels; ties broken by class id
        scores.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let predicted: Vec<u32> = scores.iter().take(truth.len()).map(|&(_, c)| c).collect();

        for &c in &predicted {
            if truth.contains(&c) {
                tp[c as usize] += 1;
            } else {
                fp[c as usize] += 1;
            }
        }
        for &c in truth {
            if !predicted.contains(&c) {
                fn_[c as usize] += 1;
            }
        }
    }

    let (tp_all, fp_all, fn_all) = (
        tp.iter().sum::<u64>(),
        fp.iter().sum::<u64>(),
        fn_.iter().sum::<u64>(),
    );
    let micro = f1(tp_all, fp_all, fn_all);

    // macro over classes with test support
    let mut macro_sum = 0.0;
    let mut classes_with_support = 0;
    for c in 0..k {
        if tp[c] + fn_[c] > 0 {
            macro_sum += f1(tp[c], fp[c], fn_[c]);
            classes_with_support += 1;
        }
    }
    let macro_f1 = if classes_with_support > 0 {
        macro_sum / classes_with_support as f64
    } else {
        0.0
    };
    (micro, macro_f1)
}

fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    2.0 * p * r / (p + r)
}

/// Held-out positive edges and matched negative non-edges.
#[derive(Debug, Clone)]
pub struct LinkPredSplit {
    pub positives: Vec<(NodeId, NodeId)>,
    pub negatives: Vec<(NodeId, NodeId)>,
}

/// Removes `holdout_fraction` of the edges (symmetrically) from `g` and
/// pairs them with an equal number of uniformly sampled node pairs that are
/// not edges of the full graph. Deterministic under `seed`.
pub fn make_linkpred_split(
    g: &Graph,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(LinkPredSplit, Graph)> {
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::invalid("holdout fraction must be in [0, 1)"));
    }
    let mut edges: Vec<(NodeId, NodeId, f32)> = g.edges().collect();
    let hold = ((edges.len() as f64) * holdout_fraction).round() as usize;

    let mut rng = seeds::rng(seed, &[0x11]);
    let (chosen, kept) = edges.partial_shuffle(&mut rng, hold);
    let positives: Vec<(NodeId, NodeId)> = chosen.iter().map(|&(u, v, _)| (u, v)).collect();
    let kept: Vec<(NodeId, NodeId, f32)> = kept.to_vec();

    // |negatives| = |positives| unless the graph is so dense the non-edge
    // space runs out first.
    let non_edges = g.node_count() * (g.node_count() - 1) / 2 - g.edge_count();
    let want = hold.min(non_edges);
    let mut negatives = Vec::with_capacity(want);
    let mut seen: HashSet<(NodeId, NodeId)> = HashSet::new();
    let n = g.node_count() as NodeId;
    let mut attempts = 0u64;
    while negatives.len() < want {
        attempts += 1;
        if attempts > 10_000 * (hold as u64 + 1) {
            return Err(Error::invalid("could not sample enough negative pairs"));
        }
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if g.has_edge(key.0, key.1) || !seen.insert(key) {
            continue;
        }
        negatives.push(key);
    }

    let reduced = Graph::from_edges(g.node_count(), kept, g.labels().cloned())?;
    Ok((
        LinkPredSplit {
            positives,
            negatives,
        },
        reduced,
    ))
}

/// Cosine similarity; zero rows score 0.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += (x as f64).powi(2);
        nb += (y as f64).powi(2);
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Rank-statistic AUC with ties counted half.
pub fn auc_from_scores(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("empty split"));
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut rank_sum_pos = 0.0f64;
    let mut i = 0usize;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // average rank of the tie group, 1-based
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }

    let m = pos.len() as f64;
    let n = neg.len() as f64;
    Ok((rank_sum_pos - m * (m + 1.0) / 2.0) / (m * n))
}

/// AUC of cosine-similarity scores over a link-prediction split.
pub fn link_prediction_auc(x: &EmbeddingMatrix, split: &LinkPredSplit) -> Result<f64> {
    let score = |pairs: &[(NodeId, NodeId)]| -> Vec<f64> {
        pairs
            .iter()
            .map(|&(u, v)| cosine(x.row(u as usize), x.row(v as usize)))
            .collect()
    };
    auc_from_scores(&score(&split.positives), &score(&split.negatives))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn auc_trivial_cases() {
        assert_eq!(auc_from_scores(&[1.0, 1.0], &[-1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(auc_from_scores(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.5);
        assert!(auc_from_scores(&[], &[1.0]).is_err());
    }

    #[test]
    fn auc_invariant_under_monotone_transforms() {
        let mut rng = seeds::rng(3, &[]);
        let pos: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let neg: Vec<f64> = (0..60).map(|_| rng.random_range(-1.2..0.8)).collect();
        let base = auc_from_scores(&pos, &neg).unwrap();
        let tx = |v: &[f64], f: fn(f64) -> f64| v.iter().map(|&s| f(s)).collect::<Vec<_>>();
        for f in [|s: f64| s.exp(), |s: f64| 3.0 * s + 7.0, |s: f64| s.powi(3)] {
            let got = auc_from_scores(&tx(&pos, f), &tx(&neg, f)).unwrap();
            assert!((got - base).abs() < 1e-12);
        }
    }

    fn clustered_embeddings(
        n_per: usize,
        dim: usize,
        gap: f32,
        seed: u64,
    ) -> (EmbeddingMatrix, LabeledNodes) {
        let mut x = EmbeddingMatrix::zeros(2 * n_per, dim);
        let mut rng = seeds::rng(seed, &[]);
        for i in 0..2 * n_per {
            let center = if i < n_per { gap } else { -gap };
            let row = x.row_mut(i);
            for v in row.iter_mut() {
                *v = center + rng.random_range(-0.5f32..0.5);
            }
        }
        let labels: Vec<u32> = (0..2 * n_per).map(|i| (i >= n_per) as u32).collect();
        (x, LabeledNodes::from_community_labels(&labels))
    }

    #[test]
    fn separable_clusters_score_perfectly() {
        let (x, labels) = clustered_embeddings(60, 8, 10.0, 4);
        let f1 = node_classification(&x, &labels, 0.5, 3, true, 9).unwrap();
        assert_eq!(f1.micro_f1, 1.0);
        assert_eq!(f1.macro_f1, 1.0);
    }

    #[test]
    fn random_embeddings_score_at_chance() {
        let n = 1000;
        let mut x = EmbeddingMatrix::zeros(n, 16);
        let mut rng = seeds::rng(8, &[]);
        for v in x.data.iter_mut() {
            *v = rng.random_range(-1.0f32..1.0);
        }
        let labels: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
        let labeled = LabeledNodes::from_community_labels(&labels);
        let f1 = node_classification(&x, &labeled, 0.5, 10, true, 5).unwrap();
        assert!((f1.micro_f1 - 0.5).abs() < 0.05, "micro {}", f1.micro_f1);
    }

    #[test]
    fn multi_label_nodes_get_top_k_predictions() {
        // Two informative dims; nodes with both labels score high on both.
        let mut x = EmbeddingMatrix::zeros(40, 2);
        let mut pairs = Vec::new();
        for i in 0..40 {
            let (a, b) = match i % 4 {
                0 => (1.0, 0.0),
                1 => (0.0, 1.0),
                _ => (1.0, 1.0),
            };
            x.row_mut(i)[0] = a + (i as f32) * 1e-4;
            x.row_mut(i)[1] = b;
            if a > 0.0 {
                pairs.push((i as u32, 0));
            }
            if b > 0.0 {
                pairs.push((i as u32, 1));
            }
        }
        let labeled = LabeledNodes::from_pairs(pairs);
        let f1 = node_classification(&x, &labeled, 0.5, 5, false, 3).unwrap();
        assert!(f1.micro_f1 > 0.95, "micro {}", f1.micro_f1);
    }

    #[test]
    fn normalize_toggle_keeps_scores_in_range() {
        let (x, labels) = clustered_embeddings(30, 4, 0.2, 6);
        for normalize in [false, true] {
            let f1 = node_classification(&x, &labels, 0.3, 2, normalize, 1).unwrap();
            assert!((0.0..=1.0).contains(&f1.micro_f1));
            assert!((0.0..=1.0).contains(&f1.macro_f1));
        }
    }

    #[test]
    fn classification_is_deterministic() {
        let (x, labels) = clustered_embeddings(50, 8, 1.0, 10);
        let a = node_classification(&x, &labels, 0.4, 5, true, 42).unwrap();
        let b = node_classification(&x, &labels, 0.4, 5, true, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_of_triangle_holds_one_edge() {
        let g = Graph::from_edges(3, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], None).unwrap();
        let (split, reduced) = make_linkpred_split(&g, 1.0 / 3.0, 5).unwrap();
        assert_eq!(split.positives.len(), 1);
        assert_eq!(reduced.edge_count(), 2);
        // complete graph: no non-edges available as negatives
        assert!(split.negatives.is_empty());

        // a sparse graph pairs every positive with a negative
        let g4 = Graph::from_edges(4, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], None).unwrap();
        let (split4, _) = make_linkpred_split(&g4, 1.0 / 3.0, 5).unwrap();
        assert_eq!(split4.positives.len(), 1);
        assert_eq!(split4.negatives.len(), 1);
    }

    #[test]
    fn zero_fraction_leaves_graph_unchanged() {
        let g = synth::gnm(50, 200, 2).unwrap();
        let (split, reduced) = make_linkpred_split(&g, 0.0, 5).unwrap();
        assert!(split.positives.is_empty());
        assert_eq!(reduced.edge_count(), 200);
        assert!(make_linkpred_split(&g, 1.0, 5).is_err());
    }

    #[test]
    fn negatives_avoid_full_edge_set() {
        let g = synth::gnm(2000, 100_000, 3).unwrap();
        let (split, reduced) = make_linkpred_split(&g, 1e-4, 7).unwrap();
        assert_eq!(split.positives.len(), 10);
        assert_eq!(split.negatives.len(), 10);
        assert_eq!(reduced.edge_count(), 99_990);
        for &(u, v) in &split.negatives {
            assert!(!g.has_edge(u, v), "negative ({u}, {v}) is a real edge");
        }
        for &(u, v) in &split.positives {
            assert!(g.has_edge(u, v));
            assert!(
                !reduced.has_edge(u, v),
                "held-out edge survived in reduced graph"
            );
        }

        // deterministic under seed
        let (split2, _) = make_linkpred_split(&g, 1e-4, 7).unwrap();
        assert_eq!(split.positives, split2.positives);
        assert_eq!(split.negatives, split2.negatives);
    }

    #[test]
    fn label_file_loading() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "# comment\nalpha\tsports\nbeta\tmusic\nalpha\tmusic\n").unwrap();
        let resolve = |name: &str| match name {
            "alpha" => Some(0u32),
            "beta" => Some(1),
            _ => None,
        };
        let labeled = LabeledNodes::load(f.path(), resolve).unwrap();
        assert_eq!(labeled.len(), 2);
        assert_eq!(labeled.num_classes(), 2);
        // alpha carries both classes
        assert_eq!(labeled.entries()[0].1, vec![0, 1]);

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "gamma\tsports").unwrap();
        assert!(
            LabeledNodes::load(f.path(), resolve).is_err(),
            "unknown node must error"
        );

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "alpha sports extra").unwrap();
        assert!(
            LabeledNodes::load(f.path(), resolve).is_err(),
            "3 columns must error"
        );
    }

    #[test]
    fn classification_rejects_bad_arguments() {
        let (x, labels) = clustered_embeddings(10, 2, 1.0, 1);
        assert!(node_classification(&x, &labels, 0.0, 1, true, 1).is_err());
        assert!(node_classification(&x, &labels, 1.0, 1, true, 1).is_err());
        assert!(node_classification(&x, &labels, 0.5, 0, true, 1).is_err());
        let empty = LabeledNodes::from_pairs(std::iter::empty());
        assert!(node_classification(&x, &empty, 0.5, 1, true, 1).is_err());
    }

    #[test]
    fn zero_rows_score_zero_cosine() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 0.0]) - 1.0).abs() < 1e-12);
    }
}

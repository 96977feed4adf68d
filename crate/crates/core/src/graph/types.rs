//! Attributed graphs and ego-graphs.

use std::collections::BTreeSet;

use crate::numeric::Matrix;

/// Per-node anomaly label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Normal,
    Anomalous,
    Unknown,
}

impl Label {
    pub fn is_anomalous(self) -> bool {
        matches!(self, Label::Anomalous)
    }

    pub fn as_f64(self) -> Option<f64> {
        match self {
            Label::Normal => Some(0.0),
            Label::Anomalous => Some(1.0),
            Label::Unknown => None,
        }
    }
}

/// Undirected attributed graph: symmetric binary adjacency (zero diagonal),
/// one feature row per node, partial labels.
///
/// Immutable after construction; adjacency is kept as sorted neighbor sets.
#[derive(Debug, Clone)]
pub struct AttributedGraph {
    n_nodes: usize,
    neighbors: Vec<BTreeSet<usize>>,
    features: Matrix,
    labels: Vec<Label>,
}

impl AttributedGraph {
    /// Build from an undirected edge list. Edges must already be
    /// deduplicated, symmetrized, and free of self-loops; `features` must
    /// have one row per node.
    pub fn new(
        n_nodes: usize,
        edges: &[(usize, usize)],
        features: Matrix,
        labels: Vec<Label>,
    ) -> Self {
        assert_eq!(features.rows(), n_nodes, "feature row count != node count");
        assert_eq!(labels.len(), n_nodes, "label count != node count");
        assert!(features.all_finite(), "non-finite feature entry");
        let mut neighbors = vec![BTreeSet::new(); n_nodes];
        for &(a, b) in edges {
            assert!(a < n_nodes && b < n_nodes, "edge endpoint out of range");
            assert_ne!(a, b, "self-loop in canonical edge list");
            neighbors[a].insert(b);
            neighbors[b].insert(a);
        }
        AttributedGraph { n_nodes, neighbors, features, labels }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_row(&self, v: usize) -> &[f64] {
        self.features.row(v)
    }

    pub fn label(&self, v: usize) -> Label {
        self.labels[v]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[v].iter().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].contains(&b)
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.neighbors.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Sorted (i<j) edge list.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.n_edges());
        for a in 0..self.n_nodes {
            for &b in &self.neighbors[a] {
                if a < b {
                    edges.push((a, b));
                }
            }
        }
        edges
    }

    /// Node ids with a known label.
    pub fn labeled_ids(&self) -> Vec<usize> {
        (0..self.n_nodes).filter(|&v| self.labels[v] != Label::Unknown).collect()
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_anomalous()).count()
    }
}

/// Where an ego-graph came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgoOrigin {
    /// Extracted from an attributed graph; `node_ids` are global ids.
    Extracted,
    /// Synthesized by the diffusion generator; `node_ids` are synthetic.
    Generated,
}

/// K-hop induced subgraph around a center node. The center is always local
/// index 0; `adjacency` is a dense symmetric binary matrix with zero
/// diagonal.
#[derive(Debug, Clone)]
pub struct EgoGraph {
    pub node_ids: Vec<usize>,
    pub adjacency: Matrix,
    pub features: Matrix,
    pub hops: usize,
    pub label: Label,
    pub origin: EgoOrigin,
}

impl EgoGraph {
    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    /// Global id of the center node.
    pub fn center_id(&self) -> usize {
        self.node_ids[0]
    }

    pub fn n_edges(&self) -> usize {
        let m = self.n_nodes();
        let mut count = 0;
        for i in 0..m {
            for j in (i + 1)..m {
                if self.adjacency[(i, j)] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn validate(&self) {
        let m = self.node_ids.len();
        assert_eq!(self.adjacency.shape(), (m, m), "adjacency shape");
        assert_eq!(self.features.rows(), m, "feature rows");
        assert!(self.adjacency.is_symmetric_zero_diag(), "adjacency not symmetric/zero-diag");
        let distinct: BTreeSet<usize> = self.node_ids.iter().copied().collect();
        assert_eq!(distinct.len(), m, "duplicate node ids");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_counts_and_symmetry() {
        let feats = Matrix::zeros(4, 2);
        let labels = vec![Label::Normal, Label::Anomalous, Label::Unknown, Label::Normal];
        let g = AttributedGraph::new(4, &[(0, 1), (1, 2)], feats, labels);
        assert_eq!(g.n_edges(), 2);
        assert!(g.has_edge(1, 0));
        assert_eq!(g.degree(1), 2);
        assert_eq!(g.labeled_ids(), vec![0, 1, 3]);
        assert_eq!(g.anomaly_count(), 1);
    }
}

//! K-hop ego-graph extraction with seeded per-hop subsampling.

use rand::seq::index::sample as index_sample;

use super::types::{AttributedGraph, EgoGraph, EgoOrigin};
use crate::numeric::{Matrix, StreamRng};

/// Extract the K-hop ego-graph of `v` as the induced subgraph on the kept
/// nodes, center at local index 0.
///
/// Breadth-first by hop; if the neighborhood would exceed `n_max`, the
/// current hop frontier is uniformly subsampled to the remaining budget
/// (the center is always kept). The RNG stream is derived from
/// `(seed, center id)`, so extraction over many centers is
/// schedule-independent.
pub fn extract_ego_graph(
    g: &AttributedGraph,
    v: usize,
    hops: usize,
    n_max: usize,
    seed: u64,
) -> EgoGraph {
    assert!(v < g.n_nodes(), "center {v} out of range");
    assert!(n_max >= 1, "n_max must be at least 1");

    let root = StreamRng::new(seed);
    let mut rng = root.stream("ego-extract", v as u64);

    let mut kept: Vec<usize> = vec![v];
    let mut in_kept = vec![false; g.n_nodes()];
    in_kept[v] = true;
    let mut frontier: Vec<usize> = vec![v];

    for _hop in 0..hops {
        if kept.len() >= n_max || frontier.is_empty() {
            break;
        }
        // next ring, in ascending id order for determinism
        let mut next: Vec<usize> = Vec::new();
        let mut seen_this_hop = vec![false; g.n_nodes()];
        for &u in &frontier {
            for w in g.neighbors(u) {
                if !in_kept[w] && !seen_this_hop[w] {
                    seen_this_hop[w] = true;
                    next.push(w);
                }
            }
        }
        next.sort_unstable();
        let budget = n_max - kept.len();
        if next.len() > budget {
            let mut chosen: Vec<usize> =
                index_sample(&mut rng, next.len(), budget).into_iter().map(|i| next[i]).collect();
            chosen.sort_unstable();
            next = chosen;
        }
        for &w in &next {
            in_kept[w] = true;
            kept.push(w);
        }
        frontier = next;
    }

    let m = kept.len();
    let adjacency = Matrix::from_fn(m, m, |i, j| {
        if i != j && g.has_edge(kept[i], kept[j]) {
            1.0
        } else {
            0.0
        }
    });
    let features = Matrix::from_fn(m, g.feature_dim(), |i, j| g.feature_row(kept[i])[j]);

    EgoGraph {
        node_ids: kept,
        adjacency,
        features,
        hops,
        label: g.label(v),
        origin: EgoOrigin::Extracted,
    }
}

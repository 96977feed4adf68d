//! Guided generation: run the reverse chain from the prior, then assemble a
//! full anomalous ego-graph around the generated topology.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::denoiser::{denoise_probs, EdgeProbMatrix};
use super::schedule::NoiseSchedule;
use super::train::DiffusionModel;
use crate::graph::{EgoGraph, EgoOrigin, Label};
use crate::numeric::{sample_bernoulli_matrix, Matrix};

/// Reverse chain with an arbitrary per-step edge-probability model:
/// A^T ~ B(p), then A^{t−1} ~ B(denoise(A^t, t)) for t = T..1.
pub fn reverse_chain(
    m: usize,
    sched: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
    mut denoise: impl FnMut(&Matrix, usize) -> EdgeProbMatrix,
) -> Matrix {
    assert!(m >= 1);
    if m == 1 {
        return Matrix::zeros(1, 1);
    }
    let p = sched.base_rate();
    let prior = Matrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { p });
    let mut a = sample_bernoulli_matrix(rng, &prior, true).expect("valid prior");
    for t in (1..=sched.len()).rev() {
        let probs = denoise(&a, t);
        a = sample_bernoulli_matrix(rng, probs.matrix(), true).expect("clamped probs");
    }
    a
}

/// Algorithm-1 inference: sample an adjacency guided by `h_g`.
/// Deterministic given the RNG stream.
pub fn generate_adjacency(
    model: &DiffusionModel,
    h_g: &Matrix,
    m: usize,
    sched: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
) -> Matrix {
    assert!(m <= model.denoiser_cfg.n_max, "m exceeds denoiser n_max");
    reverse_chain(m, sched, rng, |a_t, t| {
        denoise_probs(&model.store, &model.denoiser_cfg, a_t, t, h_g)
    })
}

/// Dress a generated adjacency into an anomalous ego-graph.
///
/// Features are uniformly drawn rows of `feature_pool` plus standard normal
/// noise. The max-degree node (ties → lowest index) becomes the center and
/// is swapped to local index 0; isolated non-center nodes are dropped. An
/// isolated center collapses the ego to the single center node.
pub fn assemble_ego(
    adj: &Matrix,
    feature_pool: &Matrix,
    hops: usize,
    rng: &mut ChaCha8Rng,
) -> EgoGraph {
    assert!(feature_pool.rows() > 0, "empty feature pool");
    assert!(adj.is_symmetric_zero_diag(), "generated adjacency must be symmetric");
    let m = adj.rows();
    let d = feature_pool.cols();

    let mut features = Matrix::zeros(m, d);
    for i in 0..m {
        let pick = rng.random_range(0..feature_pool.rows());
        for j in 0..d {
            let noise: f64 = rng.sample(rand_distr::StandardNormal);
            features[(i, j)] = feature_pool[(pick, j)] + noise;
        }
    }

    let degree = |i: usize| adj.row(i).iter().sum::<f64>() as usize;
    let center = (0..m).max_by_key(|&i| (degree(i), std::cmp::Reverse(i))).unwrap_or(0);

    if degree(center) == 0 {
        // everyone is isolated; keep only the center
        return EgoGraph {
            node_ids: vec![0],
            adjacency: Matrix::zeros(1, 1),
            features: Matrix::row_vec(features.row(center)),
            hops,
            label: Label::Anomalous,
            origin: EgoOrigin::Generated,
        };
    }

    // center first, then the other non-isolated nodes in original order
    let mut kept: Vec<usize> = vec![center];
    for i in 0..m {
        if i != center && degree(i) > 0 {
            kept.push(i);
        }
    }
    let k = kept.len();
    let out_adj = Matrix::from_fn(k, k, |i, j| adj[(kept[i], kept[j])]);
    let out_feat = Matrix::from_fn(k, d, |i, j| features[(kept[i], j)]);
    EgoGraph {
        node_ids: (0..k).collect(),
        adjacency: out_adj,
        features: out_feat,
        hops,
        label: Label::Anomalous,
        origin: EgoOrigin::Generated,
    }
}

/// Serialize a generated ego-graph with its provenance.
pub fn generated_ego_to_json(
    ego: &EgoGraph,
    seed: u64,
    h_g: &Matrix,
    sched: &NoiseSchedule,
) -> serde_json::Value {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    for &v in h_g.data() {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    let guidance_checksum: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();

    let m = ego.n_nodes();
    let mut edges = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            if ego.adjacency[(i, j)] != 0.0 {
                edges.push(vec![i, j]);
            }
        }
    }
    let features: Vec<Vec<f64>> = (0..m).map(|i| ego.features.row(i).to_vec()).collect();
    serde_json::json!({
        "m": m,
        "edges": edges,
        "features": features,
        "center": 0,
        "label": 1,
        "provenance": {
            "seed": seed,
            "guidance_checksum": guidance_checksum,
            "schedule_digest": sched.digest(),
        },
    })
}

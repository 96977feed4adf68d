//! Synthetic imbalanced benchmark: Bernoulli background edges with planted
//! anomalous cliques and a feature shift along a fixed random unit
//! direction. Structural and contextual anomalies are both present and
//! analytically locatable.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use super::types::{AttributedGraph, Label};
use crate::numeric::{Matrix, StreamRng};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("anomalies ({anomalies}) must stay below normals ({normals}); the generator is for imbalanced regimes")]
    NotImbalanced { anomalies: usize, normals: usize },
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub n_normal: usize,
    pub n_clusters: usize,
    pub cluster_size: usize,
    pub bg_edge_prob: f64,
    pub feature_dim: usize,
    pub anomaly_feature_shift: f64,
}

impl Default for BenchmarkConfig {
    /// 600 nodes, 10% anomalies in 12 planted 5-cliques.
    fn default() -> Self {
        BenchmarkConfig {
            n_normal: 540,
            n_clusters: 12,
            cluster_size: 5,
            bg_edge_prob: 0.015,
            feature_dim: 16,
            anomaly_feature_shift: 2.5,
        }
    }
}

/// Generate the benchmark graph. Nodes `[0, n_normal)` are normal;
/// anomalous cliques follow in blocks of `cluster_size`. All labels are set.
pub fn synthesize_benchmark(
    cfg: &BenchmarkConfig,
    seed: u64,
) -> Result<AttributedGraph, SynthError> {
    assert!(cfg.cluster_size >= 2, "cluster_size must be at least 2");
    assert!(
        (0.0..=1.0).contains(&cfg.bg_edge_prob),
        "bg_edge_prob outside [0,1]"
    );
    let n_anomalous = cfg.n_clusters * cfg.cluster_size;
    if n_anomalous >= cfg.n_normal {
        return Err(SynthError::NotImbalanced {
            anomalies: n_anomalous,
            normals: cfg.n_normal,
        });
    }
    let n = cfg.n_normal + n_anomalous;
    let root = StreamRng::new(seed);

    // features: everyone i.i.d. standard normal...
    let mut features = Matrix::zeros(n, cfg.feature_dim);
    {
        let mut rng = root.stream("synth-features", 0);
        for v in features.data_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
        }
    }
    // ...anomalies shifted along a fixed random unit direction
    let direction = {
        let mut rng = root.stream("synth-direction", 0);
        let mut d: Vec<f64> = (0..cfg.feature_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut d {
            *x /= norm;
        }
        d
    };
    for i in cfg.n_normal..n {
        for (j, dir) in direction.iter().enumerate() {
            features[(i, j)] += cfg.anomaly_feature_shift * dir;
        }
    }

    // background edges over all pairs, then cliques forced on
    let mut edges: Vec<(usize, usize)> = Vec::new();
    {
        let mut rng = root.stream("synth-edges", 0);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < cfg.bg_edge_prob {
                    edges.push((i, j));
                }
            }
        }
    }
    for c in 0..cfg.n_clusters {
        let start = cfg.n_normal + c * cfg.cluster_size;
        for i in start..start + cfg.cluster_size {
            for j in (i + 1)..start + cfg.cluster_size {
                edges.push((i, j));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();

    let mut labels = vec![Label::Normal; n];
    for label in labels.iter_mut().skip(cfg.n_normal) {
        *label = Label::Anomalous;
    }

    Ok(AttributedGraph::new(n, &edges, features, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_example() {
        let cfg = BenchmarkConfig {
            n_normal: 90,
            n_clusters: 2,
            cluster_size: 5,
            bg_edge_prob: 0.05,
            feature_dim: 4,
            anomaly_feature_shift: 2.0,
        };
        let g = synthesize_benchmark(&cfg, 1).unwrap();
        assert_eq!(g.n_nodes(), 100);
        assert_eq!(g.anomaly_count(), 10);
    }

    #[test]
    fn clique_members_have_min_degree() {
        let cfg = BenchmarkConfig {
            n_normal: 50,
            n_clusters: 3,
            cluster_size: 5,
            bg_edge_prob: 0.0,
            feature_dim: 2,
            anomaly_feature_shift: 1.0,
        };
        let g = synthesize_benchmark(&cfg, 2).unwrap();
        for v in 0..g.n_nodes() {
            if g.label(v).is_anomalous() {
                assert!(g.degree(v) >= 4, "clique node {v} degree {}", g.degree(v));
            }
        }
    }

    #[test]
    fn labels_match_planted_construction() {
        let cfg = BenchmarkConfig {
            n_normal: 40,
            n_clusters: 2,
            cluster_size: 3,
            bg_edge_prob: 0.1,
            feature_dim: 3,
            anomaly_feature_shift: 1.5,
        };
        let g = synthesize_benchmark(&cfg, 3).unwrap();
        for v in 0..g.n_nodes() {
            let planted = v >= cfg.n_normal;
            assert_eq!(g.label(v).is_anomalous(), planted);
        }
    }

    #[test]
    fn background_degree_matches_binomial_mean() {
        // mean normal-node degree within 3 standard errors of p(n-1) over 20 seeds
        let cfg = BenchmarkConfig {
            n_normal: 500,
            n_clusters: 1,
            cluster_size: 2,
            bg_edge_prob: 0.02,
            feature_dim: 2,
            anomaly_feature_shift: 0.0,
        };
        let n = 502usize;
        let p = cfg.bg_edge_prob;
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..20u64 {
            let g = synthesize_benchmark(&cfg, seed).unwrap();
            for v in 0..cfg.n_normal {
                total += g.degree(v) as f64;
                count += 1;
            }
        }
        let mean = total / count as f64;
        let expected = p * (n - 1) as f64;
        // degrees share edges, so SE of the grand mean is conservatively the
        // single-node SE over sqrt(#seeds)
        let single_var = (n - 1) as f64 * p * (1.0 - p);
        let se = (single_var / (cfg.n_normal as f64 * 20.0)).sqrt() * (2.0f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se.max(0.02),
            "mean {mean} vs expected {expected}"
        );
    }

    #[test]
    fn refuses_balanced_regime() {
        let cfg = BenchmarkConfig {
            n_normal: 10,
            n_clusters: 5,
            cluster_size: 2,
            bg_edge_prob: 0.1,
            feature_dim: 2,
            anomaly_feature_shift: 1.0,
        };
        assert!(synthesize_benchmark(&cfg, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = BenchmarkConfig::default();
        let a = synthesize_benchmark(&cfg, 9).unwrap();
        let b = synthesize_benchmark(&cfg, 9).unwrap();
        assert_eq!(a.edge_list(), b.edge_list());
        assert_eq!(a.features(), b.features());
    }
}

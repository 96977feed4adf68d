//! Inductive anomaly detector: stacked graph convolutions over an
//! ego-graph, layer aggregation, deviation readout, and an MLP
//! discriminator mapping the deviation to an anomaly probability.
//!
//! Scoring consumes only the [`EgoGraph`] — nothing outside the extracted
//! K-ball can influence a node's score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::EgoGraph;
use crate::numeric::{sample_gaussian_matrix, Matrix, ParamStore, StreamRng, Tape, Var};

/// Probability clamp for the cross-entropy loss.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("feature dim {got} does not match detector input dim {expected}")]
    FeatureDimMismatch { got: usize, expected: usize },
}

/// How per-layer embeddings combine into the final node representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggMode {
    /// Element-wise mean of layer outputs (keeps width independent of L).
    Mean,
    /// Column-wise concatenation of layer outputs.
    Concat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub agg: AggMode,
}

impl DetectorConfig {
    pub fn new(input_dim: usize) -> Self {
        DetectorConfig { input_dim, hidden_dim: 64, layers: 2, agg: AggMode::Mean }
    }

    /// Width of the deviation vector fed to the discriminator.
    pub fn readout_dim(&self) -> usize {
        match self.agg {
            AggMode::Mean => self.hidden_dim,
            AggMode::Concat => self.hidden_dim * self.layers,
        }
    }
}

/// Detector parameters: L conv weight matrices plus the discriminator MLP.
#[derive(Debug, Clone)]
pub struct DetectorModel {
    pub cfg: DetectorConfig,
    pub store: ParamStore,
}

/// Per-layer embeddings, their aggregation, and the deviation vector.
#[derive(Debug, Clone)]
pub struct EgoEncoding {
    pub layer_embeddings: Vec<Matrix>,
    pub aggregated: Matrix,
    pub deviation: Matrix,
}

/// Â = D^{-1/2}(A+I)D^{-1/2}; self-loops keep isolated nodes well-defined.
pub fn normalized_adjacency(adj: &Matrix) -> Matrix {
    let m = adj.rows();
    let mut with_loops = adj.clone();
    for i in 0..m {
        with_loops[(i, i)] += 1.0;
    }
    let inv_sqrt: Vec<f64> = (0..m)
        .map(|i| {
            let d: f64 = with_loops.row(i).iter().sum();
            1.0 / d.sqrt()
        })
        .collect();
    Matrix::from_fn(m, m, |i, j| inv_sqrt[i] * with_loops[(i, j)] * inv_sqrt[j])
}

/// h_dev = H[center] − column-mean(H), center pinned at row 0.
pub fn deviation_readout(h: &Matrix) -> Matrix {
    assert!(h.rows() >= 1, "empty embedding matrix");
    let mean = h.col_means();
    let mut dev = Matrix::row_vec(h.row(0));
    dev.add_assign_scaled(&mean, -1.0);
    dev
}

impl DetectorModel {
    /// Xavier-normal init, seeded.
    pub fn init(cfg: DetectorConfig, seed: u64) -> Self {
        let root = StreamRng::new(seed);
        let mut store = ParamStore::new();
        let xavier = |rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize| {
            let std = (2.0 / (rows + cols) as f64).sqrt();
            sample_gaussian_matrix(rng, rows, cols, 0.0, std)
        };
        for l in 0..cfg.layers {
            let in_dim = if l == 0 { cfg.input_dim } else { cfg.hidden_dim };
            let mut rng = root.stream("detector-init-conv", l as u64);
            store.insert(&format!("conv{l}.w"), xavier(&mut rng, in_dim, cfg.hidden_dim));
        }
        let r = cfg.readout_dim();
        let mut rng = root.stream("detector-init-disc", 0);
        store.insert("disc.w1", xavier(&mut rng, r, cfg.hidden_dim));
        store.insert("disc.b1", Matrix::zeros(1, cfg.hidden_dim));
        store.insert("disc.w2", xavier(&mut rng, cfg.hidden_dim, 1));
        store.insert("disc.b2", Matrix::zeros(1, 1));
        DetectorModel { cfg, store }
    }

    pub fn from_store(cfg: DetectorConfig, store: ParamStore) -> Self {
        DetectorModel { cfg, store }
    }

    fn check_ego(&self, ego: &EgoGraph) -> Result<(), DetectorError> {
        if ego.features.cols() != self.cfg.input_dim {
            return Err(DetectorError::FeatureDimMismatch {
                got: ego.features.cols(),
                expected: self.cfg.input_dim,
            });
        }
        Ok(())
    }

    /// Build the full forward pass on a tape. Returns
    /// (probability var, per-layer embedding vars, aggregated var, deviation var).
    fn forward(&self, tape: &mut Tape, store: &ParamStore, ego: &EgoGraph) -> DetectorVars {
        let a_hat = tape.input(normalized_adjacency(&ego.adjacency));
        let mut e = tape.input(ego.features.clone());
        let mut layer_vars = Vec::with_capacity(self.cfg.layers);
        for l in 0..self.cfg.layers {
            let w = tape.param(store, &format!("conv{l}.w"));
            let mixed = tape.matmul(a_hat, e);
            let lin = tape.matmul(mixed, w);
            e = tape.relu(lin);
            layer_vars.push(e);
        }
        let aggregated = match self.cfg.agg {
            AggMode::Mean => {
                let mut acc = layer_vars[0];
                for &lv in &layer_vars[1..] {
                    acc = tape.add(acc, lv);
                }
                tape.scale(acc, 1.0 / self.cfg.layers as f64)
            }
            AggMode::Concat => {
                let mut acc = layer_vars[0];
                for &lv in &layer_vars[1..] {
                    acc = tape.concat_cols(acc, lv);
                }
                acc
            }
        };
        let center = tape.select_row(aggregated, 0);
        let mean = tape.mean_rows(aggregated);
        let deviation = tape.sub(center, mean);

        let w1 = tape.param(store, "disc.w1");
        let b1 = tape.param(store, "disc.b1");
        let w2 = tape.param(store, "disc.w2");
        let b2 = tape.param(store, "disc.b2");
        let z = tape.matmul(deviation, w1);
        let z = tape.add_row(z, b1);
        let z = tape.relu(z);
        let logit = tape.matmul(z, w2);
        let logit = tape.add_row(logit, b2);
        let prob = tape.sigmoid(logit);
        DetectorVars { prob, layer_vars, aggregated, deviation }
    }

    /// Stacked convolutions E^(l) = ReLU(Â·E^(l−1)·W^(l)) plus aggregation
    /// and deviation readout.
    pub fn encode_ego(&self, ego: &EgoGraph) -> Result<EgoEncoding, DetectorError> {
        self.check_ego(ego)?;
        let mut tape = Tape::new();
        let vars = self.forward(&mut tape, &self.store, ego);
        Ok(EgoEncoding {
            layer_embeddings: vars.layer_vars.iter().map(|&v| tape.value(v).clone()).collect(),
            aggregated: tape.value(vars.aggregated).clone(),
            deviation: tape.value(vars.deviation).clone(),
        })
    }

    /// Anomaly probability of the ego's center node. Deterministic.
    pub fn score_ego(&self, ego: &EgoGraph) -> Result<f64, DetectorError> {
        self.check_ego(ego)?;
        let mut tape = Tape::new();
        let vars = self.forward(&mut tape, &self.store, ego);
        Ok(tape.value(vars.prob).scalar())
    }

    /// Mean binary cross-entropy over the batch with per-sample losses,
    /// accumulating gradients into the store.
    ///
    /// Probabilities are clamped to [1e-7, 1−1e-7]; per-sample losses feed
    /// the curriculum.
    pub fn loss_and_grads(
        &mut self,
        batch: &[(&EgoGraph, f64)],
    ) -> Result<(f64, Vec<f64>), DetectorError> {
        if batch.is_empty() {
            return Err(DetectorError::EmptyBatch);
        }
        for (ego, _) in batch {
            self.check_ego(ego)?;
        }
        let scale = 1.0 / batch.len() as f64;
        let mut per_sample = Vec::with_capacity(batch.len());
        let mut total = 0.0;
        for (ego, label) in batch {
            let mut tape = Tape::new();
            let vars = self.forward(&mut tape, &self.store, ego);
            let target = Matrix::filled(1, 1, *label);
            let loss = tape.bce(vars.prob, target, PROB_CLAMP);
            let l = tape.value(loss).scalar();
            per_sample.push(l);
            total += l;
            tape.backward(loss, scale);
            tape.flush_param_grads(&mut self.store);
        }
        Ok((total * scale, per_sample))
    }

    /// Loss of the current parameters without touching gradients
    /// (used by the finite-difference checker).
    pub fn loss_only(&self, store: &ParamStore, batch: &[(&EgoGraph, f64)]) -> f64 {
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for (ego, label) in batch {
            let mut tape = Tape::new();
            let vars = self.forward(&mut tape, store, ego);
            let target = Matrix::filled(1, 1, *label);
            let loss = tape.bce(vars.prob, target, PROB_CLAMP);
            total += tape.value(loss).scalar();
        }
        total * scale
    }
}

struct DetectorVars {
    prob: Var,
    layer_vars: Vec<Var>,
    aggregated: Var,
    deviation: Var,
}

//! Conditional denoiser p_θ(A^{t−1} | A^t, h^g).
//!
//! Node tokens are built from the node's degree in A^t (normalized by m−1),
//! a sinusoidal embedding of the step t, and a projection of the guidance
//! embedding. S self-attention blocks mix the tokens, with A^t entering as
//! an additive attention-logit bias scaled by a learned scalar — so
//! information can flow even when A^t is empty. The edge head scores each
//! pair through sigmoid(w·[z_i⊙z_j ‖ z_i+z_j] + b), symmetric in (i, j) by
//! construction.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numeric::{sample_gaussian_matrix, Matrix, ParamStore, StreamRng, Tape, Var};

/// Probability clamp for edge probabilities (keeps logs and KLs finite).
pub const EDGE_PROB_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub model_dim: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ff_dim: usize,
    pub guidance_dim: usize,
    /// Largest node count the denoiser accepts.
    pub n_max: usize,
    pub dropout: f64,
}

impl DenoiserConfig {
    pub fn new(guidance_dim: usize) -> Self {
        DenoiserConfig {
            model_dim: 64,
            heads: 8,
            blocks: 2,
            ff_dim: 128,
            guidance_dim,
            n_max: 32,
            dropout: 0.1,
        }
    }

    pub fn head_dim(&self) -> usize {
        assert_eq!(self.model_dim % self.heads, 0, "heads must divide model dim");
        self.model_dim / self.heads
    }
}

/// Symmetric m×m matrix of per-edge Bernoulli parameters, zero diagonal,
/// entries clamped to [1e-6, 1−1e-6].
#[derive(Debug, Clone)]
pub struct EdgeProbMatrix(Matrix);

impl EdgeProbMatrix {
    /// Expand an (npairs×1) vector in i<j row-major pair order.
    pub fn from_pair_probs(m: usize, pair_probs: &Matrix) -> Self {
        assert_eq!(pair_probs.cols(), 1);
        assert_eq!(pair_probs.rows(), m * (m.saturating_sub(1)) / 2);
        let mut out = Matrix::zeros(m, m);
        let mut k = 0;
        for i in 0..m {
            for j in (i + 1)..m {
                let p = pair_probs[(k, 0)].clamp(EDGE_PROB_CLAMP, 1.0 - EDGE_PROB_CLAMP);
                out[(i, j)] = p;
                out[(j, i)] = p;
                k += 1;
            }
        }
        EdgeProbMatrix(out)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn n_nodes(&self) -> usize {
        self.0.rows()
    }
}

/// Sinusoidal embedding of step t (1-based), width `dim`.
pub fn time_embedding(t: usize, dim: usize) -> Matrix {
    let mut out = Matrix::zeros(1, dim);
    for i in 0..dim {
        let pair = (i / 2) as f64;
        let freq = 1.0 / 10_000f64.powf(2.0 * pair / dim as f64);
        let angle = t as f64 * freq;
        out[(0, i)] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
    }
    out
}

/// Register denoiser parameters under the `denoiser.` prefix.
pub fn init_denoiser_params(cfg: &DenoiserConfig, store: &mut ParamStore, seed: u64) {
    let root = StreamRng::new(seed);
    let xavier = |rng: &mut ChaCha8Rng, rows: usize, cols: usize| {
        let std = (2.0 / (rows + cols) as f64).sqrt();
        sample_gaussian_matrix(rng, rows, cols, 0.0, std)
    };
    // tiny bias noise keeps ReLU pre-activations off exact zero, where
    // finite differences stop being meaningful
    let bias = |rng: &mut ChaCha8Rng, cols: usize| sample_gaussian_matrix(rng, 1, cols, 0.0, 0.01);
    let d = cfg.model_dim;
    {
        let mut rng = root.stream("denoiser-init-embed", 0);
        store.insert("denoiser.deg.w", xavier(&mut rng, 1, d));
        let b = bias(&mut rng, d);
        store.insert("denoiser.deg.b", b);
        store.insert("denoiser.guide.w", xavier(&mut rng, cfg.guidance_dim, d));
        let b = bias(&mut rng, d);
        store.insert("denoiser.guide.b", b);
    }
    for blk in 0..cfg.blocks {
        let mut rng = root.stream("denoiser-init-block", blk as u64);
        for name in ["wq", "wk", "wv", "wo"] {
            store.insert(&format!("denoiser.block{blk}.{name}"), xavier(&mut rng, d, d));
        }
        store.insert(&format!("denoiser.block{blk}.edge_bias"), Matrix::filled(1, 1, 1.0));
        store.insert(&format!("denoiser.block{blk}.ff.w1"), xavier(&mut rng, d, cfg.ff_dim));
        let b = bias(&mut rng, cfg.ff_dim);
        store.insert(&format!("denoiser.block{blk}.ff.b1"), b);
        store.insert(&format!("denoiser.block{blk}.ff.w2"), xavier(&mut rng, cfg.ff_dim, d));
        let b = bias(&mut rng, d);
        store.insert(&format!("denoiser.block{blk}.ff.b2"), b);
    }
    let mut rng = root.stream("denoiser-init-edge", 0);
    store.insert("denoiser.edge.w", xavier(&mut rng, 2 * d, 1));
    store.insert("denoiser.edge.b", bias(&mut rng, 1));
}

/// Inverted-dropout masks (two per block: attention output, feed-forward
/// output), entries 0 or 1/(1−rate).
pub fn sample_dropout_masks(
    rng: &mut ChaCha8Rng,
    cfg: &DenoiserConfig,
    m: usize,
) -> Vec<Matrix> {
    let keep = 1.0 - cfg.dropout;
    (0..cfg.blocks * 2)
        .map(|_| {
            Matrix::from_fn(m, cfg.model_dim, |_, _| {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
        })
        .collect()
}

/// Full forward pass on a tape. `h_g` is a bound variable so gradients can
/// flow back into the guidance encoder. Returns the (npairs×1) vector of
/// unclamped edge probabilities in i<j row-major pair order.
pub fn denoise_pair_probs_on_tape(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &DenoiserConfig,
    a_t: &Matrix,
    t: usize,
    h_g: Var,
    dropout_masks: Option<&[Matrix]>,
) -> Var {
    let m = a_t.rows();
    assert!(m >= 2, "denoiser needs at least 2 nodes");
    assert!(m <= cfg.n_max, "m={m} exceeds n_max={}", cfg.n_max);
    assert!(a_t.is_symmetric_zero_diag(), "A^t must be symmetric with zero diagonal");
    assert_eq!(tape.value(h_g).shape(), (1, cfg.guidance_dim), "guidance shape");
    if let Some(masks) = dropout_masks {
        assert_eq!(masks.len(), cfg.blocks * 2, "need 2 dropout masks per block");
    }

    // degree normalized by m−1 keeps token scale size-independent
    let norm = 1.0 / (m - 1) as f64;
    let degrees = Matrix::from_fn(m, 1, |i, _| a_t.row(i).iter().sum::<f64>() * norm);
    let deg_in = tape.input(degrees);
    let deg_w = tape.param(store, "denoiser.deg.w");
    let deg_b = tape.param(store, "denoiser.deg.b");
    let proj = tape.matmul(deg_in, deg_w);
    let mut tokens = tape.add_row(proj, deg_b);

    let time_row = tape.input(time_embedding(t, cfg.model_dim));
    tokens = tape.add_row(tokens, time_row);

    let gw = tape.param(store, "denoiser.guide.w");
    let gb = tape.param(store, "denoiser.guide.b");
    let gproj = tape.matmul(h_g, gw);
    let gproj = tape.add_row(gproj, gb);
    tokens = tape.add_row(tokens, gproj);

    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    for b in 0..cfg.blocks {
        let wq = tape.param(store, &format!("denoiser.block{b}.wq"));
        let wk = tape.param(store, &format!("denoiser.block{b}.wk"));
        let wv = tape.param(store, &format!("denoiser.block{b}.wv"));
        let wo = tape.param(store, &format!("denoiser.block{b}.wo"));
        let edge_bias = tape.param(store, &format!("denoiser.block{b}.edge_bias"));
        let q = tape.matmul(tokens, wq);
        let k = tape.matmul(tokens, wk);
        let v = tape.matmul(tokens, wv);
        let mut head_outs = Vec::with_capacity(cfg.heads);
        for h in 0..cfg.heads {
            let qh = tape.slice_cols(q, h * dh, dh);
            let kh = tape.slice_cols(k, h * dh, dh);
            let vh = tape.slice_cols(v, h * dh, dh);
            let kt = tape.transpose(kh);
            let logits = tape.matmul(qh, kt);
            let logits = tape.scale(logits, scale);
            let logits = tape.add_scaled_const(logits, a_t.clone(), edge_bias);
            let attn = tape.softmax_rows(logits);
            head_outs.push(tape.matmul(attn, vh));
        }
        let mut concat = head_outs[0];
        for &ho in &head_outs[1..] {
            concat = tape.concat_cols(concat, ho);
        }
        let mut attn_out = tape.matmul(concat, wo);
        if let Some(masks) = dropout_masks {
            let mask = tape.input(masks[b * 2].clone());
            attn_out = tape.mul(attn_out, mask);
        }
        tokens = tape.add(tokens, attn_out);

        let w1 = tape.param(store, &format!("denoiser.block{b}.ff.w1"));
        let b1 = tape.param(store, &format!("denoiser.block{b}.ff.b1"));
        let w2 = tape.param(store, &format!("denoiser.block{b}.ff.w2"));
        let b2 = tape.param(store, &format!("denoiser.block{b}.ff.b2"));
        let f = tape.matmul(tokens, w1);
        let f = tape.add_row(f, b1);
        let f = tape.relu(f);
        let f = tape.matmul(f, w2);
        let mut f = tape.add_row(f, b2);
        if let Some(masks) = dropout_masks {
            let mask = tape.input(masks[b * 2 + 1].clone());
            f = tape.mul(f, mask);
        }
        tokens = tape.add(tokens, f);
    }

    let pm = tape.pairwise_mul(tokens);
    let pa = tape.pairwise_add(tokens);
    let cat = tape.concat_cols(pm, pa);
    let ew = tape.param(store, "denoiser.edge.w");
    let eb = tape.param(store, "denoiser.edge.b");
    let logits = tape.matmul(cat, ew);
    let logits = tape.add_row(logits, eb);
    tape.sigmoid(logits)
}

/// Pure inference: per-edge Bernoulli parameters for the reverse step, no
/// dropout. `m = 1` has no edges and returns the 1×1 zero matrix.
pub fn denoise_probs(
    store: &ParamStore,
    cfg: &DenoiserConfig,
    a_t: &Matrix,
    t: usize,
    h_g: &Matrix,
) -> EdgeProbMatrix {
    let m = a_t.rows();
    assert!(m <= cfg.n_max, "m={m} exceeds n_max={}", cfg.n_max);
    if m < 2 {
        return EdgeProbMatrix(Matrix::zeros(m, m));
    }
    let mut tape = Tape::new();
    let hg_var = tape.input(h_g.clone());
    let probs = denoise_pair_probs_on_tape(&mut tape, store, cfg, a_t, t, hg_var, None);
    EdgeProbMatrix::from_pair_probs(m, tape.value(probs))
}

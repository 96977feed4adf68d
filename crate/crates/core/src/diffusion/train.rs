//! Diffusion training: one-step denoising likelihood, gradients flowing
//! into both the denoiser and the guidance encoder.
//!
//! Per step: embed the clean ego-graph (self-conditioning), sample
//! t ~ U[1,T], draw A^{t−1} ~ q(·|A^0) then A^t ~ q(·|A^{t−1}), and take
//! the per-edge binary cross-entropy of p_θ(A^{t−1} | A^t, e^0) against the
//! drawn A^{t−1}, averaged over i<j pairs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::denoiser::{
    denoise_pair_probs_on_tape, init_denoiser_params, sample_dropout_masks, DenoiserConfig,
    EDGE_PROB_CLAMP,
};
use super::schedule::NoiseSchedule;
use super::step::{q_sample_closed, q_sample_step};
use crate::graph::EgoGraph;
use crate::guidance::{gin_encode_on_tape, init_gin_params, GinConfig};
use crate::numeric::{Matrix, ParamStore, Tape, Var};

/// Denoiser plus guidance encoder sharing one parameter store
/// (`denoiser.*` and `gin.*` prefixes).
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub denoiser_cfg: DenoiserConfig,
    pub gin_cfg: GinConfig,
    pub store: ParamStore,
}

impl DiffusionModel {
    pub fn init(denoiser_cfg: DenoiserConfig, gin_cfg: GinConfig, seed: u64) -> Self {
        assert_eq!(
            denoiser_cfg.guidance_dim, gin_cfg.embed_dim,
            "denoiser guidance dim must match GIN embedding dim"
        );
        let mut store = ParamStore::new();
        init_gin_params(&gin_cfg, &mut store, seed);
        init_denoiser_params(&denoiser_cfg, &mut store, seed.wrapping_add(1));
        DiffusionModel { denoiser_cfg, gin_cfg, store }
    }

    pub fn from_store(denoiser_cfg: DenoiserConfig, gin_cfg: GinConfig, store: ParamStore) -> Self {
        DiffusionModel { denoiser_cfg, gin_cfg, store }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainStepOutcome {
    pub loss: f64,
    pub t: usize,
}

/// Mean per-pair BCE of the denoiser prediction against `target` bits,
/// with the clean ego encoded on the same tape (gradients reach the GIN).
pub fn diffusion_loss_on_tape(
    tape: &mut Tape,
    store: &ParamStore,
    denoiser_cfg: &DenoiserConfig,
    gin_cfg: &GinConfig,
    ego: &EgoGraph,
    a_t: &Matrix,
    target_prev: &Matrix,
    t: usize,
    dropout_masks: Option<&[Matrix]>,
) -> Var {
    let m = a_t.rows();
    let e0 = gin_encode_on_tape(tape, store, gin_cfg, ego);
    let pair_probs =
        denoise_pair_probs_on_tape(tape, store, denoiser_cfg, a_t, t, e0, dropout_masks);
    let pairs = m * (m - 1) / 2;
    let mut targets = Matrix::zeros(pairs, 1);
    let mut k = 0;
    for i in 0..m {
        for j in (i + 1)..m {
            targets[(k, 0)] = target_prev[(i, j)];
            k += 1;
        }
    }
    let losses = tape.bce(pair_probs, targets, EDGE_PROB_CLAMP);
    tape.mean_all(losses)
}

/// One Algorithm-2 step on an anomalous ego-graph; gradients accumulate
/// into the model store. Ego-graphs with fewer than 2 nodes carry no edge
/// signal and are skipped (loss 0, no gradient).
pub fn diffusion_train_step(
    model: &mut DiffusionModel,
    ego: &EgoGraph,
    sched: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
) -> TrainStepOutcome {
    assert!(
        ego.label.is_anomalous(),
        "diffusion trains on anomalous ego-graphs only"
    );
    let m = ego.adjacency.rows();
    let t = rng.random_range(1..=sched.len());
    if m < 2 {
        return TrainStepOutcome { loss: 0.0, t };
    }
    let a_prev = q_sample_closed(&ego.adjacency, t - 1, sched, rng);
    let a_t = q_sample_step(&a_prev, t, sched, rng);
    let masks = if model.denoiser_cfg.dropout > 0.0 {
        Some(sample_dropout_masks(rng, &model.denoiser_cfg, m))
    } else {
        None
    };
    let mut tape = Tape::new();
    let loss_var = diffusion_loss_on_tape(
        &mut tape,
        &model.store,
        &model.denoiser_cfg,
        &model.gin_cfg,
        ego,
        &a_t,
        &a_prev,
        t,
        masks.as_deref(),
    );
    let loss = tape.value(loss_var).scalar();
    tape.backward(loss_var, 1.0);
    tape.flush_param_grads(&mut model.store);
    TrainStepOutcome { loss, t }
}

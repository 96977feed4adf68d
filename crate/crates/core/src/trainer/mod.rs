//! Balanced detector training.
//!
//! Each batch is topped up with synthetic anomalous ego-graphs until the
//! anomaly fraction reaches 0.5: the deficit M = max(0, #normal −
//! #anomalous) is generated by the diffusion model under curriculum-weighted
//! guidance. Real samples are never altered; generated samples always carry
//! label 1.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{AggMode, DetectorConfig, DetectorError, DetectorModel};
use crate::diffusion::{assemble_ego, generate_adjacency, DiffusionModel, NoiseSchedule};
use crate::eval::{auprc, auroc, f1_score, MetricError};
use crate::graph::{extract_ego_graph, AttributedGraph, DatasetSplit, EgoGraph, Label};
use crate::guidance::{
    aggregate_guidance, curriculum_weight, gin_encode, CurriculumConfig, CurriculumSchedule,
    EmaFallback, RunningMedian,
};
use crate::numeric::{adam_step, AdamState, Matrix, OptimError, StreamRng};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("mode {0} requires a pre-trained diffusion model")]
    MissingDiffusion(AugmentMode),
    #[error("train split contains no labeled anomaly")]
    NoTrainAnomalies,
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// How batches are balanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentMode {
    /// No augmentation at all.
    None,
    /// Resample existing anomalous ego-graphs with replacement.
    RandomDuplicate,
    /// Diffusion generation with a zero guidance vector.
    Unconditional,
    /// Full curriculum-guided generation.
    Baed,
}

impl AugmentMode {
    pub fn needs_diffusion(self) -> bool {
        matches!(self, AugmentMode::Unconditional | AugmentMode::Baed)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(AugmentMode::None),
            "random-duplicate" => Some(AugmentMode::RandomDuplicate),
            "unconditional" => Some(AugmentMode::Unconditional),
            "baed" => Some(AugmentMode::Baed),
            _ => None,
        }
    }
}

impl std::fmt::Display for AugmentMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AugmentMode::None => "none",
            AugmentMode::RandomDuplicate => "random-duplicate",
            AugmentMode::Unconditional => "unconditional",
            AugmentMode::Baed => "baed",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub detector_lr: f64,
    pub seed: u64,
    pub mode: AugmentMode,
    pub curriculum: CurriculumConfig,
    pub hops: usize,
    pub n_max: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub agg: AggMode,
    pub ema_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            detector_lr: 1e-3,
            seed: 0,
            mode: AugmentMode::Baed,
            curriculum: CurriculumConfig::default(),
            hops: 2,
            n_max: 32,
            hidden_dim: 64,
            layers: 2,
            agg: AggMode::Mean,
            ema_decay: 0.9,
        }
    }
}

/// Per-anomaly cache of the most recent per-sample loss; unseen anomalies
/// read the running mean of everything observed so far.
#[derive(Debug, Clone, Default)]
pub struct LossCache {
    map: BTreeMap<usize, f64>,
    sum: f64,
    count: u64,
}

impl LossCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, node_id: usize, loss: f64) {
        assert!(loss.is_finite() && loss >= 0.0, "bad loss for node {node_id}");
        self.map.insert(node_id, loss);
        self.sum += loss;
        self.count += 1;
    }

    /// Last observed loss, or the running mean for unseen nodes.
    pub fn get(&self, node_id: usize) -> f64 {
        self.map.get(&node_id).copied().unwrap_or_else(|| self.running_mean())
    }

    pub fn running_mean(&self) -> f64 {
        if self.count == 0 {
            std::f64::consts::LN_2
        } else {
            self.sum / self.count as f64
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auroc: f64,
    pub val_auprc: f64,
    pub val_f1: f64,
    pub generated_count: usize,
}

#[derive(Debug)]
pub struct TrainOutput {
    /// Best-validation-AUROC checkpoint.
    pub model: DetectorModel,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    /// Anomaly fraction of every trained batch, in order.
    pub batch_fractions: Vec<f64>,
}

/// π̃ = (N_a + M)/(N_a + N_n + M).
pub fn effective_ratio(n_a: usize, n_n: usize, m: usize) -> Result<f64, TrainError> {
    if n_a + n_n + m == 0 {
        return Err(TrainError::NoTrainAnomalies);
    }
    Ok((n_a + m) as f64 / (n_a + n_n + m) as f64)
}

/// Everything `balance_batch` needs besides the batch itself.
pub struct BalanceContext<'a> {
    pub mode: AugmentMode,
    pub diffusion: Option<&'a DiffusionModel>,
    pub sched: Option<&'a NoiseSchedule>,
    /// Global batch counter t for h(t).
    pub iteration: usize,
    pub total_iters: usize,
    pub epoch: usize,
    pub curriculum_alpha: f64,
    pub curriculum_shift: f64,
    pub ema: &'a mut EmaFallback,
    /// Features of anomalous training nodes (generation pool).
    pub feature_pool: &'a Matrix,
    /// Empirical sizes of anomalous training ego-graphs.
    pub size_pool: &'a [usize],
    /// Anomalous training ego-graphs (duplication pool).
    pub anomaly_pool: &'a [EgoGraph],
    pub hops: usize,
}

/// Top a batch up to balance per the configured mode. Real samples pass
/// through untouched; appended samples carry label 1.
pub fn balance_batch(
    mut batch: Vec<(EgoGraph, f64)>,
    losses: &LossCache,
    ctx: &mut BalanceContext,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(EgoGraph, f64)>, TrainError> {
    assert!(!batch.is_empty(), "empty batch");
    if ctx.mode == AugmentMode::None {
        return Ok(batch);
    }
    let n_anom = batch.iter().filter(|(_, y)| *y == 1.0).count();
    let n_norm = batch.len() - n_anom;
    let deficit = n_norm.saturating_sub(n_anom);
    if deficit == 0 {
        return Ok(batch);
    }

    match ctx.mode {
        AugmentMode::None => unreachable!(),
        AugmentMode::RandomDuplicate => {
            assert!(!ctx.anomaly_pool.is_empty(), "no anomalies to duplicate");
            for _ in 0..deficit {
                let pick = rng.random_range(0..ctx.anomaly_pool.len());
                batch.push((ctx.anomaly_pool[pick].clone(), 1.0));
            }
        }
        AugmentMode::Unconditional | AugmentMode::Baed => {
            let model = ctx.diffusion.ok_or(TrainError::MissingDiffusion(ctx.mode))?;
            let sched = ctx.sched.ok_or(TrainError::MissingDiffusion(ctx.mode))?;
            let d_g = model.gin_cfg.embed_dim;

            let guidance = if ctx.mode == AugmentMode::Unconditional {
                Matrix::zeros(1, d_g)
            } else {
                // guidance from this batch's real anomalies, curriculum-weighted
                let anoms: Vec<&EgoGraph> = batch
                    .iter()
                    .filter(|(e, y)| *y == 1.0 && e.origin == crate::graph::EgoOrigin::Extracted)
                    .map(|(e, _)| e)
                    .collect();
                if anoms.is_empty() {
                    ctx.ema.get(d_g)
                } else {
                    let embeddings: Vec<Matrix> = anoms
                        .iter()
                        .map(|e| gin_encode(&model.store, &model.gin_cfg, e))
                        .collect();
                    let weights: Vec<f64> = if ctx.epoch == 0 {
                        vec![1.0; anoms.len()]
                    } else {
                        let sched_cfg = CurriculumSchedule {
                            alpha: ctx.curriculum_alpha,
                            shift: ctx.curriculum_shift,
                            total_iters: ctx.total_iters,
                        };
                        anoms
                            .iter()
                            .map(|e| {
                                curriculum_weight(
                                    losses.get(e.center_id()),
                                    ctx.iteration.min(ctx.total_iters),
                                    &sched_cfg,
                                )
                            })
                            .collect()
                    };
                    let agg =
                        aggregate_guidance(&embeddings, &weights).expect("nonempty embeddings");
                    ctx.ema.update(&agg);
                    agg
                }
            };

            for _ in 0..deficit {
                let m = ctx.size_pool[rng.random_range(0..ctx.size_pool.len())];
                let adj = generate_adjacency(model, &guidance, m, sched, rng);
                let ego = assemble_ego(&adj, ctx.feature_pool, ctx.hops, rng);
                batch.push((ego, 1.0));
            }
        }
    }
    Ok(batch)
}

/// Algorithm-3 training loop; deterministic for a fixed config and seed.
pub fn train_detector(
    g: &AttributedGraph,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    diffusion: Option<(&DiffusionModel, &NoiseSchedule)>,
) -> Result<TrainOutput, TrainError> {
    if cfg.mode.needs_diffusion() && diffusion.is_none() {
        return Err(TrainError::MissingDiffusion(cfg.mode));
    }
    let root = StreamRng::new(cfg.seed);

    let extract = |id: usize| extract_ego_graph(g, id, cfg.hops, cfg.n_max, cfg.seed);
    let train_egos: Vec<EgoGraph> = split.train_ids.iter().map(|&id| extract(id)).collect();
    let val_egos: Vec<EgoGraph> = split.val_ids.iter().map(|&id| extract(id)).collect();

    let anomaly_pool: Vec<EgoGraph> =
        train_egos.iter().filter(|e| e.label.is_anomalous()).cloned().collect();
    if anomaly_pool.is_empty() {
        return Err(TrainError::NoTrainAnomalies);
    }
    let anom_rows: Vec<Vec<f64>> = anomaly_pool
        .iter()
        .map(|e| g.feature_row(e.center_id()).to_vec())
        .collect();
    let feature_pool = Matrix::from_rows(&anom_rows);
    let size_pool: Vec<usize> = anomaly_pool.iter().map(EgoGraph::n_nodes).collect();

    let det_cfg = DetectorConfig {
        input_dim: g.feature_dim(),
        hidden_dim: cfg.hidden_dim,
        layers: cfg.layers,
        agg: cfg.agg,
    };
    let mut model = DetectorModel::init(det_cfg, cfg.seed);
    let mut adam = AdamState::new(&model.store);

    let n_batches = train_egos.len().div_ceil(cfg.batch_size);
    let total_iters = (cfg.epochs * n_batches).max(1);
    let mut losses = LossCache::new();
    let mut median = RunningMedian::new();
    let mut ema = EmaFallback::new(cfg.ema_decay);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut batch_fractions = Vec::new();
    let mut best: Option<(f64, usize, DetectorModel)> = None;
    let mut iteration = 0usize;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_egos.len()).collect();
        order.shuffle(&mut root.stream("epoch-shuffle", epoch as u64));

        let mut epoch_loss = 0.0;
        let mut epoch_samples = 0usize;
        let mut generated = 0usize;

        for chunk in order.chunks(cfg.batch_size) {
            iteration += 1;
            let raw: Vec<(EgoGraph, f64)> = chunk
                .iter()
                .map(|&i| {
                    let e = &train_egos[i];
                    (e.clone(), e.label.as_f64().expect("train egos are labeled"))
                })
                .collect();
            let original_len = raw.len();

            let shift = cfg.curriculum.beta_shift.unwrap_or_else(|| median.value());
            let mut ctx = BalanceContext {
                mode: cfg.mode,
                diffusion: diffusion.map(|(m, _)| m),
                sched: diffusion.map(|(_, s)| s),
                iteration,
                total_iters,
                epoch,
                curriculum_alpha: cfg.curriculum.alpha,
                curriculum_shift: shift,
                ema: &mut ema,
                feature_pool: &feature_pool,
                size_pool: &size_pool,
                anomaly_pool: &anomaly_pool,
                hops: cfg.hops,
            };
            let mut rng = root.stream("balance", iteration as u64);
            let batch = balance_batch(raw, &losses, &mut ctx, &mut rng)?;
            generated += batch.len() - original_len;
            let frac =
                batch.iter().filter(|(_, y)| *y == 1.0).count() as f64 / batch.len() as f64;
            batch_fractions.push(frac);

            let refs: Vec<(&EgoGraph, f64)> = batch.iter().map(|(e, y)| (e, *y)).collect();
            let (mean_loss, per_sample) = model.loss_and_grads(&refs)?;
            adam_step(&mut model.store, &mut adam, cfg.detector_lr)?;
            epoch_loss += mean_loss * batch.len() as f64;
            epoch_samples += batch.len();

            // cache real-anomaly losses for the curriculum
            for ((ego, label), &l) in batch.iter().zip(&per_sample).take(original_len) {
                if *label == 1.0 {
                    losses.update(ego.center_id(), l);
                    median.record(l);
                }
            }
        }
        median.roll_epoch();

        let (val_auroc, val_auprc, val_f1) = evaluate_on(&model, &val_egos)?;
        let stats = EpochStats {
            epoch,
            train_loss: epoch_loss / epoch_samples.max(1) as f64,
            val_auroc,
            val_auprc,
            val_f1,
            generated_count: generated,
        };
        if best.as_ref().is_none_or(|(b, _, _)| val_auroc > *b) {
            best = Some((val_auroc, epoch, model.clone()));
        }
        history.push(stats);
    }

    let (_, best_epoch, best_model) = best.expect("at least one epoch");
    Ok(TrainOutput { model: best_model, history, best_epoch, batch_fractions })
}

/// Score labeled ego-graphs and compute the metric triple at threshold 0.5.
pub fn evaluate_on(
    model: &DetectorModel,
    egos: &[EgoGraph],
) -> Result<(f64, f64, f64), TrainError> {
    let mut scores = Vec::with_capacity(egos.len());
    let mut labels = Vec::with_capacity(egos.len());
    for ego in egos {
        if ego.label == Label::Unknown {
            continue;
        }
        scores.push(model.score_ego(ego)?);
        labels.push(u8::from(ego.label.is_anomalous()));
    }
    Ok((
        auroc(&scores, &labels)?,
        auprc(&scores, &labels)?,
        f1_score(&scores, &labels, 0.5)?,
    ))
}

#[cfg(test)]
mod tests;

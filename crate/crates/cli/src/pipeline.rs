//! Shared pipeline plumbing: dataset/split/checkpoint loading and diffusion
//! pre-training.

use std::path::Path;

use serde::{Deserialize, Serialize};

use baed_core::detector::{DetectorConfig, DetectorModel};
use baed_core::diffusion::{
    diffusion_train_step, make_linear_schedule, DenoiserConfig, DiffusionModel, NoiseSchedule,
};
use baed_core::graph::{
    extract_ego_graph, load_graph_dir, AttributedGraph, DatasetSplit, EgoGraph,
};
use baed_core::guidance::GinConfig;
use baed_core::numeric::{adam_step, load_store, save_store, AdamState, StreamRng};
use rand::seq::SliceRandom;

use crate::config::ExperimentConfig;
use crate::CliError;

pub fn load_dataset(dir: &Path) -> Result<AttributedGraph, CliError> {
    let (graph, _) = load_graph_dir(dir)?;
    Ok(graph)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SplitFile {
    pub train_ids: Vec<usize>,
    pub val_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub seed: u64,
    pub config_digest: String,
}

pub fn load_split_file(path: &Path) -> Result<DatasetSplit, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let file: SplitFile = serde_json::from_str(&text)?;
    Ok(DatasetSplit {
        train_ids: file.train_ids,
        val_ids: file.val_ids,
        test_ids: file.test_ids,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub base_rate: f64,
}

impl ScheduleParams {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        ScheduleParams {
            steps: cfg.diffusion_steps,
            beta_start: cfg.diffusion_beta_start,
            beta_end: cfg.diffusion_beta_end,
            base_rate: cfg.diffusion_base_rate,
        }
    }

    pub fn build(&self) -> Result<NoiseSchedule, CliError> {
        Ok(make_linear_schedule(self.steps, self.beta_start, self.beta_end, self.base_rate)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DiffusionMeta {
    kind: String,
    denoiser: DenoiserConfig,
    gin: GinConfig,
    schedule: ScheduleParams,
    seed: u64,
    config_digest: String,
}

pub fn save_diffusion_checkpoint(
    dir: &Path,
    model: &DiffusionModel,
    schedule: &ScheduleParams,
    seed: u64,
    config_digest: &str,
    force: bool,
) -> Result<(), CliError> {
    if dir.join("manifest.json").exists() && !force {
        return Err(CliError::OutputExists(dir.join("manifest.json").display().to_string()));
    }
    let meta = DiffusionMeta {
        kind: "diffusion".to_string(),
        denoiser: model.denoiser_cfg.clone(),
        gin: model.gin_cfg.clone(),
        schedule: ScheduleParams {
            steps: schedule.steps,
            beta_start: schedule.beta_start,
            beta_end: schedule.beta_end,
            base_rate: schedule.base_rate,
        },
        seed,
        config_digest: config_digest.to_string(),
    };
    save_store(dir, &model.store, &serde_json::to_value(&meta)?)?;
    Ok(())
}

pub fn load_diffusion_checkpoint(
    dir: &Path,
) -> Result<(DiffusionModel, NoiseSchedule), CliError> {
    let (store, meta_value) = load_store(dir)?;
    let meta: DiffusionMeta = serde_json::from_value(meta_value)
        .map_err(|e| CliError::Data(format!("{}: not a diffusion checkpoint: {e}", dir.display())))?;
    let sched = meta.schedule.build()?;
    Ok((DiffusionModel::from_store(meta.denoiser, meta.gin, store), sched))
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectorMeta {
    kind: String,
    detector: DetectorConfig,
    mode: String,
    seed: u64,
    config_digest: String,
}

pub fn save_detector_checkpoint(
    dir: &Path,
    model: &DetectorModel,
    mode: &str,
    seed: u64,
    config_digest: &str,
    force: bool,
) -> Result<(), CliError> {
    if dir.join("manifest.json").exists() && !force {
        return Err(CliError::OutputExists(dir.join("manifest.json").display().to_string()));
    }
    let meta = DetectorMeta {
        kind: "detector".to_string(),
        detector: model.cfg.clone(),
        mode: mode.to_string(),
        seed,
        config_digest: config_digest.to_string(),
    };
    save_store(dir, &model.store, &serde_json::to_value(&meta)?)?;
    Ok(())
}

pub fn load_detector_checkpoint(dir: &Path) -> Result<DetectorModel, CliError> {
    let (store, meta_value) = load_store(dir)?;
    let meta: DetectorMeta = serde_json::from_value(meta_value)
        .map_err(|e| CliError::Data(format!("{}: not a detector checkpoint: {e}", dir.display())))?;
    Ok(DetectorModel::from_store(meta.detector, store))
}

/// Anomalous training ego-graphs, extraction seeded like the trainer's.
pub fn anomalous_train_egos(
    g: &AttributedGraph,
    split: &DatasetSplit,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Vec<EgoGraph> {
    split
        .train_ids
        .iter()
        .map(|&id| extract_ego_graph(g, id, cfg.ego_hops, cfg.ego_n_max, seed))
        .filter(|e| e.label.is_anomalous())
        .collect()
}

/// Algorithm-2 pre-training over the anomalous training ego-graphs.
/// Returns the model, schedule, and per-epoch mean losses.
pub fn pretrain_diffusion(
    g: &AttributedGraph,
    split: &DatasetSplit,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(DiffusionModel, NoiseSchedule, Vec<(usize, f64)>), CliError> {
    let sched = ScheduleParams::from_config(cfg).build()?;
    let egos = anomalous_train_egos(g, split, cfg, seed);
    if egos.is_empty() {
        return Err(CliError::Data("no anomalous training ego-graphs".to_string()));
    }
    let gin_cfg = cfg.gin_config(g.feature_dim());
    let denoiser_cfg = DenoiserConfig {
        model_dim: cfg.diffusion_model_dim,
        heads: cfg.diffusion_heads,
        blocks: cfg.diffusion_blocks,
        ff_dim: cfg.diffusion_ff_dim,
        guidance_dim: cfg.gin_dim,
        n_max: cfg.ego_n_max,
        dropout: cfg.diffusion_dropout,
    };
    let mut model = DiffusionModel::init(denoiser_cfg, gin_cfg, seed);
    let mut adam = AdamState::new(&model.store);
    let root = StreamRng::new(seed);

    let mut log = Vec::with_capacity(cfg.diffusion_epochs);
    let mut step = 0u64;
    for epoch in 0..cfg.diffusion_epochs {
        let mut order: Vec<usize> = (0..egos.len()).collect();
        order.shuffle(&mut root.stream("diffusion-epoch", epoch as u64));
        let mut total = 0.0;
        for &i in &order {
            step += 1;
            let mut rng = root.stream("diffusion-step", step);
            let outcome = diffusion_train_step(&mut model, &egos[i], &sched, &mut rng);
            adam_step(&mut model.store, &mut adam, cfg.diffusion_lr)?;
            total += outcome.loss;
        }
        log.push((epoch, total / order.len() as f64));
    }
    Ok((model, sched, log))
}

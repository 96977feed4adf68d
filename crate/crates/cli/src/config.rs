//! Experiment configuration: a single flat JSON file with namespaced keys
//! ("diffusion.steps": 64). Precedence is flag > file > default; unknown
//! keys are rejected with their path.

use std::fmt::Write as _;
use std::path::Path;

use baed_core::detector::AggMode;
use baed_core::graph::BenchmarkConfig;
use baed_core::guidance::{CurriculumConfig, GinConfig, GinReadout};
use baed_core::trainer::{AugmentMode, TrainConfig};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub graph_n_normal: usize,
    pub graph_n_clusters: usize,
    pub graph_cluster_size: usize,
    pub graph_bg_edge_prob: f64,
    pub graph_feature_dim: usize,
    pub graph_anomaly_feature_shift: f64,

    pub ego_hops: usize,
    pub ego_n_max: usize,

    pub split_train: f64,
    pub split_val: f64,
    pub split_test: f64,

    pub detector_hidden: usize,
    pub detector_layers: usize,
    pub detector_agg: AggMode,
    pub detector_lr: f64,

    pub gin_layers: usize,
    pub gin_dim: usize,
    pub gin_readout: GinReadout,

    pub diffusion_steps: usize,
    pub diffusion_beta_start: f64,
    pub diffusion_beta_end: f64,
    pub diffusion_base_rate: f64,
    pub diffusion_model_dim: usize,
    pub diffusion_heads: usize,
    pub diffusion_blocks: usize,
    pub diffusion_ff_dim: usize,
    pub diffusion_dropout: f64,
    pub diffusion_lr: f64,
    pub diffusion_epochs: usize,

    pub curriculum_alpha: f64,
    /// None = self-calibrating running median.
    pub curriculum_beta_shift: Option<f64>,
    pub curriculum_ema_decay: f64,

    pub train_epochs: usize,
    pub train_batch_size: usize,
    pub train_mode: AugmentMode,

    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            graph_n_normal: 540,
            graph_n_clusters: 12,
            graph_cluster_size: 5,
            graph_bg_edge_prob: 0.015,
            graph_feature_dim: 16,
            graph_anomaly_feature_shift: 2.5,
            ego_hops: 2,
            ego_n_max: 32,
            split_train: 0.70,
            split_val: 0.15,
            split_test: 0.15,
            detector_hidden: 64,
            detector_layers: 2,
            detector_agg: AggMode::Mean,
            detector_lr: 1e-3,
            gin_layers: 2,
            gin_dim: 64,
            gin_readout: GinReadout::Mean,
            diffusion_steps: 128,
            diffusion_beta_start: 1e-4,
            diffusion_beta_end: 0.2,
            diffusion_base_rate: 0.0,
            diffusion_model_dim: 64,
            diffusion_heads: 8,
            diffusion_blocks: 2,
            diffusion_ff_dim: 128,
            diffusion_dropout: 0.1,
            diffusion_lr: 1e-4,
            diffusion_epochs: 300,
            curriculum_alpha: 5.0,
            curriculum_beta_shift: None,
            curriculum_ema_decay: 0.9,
            train_epochs: 50,
            train_batch_size: 32,
            train_mode: AugmentMode::Baed,
            seed: 42,
        }
    }
}

fn as_usize(key: &str, v: &serde_json::Value) -> Result<usize, CliError> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| CliError::Config(format!("key '{key}': expected a non-negative integer")))
}

fn as_f64(key: &str, v: &serde_json::Value) -> Result<f64, CliError> {
    v.as_f64().ok_or_else(|| CliError::Config(format!("key '{key}': expected a number")))
}

fn as_str<'v>(key: &str, v: &'v serde_json::Value) -> Result<&'v str, CliError> {
    v.as_str().ok_or_else(|| CliError::Config(format!("key '{key}': expected a string")))
}

impl ExperimentConfig {
    /// Defaults overlaid with the config file (if any), then the seed flag.
    pub fn load(path: Option<&Path>, seed_flag: Option<u64>) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!("{}: invalid JSON: {e}", path.display()))
            })?;
            let object = value.as_object().ok_or_else(|| {
                CliError::Config(format!("{}: config must be a JSON object", path.display()))
            })?;
            for (key, v) in object {
                cfg.apply(key, v).map_err(|e| match e {
                    CliError::Config(msg) => {
                        CliError::Config(format!("{}: {msg}", path.display()))
                    }
                    other => other,
                })?;
            }
        }
        if let Some(seed) = seed_flag {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, v: &serde_json::Value) -> Result<(), CliError> {
        match key {
            "graph.n_normal" => self.graph_n_normal = as_usize(key, v)?,
            "graph.n_clusters" => self.graph_n_clusters = as_usize(key, v)?,
            "graph.cluster_size" => self.graph_cluster_size = as_usize(key, v)?,
            "graph.bg_edge_prob" => self.graph_bg_edge_prob = as_f64(key, v)?,
            "graph.feature_dim" => self.graph_feature_dim = as_usize(key, v)?,
            "graph.anomaly_feature_shift" => self.graph_anomaly_feature_shift = as_f64(key, v)?,
            "ego.hops" => self.ego_hops = as_usize(key, v)?,
            "ego.n_max" => self.ego_n_max = as_usize(key, v)?,
            "split.train" => self.split_train = as_f64(key, v)?,
            "split.val" => self.split_val = as_f64(key, v)?,
            "split.test" => self.split_test = as_f64(key, v)?,
            "detector.hidden" => self.detector_hidden = as_usize(key, v)?,
            "detector.layers" => self.detector_layers = as_usize(key, v)?,
            "detector.agg" => {
                self.detector_agg = match as_str(key, v)? {
                    "mean" => AggMode::Mean,
                    "concat" => AggMode::Concat,
                    other => {
                        return Err(CliError::Config(format!(
                            "key '{key}': '{other}' is not one of mean|concat"
                        )))
                    }
                }
            }
            "detector.lr" => self.detector_lr = as_f64(key, v)?,
            "gin.layers" => self.gin_layers = as_usize(key, v)?,
            "gin.dim" => self.gin_dim = as_usize(key, v)?,
            "gin.readout" => {
                self.gin_readout = match as_str(key, v)? {
                    "mean" => GinReadout::Mean,
                    "sum" => GinReadout::Sum,
                    other => {
                        return Err(CliError::Config(format!(
                            "key '{key}': '{other}' is not one of mean|sum"
                        )))
                    }
                }
            }
            "diffusion.steps" => self.diffusion_steps = as_usize(key, v)?,
            "diffusion.beta_start" => self.diffusion_beta_start = as_f64(key, v)?,
            "diffusion.beta_end" => self.diffusion_beta_end = as_f64(key, v)?,
            "diffusion.base_rate" => self.diffusion_base_rate = as_f64(key, v)?,
            "diffusion.model_dim" => self.diffusion_model_dim = as_usize(key, v)?,
            "diffusion.heads" => self.diffusion_heads = as_usize(key, v)?,
            "diffusion.blocks" => self.diffusion_blocks = as_usize(key, v)?,
            "diffusion.ff_dim" => self.diffusion_ff_dim = as_usize(key, v)?,
            "diffusion.dropout" => self.diffusion_dropout = as_f64(key, v)?,
            "diffusion.lr" => self.diffusion_lr = as_f64(key, v)?,
            "diffusion.epochs" => self.diffusion_epochs = as_usize(key, v)?,
            "curriculum.alpha" => self.curriculum_alpha = as_f64(key, v)?,
            "curriculum.beta_shift" => {
                self.curriculum_beta_shift =
                    if v.is_null() { None } else { Some(as_f64(key, v)?) }
            }
            "curriculum.ema_decay" => self.curriculum_ema_decay = as_f64(key, v)?,
            "train.epochs" => self.train_epochs = as_usize(key, v)?,
            "train.batch_size" => self.train_batch_size = as_usize(key, v)?,
            "train.mode" => {
                self.train_mode = AugmentMode::parse(as_str(key, v)?).ok_or_else(|| {
                    CliError::Config(format!(
                        "key '{key}': expected none|random-duplicate|unconditional|baed"
                    ))
                })?
            }
            "seed" => self.seed = as_usize(key, v)? as u64,
            unknown => {
                return Err(CliError::Config(format!("unknown config key '{unknown}'")))
            }
        }
        Ok(())
    }

    /// Canonical digest identifying this configuration in artifacts.
    /// The seed is recorded separately and does not enter the digest.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut text = String::new();
        let _ = write!(
            text,
            "graph={},{},{},{},{},{};ego={},{};split={},{},{};",
            self.graph_n_normal,
            self.graph_n_clusters,
            self.graph_cluster_size,
            self.graph_bg_edge_prob,
            self.graph_feature_dim,
            self.graph_anomaly_feature_shift,
            self.ego_hops,
            self.ego_n_max,
            self.split_train,
            self.split_val,
            self.split_test,
        );
        let _ = write!(
            text,
            "detector={},{},{:?},{};gin={},{},{:?};",
            self.detector_hidden,
            self.detector_layers,
            self.detector_agg,
            self.detector_lr,
            self.gin_layers,
            self.gin_dim,
            self.gin_readout,
        );
        let _ = write!(
            text,
            "diffusion={},{},{},{},{},{},{},{},{},{},{};curriculum={},{:?},{};train={},{},{}",
            self.diffusion_steps,
            self.diffusion_beta_start,
            self.diffusion_beta_end,
            self.diffusion_base_rate,
            self.diffusion_model_dim,
            self.diffusion_heads,
            self.diffusion_blocks,
            self.diffusion_ff_dim,
            self.diffusion_dropout,
            self.diffusion_lr,
            self.diffusion_epochs,
            self.curriculum_alpha,
            self.curriculum_beta_shift,
            self.curriculum_ema_decay,
            self.train_epochs,
            self.train_batch_size,
            self.train_mode,
        );
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn benchmark_config(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            n_normal: self.graph_n_normal,
            n_clusters: self.graph_n_clusters,
            cluster_size: self.graph_cluster_size,
            bg_edge_prob: self.graph_bg_edge_prob,
            feature_dim: self.graph_feature_dim,
            anomaly_feature_shift: self.graph_anomaly_feature_shift,
        }
    }

    pub fn gin_config(&self, input_dim: usize) -> GinConfig {
        GinConfig {
            input_dim,
            embed_dim: self.gin_dim,
            layers: self.gin_layers,
            epsilon: 0.0,
            readout: self.gin_readout,
        }
    }

    pub fn train_config(&self, mode: AugmentMode, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.train_epochs,
            batch_size: self.train_batch_size,
            detector_lr: self.detector_lr,
            seed,
            mode,
            curriculum: CurriculumConfig {
                alpha: self.curriculum_alpha,
                beta_shift: self.curriculum_beta_shift,
                total_iters: 1, // resolved inside train_detector
            },
            hops: self.ego_hops,
            n_max: self.ego_n_max,
            hidden_dim: self.detector_hidden,
            layers: self.detector_layers,
            agg: self.detector_agg,
            ema_decay: self.curriculum_ema_decay,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_load_without_file() {
        let cfg = ExperimentConfig::load(None, None).unwrap();
        assert_eq!(cfg.diffusion_steps, 128);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn flag_overrides_file_overrides_default() {
        let dir = std::env::temp_dir().join(format!("baed-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"seed": 7, "diffusion.steps": 16}"#).unwrap();
        let cfg = ExperimentConfig::load(Some(&path), Some(99)).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.diffusion_steps, 16);
        assert_eq!(cfg.train_epochs, 50);
    }

    #[test]
    fn unknown_key_rejected_with_name() {
        let dir = std::env::temp_dir().join(format!("baed-cfg2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"diffusion.stepz": 16}"#).unwrap();
        match ExperimentConfig::load(Some(&path), None) {
            Err(CliError::Config(msg)) => assert!(msg.contains("diffusion.stepz")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn digest_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        assert_eq!(a.digest(), b.digest());
        b.diffusion_steps = 64;
        assert_ne!(a.digest(), b.digest());
        // seed does not change the config digest (it is recorded separately)
        let mut c = ExperimentConfig::default();
        c.seed = 1234;
        assert_eq!(a.digest(), c.digest());
    }
}

//! `train-diffusion` and `generate`.

use std::path::Path;

use baed_core::diffusion::{assemble_ego, generate_adjacency, generated_ego_to_json};
use baed_core::graph::EgoGraph;
use baed_core::guidance::{aggregate_guidance, gin_encode};
use baed_core::numeric::{Matrix, StreamRng};
use rand::Rng;

use crate::artifacts::{csv_with_provenance, write_artifact};
use crate::config::ExperimentConfig;
use crate::pipeline::{
    anomalous_train_egos, load_dataset, load_diffusion_checkpoint, load_split_file,
    pretrain_diffusion, save_diffusion_checkpoint, ScheduleParams,
};
use crate::{CliError, CommonArgs};

pub fn train_diffusion(common: &CommonArgs, data: &Path, split: &Path) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref(), common.seed)?;
    let g = load_dataset(data)?;
    let split = load_split_file(split)?;
    let (model, _sched, log) = pretrain_diffusion(&g, &split, &cfg, cfg.seed)?;

    save_diffusion_checkpoint(
        &common.out,
        &model,
        &ScheduleParams::from_config(&cfg),
        cfg.seed,
        &cfg.digest(),
        common.force,
    )?;
    let rows: Vec<String> =
        log.iter().map(|(epoch, loss)| format!("{epoch},{loss}")).collect();
    let csv = csv_with_provenance("epoch,mean_loss", &rows, &cfg.digest(), cfg.seed);
    write_artifact(&common.out.join("diffusion_log.csv"), csv.as_bytes(), common.force)?;

    let first = log.first().map(|(_, l)| *l).unwrap_or(f64::NAN);
    let last = log.last().map(|(_, l)| *l).unwrap_or(f64::NAN);
    println!(
        "train-diffusion: {} epochs, mean loss {first:.4} -> {last:.4} -> {}",
        log.len(),
        common.out.display()
    );
    Ok(())
}

/// Uniform-weight guidance aggregate over the anomalous training egos.
pub fn aggregate_train_guidance(
    model: &baed_core::diffusion::DiffusionModel,
    egos: &[EgoGraph],
) -> Result<Matrix, CliError> {
    let embeddings: Vec<Matrix> =
        egos.iter().map(|e| gin_encode(&model.store, &model.gin_cfg, e)).collect();
    let weights = vec![1.0; embeddings.len()];
    aggregate_guidance(&embeddings, &weights)
        .map_err(|e| CliError::Data(format!("guidance aggregation: {e}")))
}

pub fn generate(
    common: &CommonArgs,
    diffusion: &Path,
    data: &Path,
    split: &Path,
    count: usize,
    guidance_mode: &str,
) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref(), common.seed)?;
    let (model, sched) = load_diffusion_checkpoint(diffusion)?;
    let g = load_dataset(data)?;
    let split = load_split_file(split)?;
    let egos = anomalous_train_egos(&g, &split, &cfg, cfg.seed);
    if egos.is_empty() {
        return Err(CliError::Data("no anomalous training ego-graphs".to_string()));
    }

    let guidance = match guidance_mode {
        "aggregate" => aggregate_train_guidance(&model, &egos)?,
        "zero" => Matrix::zeros(1, model.gin_cfg.embed_dim),
        other => {
            return Err(CliError::Config(format!(
                "--guidance '{other}' is not one of aggregate|zero"
            )))
        }
    };
    let sizes: Vec<usize> = egos.iter().map(EgoGraph::n_nodes).collect();
    let pool_rows: Vec<Vec<f64>> =
        egos.iter().map(|e| g.feature_row(e.center_id()).to_vec()).collect();
    let feature_pool = Matrix::from_rows(&pool_rows);

    let root = StreamRng::new(cfg.seed);
    let mut samples = Vec::with_capacity(count);
    let mut total_edges = 0usize;
    for k in 0..count {
        let mut rng = root.stream("generate", k as u64);
        let m = sizes[rng.random_range(0..sizes.len())];
        let adj = generate_adjacency(&model, &guidance, m, &sched, &mut rng);
        let ego = assemble_ego(&adj, &feature_pool, cfg.ego_hops, &mut rng);
        total_edges += ego.n_edges();
        samples.push(generated_ego_to_json(&ego, cfg.seed, &guidance, &sched));
    }
    let doc = serde_json::json!({
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "guidance": guidance_mode,
        "samples": samples,
    });
    let path = common.out.join("generated.json");
    write_artifact(&path, serde_json::to_string_pretty(&doc)?.as_bytes(), common.force)?;
    println!(
        "generate: {count} ego-graphs, mean edges {:.2} -> {}",
        total_edges as f64 / count.max(1) as f64,
        path.display()
    );
    Ok(())
}

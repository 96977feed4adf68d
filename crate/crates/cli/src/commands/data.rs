//! `synth`, `ingest`, and `split`.

use std::path::Path;

use baed_core::graph::{load_graph, save_graph, split_dataset, synthesize_benchmark};

use crate::artifacts::write_artifact;
use crate::config::ExperimentConfig;
use crate::pipeline::{load_dataset, SplitFile};
use crate::{CliError, CommonArgs};

pub fn synth(common: &CommonArgs) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref(), common.seed)?;
    if common.out.join("manifest.json").exists() && !common.force {
        return Err(CliError::OutputExists(
            common.out.join("manifest.json").display().to_string(),
        ));
    }
    let g = synthesize_benchmark(&cfg.benchmark_config(), cfg.seed)?;
    let provenance = serde_json::json!({
        "generator": "synth",
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
    });
    let manifest = save_graph(&g, &common.out, provenance)?;
    println!(
        "synth: {} nodes, {} edges, {} anomalies (ratio {:.3}) -> {}",
        manifest.n_nodes,
        manifest.n_edges,
        manifest.n_anomalous,
        manifest.n_anomalous as f64 / manifest.n_nodes as f64,
        common.out.display()
    );
    Ok(())
}

pub fn ingest(
    common: &CommonArgs,
    edges: &Path,
    features: &Path,
    labels: &Path,
) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref(), common.seed)?;
    if common.out.join("manifest.json").exists() && !common.force {
        return Err(CliError::OutputExists(
            common.out.join("manifest.json").display().to_string(),
        ));
    }
    let (g, report) = load_graph(edges, features, labels)?;
    let provenance = serde_json::json!({
        "generator": "ingest",
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
        "duplicate_edges_collapsed": report.duplicate_edges,
        "self_loops_dropped": report.self_loops_dropped,
    });
    let manifest = save_graph(&g, &common.out, provenance)?;
    println!(
        "ingest: {} nodes, {} edges ({} duplicates collapsed, {} self-loops dropped), {} labeled -> {}",
        manifest.n_nodes,
        manifest.n_edges,
        report.duplicate_edges,
        report.self_loops_dropped,
        report.n_labeled,
        common.out.display()
    );
    Ok(())
}

pub fn split(common: &CommonArgs, data: &Path) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref(), common.seed)?;
    let g = load_dataset(data)?;
    let split = split_dataset(&g, (cfg.split_train, cfg.split_val, cfg.split_test), cfg.seed)?;
    let file = SplitFile {
        train_ids: split.train_ids.clone(),
        val_ids: split.val_ids.clone(),
        test_ids: split.test_ids.clone(),
        seed: cfg.seed,
        config_digest: cfg.digest(),
    };
    let path = common.out.join("split.json");
    write_artifact(&path, serde_json::to_string_pretty(&file)?.as_bytes(), common.force)?;
    println!(
        "split: train {} / val {} / test {} -> {}",
        split.train_ids.len(),
        split.val_ids.len(),
        split.test_ids.len(),
        path.display()
    );
    Ok(())
}

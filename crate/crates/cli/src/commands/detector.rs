//! `train-detector`, `evaluate`, and `compare-modes`.

use std::path::Path;

use baed_core::eval::{auprc, auroc, f1_score, MetricsReport};
use baed_core::graph::{extract_ego_graph, split_dataset, AttributedGraph, DatasetSplit, EgoGraph, Label};
use baed_core::trainer::{evaluate_on, train_detector as run_training, AugmentMode};

use crate::artifacts::{csv_with_provenance, write_artifact};
use crate::config::ExperimentConfig;
use crate::pipeline::{
    load_dataset, load_detector_checkpoint, load_diffusion_checkpoint, load_split_file,
    pretrain_diffusion, save_detector_checkpoint,
};
use crate::{CliError, CommonArgs};

fn parse_mode(s: &str) -> Result<AugmentMode, CliError> {
    AugmentMode::parse(s).ok_or_else(|| {
        CliError::Config(format!("mode '{s}' is not one of none|random-duplicate|unconditional|baed"))
    })
}

pub fn train_detector(
    common: &CommonArgs,
    data: &Path,
    split: &Path,
    mode: &str,
    diffusion: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref(), common.seed)?;
    let mode = parse_mode(mode)?;
    let g = load_dataset(data)?;
    let split = load_split_file(split)?;

    let loaded = match (mode.needs_diffusion(), diffusion) {
        (true, Some(path)) => Some(load_diffusion_checkpoint(path)?),
        (true, None) => {
            return Err(CliError::Data(format!(
                "mode {mode} requires --diffusion with a pre-trained checkpoint"
            )))
        }
        (false, _) => None,
    };
    let tcfg = cfg.train_config(mode, cfg.seed);
    let out = run_training(&g, &split, &tcfg, loaded.as_ref().map(|(m, s)| (m, s)))?;

    let rows: Vec<String> = out
        .history
        .iter()
        .map(|h| {
            format!(
                "{},{},{},{},{},{}",
                h.epoch, h.train_loss, h.val_auroc, h.val_auprc, h.val_f1, h.generated_count
            )
        })
        .collect();
    let csv = csv_with_provenance(
        "epoch,train_loss,val_auroc,val_auprc,val_f1,generated_count",
        &rows,
        &cfg.digest(),
        cfg.seed,
    );
    write_artifact(&common.out.join("history.csv"), csv.as_bytes(), common.force)?;
    save_detector_checkpoint(
        &common.out.join("detector"),
        &out.model,
        &mode.to_string(),
        cfg.seed,
        &cfg.digest(),
        common.force,
    )?;
    let best = &out.history[out.best_epoch];
    println!(
        "train-detector[{mode}]: {} epochs, best val AUROC {:.4} at epoch {} -> {}",
        out.history.len(),
        best.val_auroc,
        out.best_epoch,
        common.out.display()
    );
    Ok(())
}

fn test_egos(g: &AttributedGraph, split: &DatasetSplit, cfg: &ExperimentConfig) -> Vec<EgoGraph> {
    split
        .test_ids
        .iter()
        .map(|&id| extract_ego_graph(g, id, cfg.ego_hops, cfg.ego_n_max, cfg.seed))
        .collect()
}

fn read_scores_csv(path: &Path) -> Result<(Vec<f64>, Vec<u8>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("node_id") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::Data(format!(
                "{}:{}: expected 'node_id,score,label'",
                path.display(),
                lineno + 1
            )));
        }
        let score: f64 = parts[1].trim().parse().map_err(|_| {
            CliError::Data(format!("{}:{}: bad score '{}'", path.display(), lineno + 1, parts[1]))
        })?;
        let label: u8 = parts[2].trim().parse().map_err(|_| {
            CliError::Data(format!("{}:{}: bad label '{}'", path.display(), lineno + 1, parts[2]))
        })?;
        scores.push(score);
        labels.push(label);
    }
    Ok((scores, labels))
}

pub fn evaluate(
    common: &CommonArgs,
    scores: Option<&Path>,
    detector: Option<&Path>,
    data: Option<&Path>,
    split: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref(), common.seed)?;
    let (score_vec, label_vec) = match (scores, detector) {
        (Some(path), _) => read_scores_csv(path)?,
        (None, Some(ckpt)) => {
            let data = data.ok_or_else(|| CliError::Config("--data required".to_string()))?;
            let split_path =
                split.ok_or_else(|| CliError::Config("--split required".to_string()))?;
            let g = load_dataset(data)?;
            let split = load_split_file(split_path)?;
            let model = load_detector_checkpoint(ckpt)?;
            let egos = test_egos(&g, &split, &cfg);
            let mut score_vec = Vec::new();
            let mut label_vec = Vec::new();
            let mut rows = Vec::new();
            for ego in &egos {
                if ego.label == Label::Unknown {
                    continue;
                }
                let s = model.score_ego(ego).map_err(baed_core::trainer::TrainError::from)?;
                let y = u8::from(ego.label.is_anomalous());
                rows.push(format!("{},{},{}", ego.center_id(), s, y));
                score_vec.push(s);
                label_vec.push(y);
            }
            let csv = csv_with_provenance("node_id,score,label", &rows, &cfg.digest(), cfg.seed);
            write_artifact(&common.out.join("scores.csv"), csv.as_bytes(), common.force)?;
            (score_vec, label_vec)
        }
        (None, None) => {
            return Err(CliError::Config(
                "evaluate needs either --scores or --detector with --data/--split".to_string(),
            ))
        }
    };

    let report = MetricsReport {
        auroc: auroc(&score_vec, &label_vec)?,
        auprc: auprc(&score_vec, &label_vec)?,
        f1: f1_score(&score_vec, &label_vec, 0.5)?,
        threshold: 0.5,
        n_pos: label_vec.iter().filter(|&&l| l == 1).count(),
        n_neg: label_vec.iter().filter(|&&l| l == 0).count(),
        seed: cfg.seed,
    };
    let mut doc = serde_json::to_value(&report)?;
    doc["config_digest"] = serde_json::Value::String(cfg.digest());
    let path = common.out.join("metrics.json");
    write_artifact(&path, serde_json::to_string_pretty(&doc)?.as_bytes(), common.force)?;
    println!(
        "evaluate: AUROC {:.4} AUPRC {:.4} F1 {:.4} ({} pos / {} neg) -> {}",
        report.auroc,
        report.auprc,
        report.f1,
        report.n_pos,
        report.n_neg,
        path.display()
    );
    Ok(())
}

pub fn compare_modes(
    common: &CommonArgs,
    data: &Path,
    modes: &str,
    seeds: &str,
) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref(), common.seed)?;
    let modes: Vec<AugmentMode> =
        modes.split(',').map(|s| parse_mode(s.trim())).collect::<Result<_, _>>()?;
    let seeds: Vec<u64> = seeds
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad seed '{s}'")))
        })
        .collect::<Result<_, _>>()?;
    if modes.is_empty() || seeds.is_empty() {
        return Err(CliError::Config("need at least one mode and one seed".to_string()));
    }
    let g = load_dataset(data)?;
    let needs_diffusion = modes.iter().any(|m| m.needs_diffusion());

    let mut rows: Vec<String> = Vec::new();
    let mut per_mode: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); modes.len()];
    for &seed in &seeds {
        let split = split_dataset(&g, (cfg.split_train, cfg.split_val, cfg.split_test), seed)?;
        let diffusion = if needs_diffusion {
            let (model, sched, _) = pretrain_diffusion(&g, &split, &cfg, seed)?;
            Some((model, sched))
        } else {
            None
        };
        let test: Vec<EgoGraph> = split
            .test_ids
            .iter()
            .map(|&id| extract_ego_graph(&g, id, cfg.ego_hops, cfg.ego_n_max, seed))
            .collect();
        for (mi, &mode) in modes.iter().enumerate() {
            let tcfg = cfg.train_config(mode, seed);
            let diff_ref = if mode.needs_diffusion() {
                diffusion.as_ref().map(|(m, s)| (m, s))
            } else {
                None
            };
            let out = run_training(&g, &split, &tcfg, diff_ref)?;
            let (test_auroc, test_auprc, test_f1) = evaluate_on(&out.model, &test)?;
            rows.push(format!("{mode},{seed},{test_auroc},{test_auprc},{test_f1}"));
            per_mode[mi].push((test_auroc, test_auprc, test_f1));
            println!("compare-modes: mode={mode} seed={seed} test AUROC {test_auroc:.4}");
        }
    }
    let mut means = serde_json::Map::new();
    for (mi, mode) in modes.iter().enumerate() {
        let n = per_mode[mi].len() as f64;
        let (sa, sp, sf) = per_mode[mi]
            .iter()
            .fold((0.0, 0.0, 0.0), |(a, p, f), (x, y, z)| (a + x, p + y, f + z));
        rows.push(format!("{mode},mean,{},{},{}", sa / n, sp / n, sf / n));
        means.insert(
            mode.to_string(),
            serde_json::json!({"auroc": sa / n, "auprc": sp / n, "f1": sf / n}),
        );
    }
    let csv = csv_with_provenance("mode,seed,auroc,auprc,f1", &rows, &cfg.digest(), cfg.seed);
    write_artifact(&common.out.join("comparison.csv"), csv.as_bytes(), common.force)?;
    let doc = serde_json::json!({
        "config_digest": cfg.digest(),
        "seeds": seeds,
        "means": means,
    });
    write_artifact(
        &common.out.join("comparison.json"),
        serde_json::to_string_pretty(&doc)?.as_bytes(),
        common.force,
    )?;
    println!("compare-modes: wrote {}", common.out.join("comparison.csv").display());
    Ok(())
}

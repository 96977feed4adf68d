//! `threshold-analyze` and `export-embeddings`.

use std::path::Path;

use baed_core::diffusion::{assemble_ego, generate_adjacency};
use baed_core::eval::{
    brute_force_optimal, optimal_threshold_formula, CompareDirection, FiniteInstance,
    MetricCoefficients,
};
use baed_core::graph::{extract_ego_graph, EgoGraph, Label};
use baed_core::guidance::gin_encode;
use baed_core::numeric::{Matrix, StreamRng};
use rand::Rng;

use crate::artifacts::{csv_with_provenance, write_artifact};
use crate::commands::diffusion::aggregate_train_guidance;
use crate::config::ExperimentConfig;
use crate::pipeline::{
    anomalous_train_egos, load_dataset, load_diffusion_checkpoint, load_split_file,
};
use crate::{CliError, CommonArgs};

/// Strict separation of accepted from rejected η by δ*, direction-aware.
/// All-accept and all-reject optima require δ* outside the η range.
fn separates(
    etas: &[f64],
    accepted: &[bool],
    delta: f64,
    direction: CompareDirection,
) -> bool {
    let acc: Vec<f64> =
        etas.iter().zip(accepted).filter(|(_, &a)| a).map(|(&e, _)| e).collect();
    let rej: Vec<f64> =
        etas.iter().zip(accepted).filter(|(_, &a)| !a).map(|(&e, _)| e).collect();
    match direction {
        CompareDirection::GreaterThan => {
            acc.iter().all(|&e| e > delta) && rej.iter().all(|&e| e < delta)
        }
        CompareDirection::LessThan => {
            acc.iter().all(|&e| e < delta) && rej.iter().all(|&e| e > delta)
        }
    }
}

pub fn threshold_analyze(
    common: &CommonArgs,
    instances: usize,
    points: usize,
    coefficient_sets: usize,
) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref(), common.seed)?;
    let root = StreamRng::new(cfg.seed);

    let mut checked = 0usize;
    let mut degenerate_skips = 0usize;
    let mut threshold_failures: Vec<serde_json::Value> = Vec::new();
    let mut separation_failures: Vec<serde_json::Value> = Vec::new();

    for i in 0..instances {
        let mut rng = root.stream("instance", i as u64);
        let raw: Vec<(f64, f64)> = (0..points)
            .map(|_| (rng.random::<f64>(), 0.5 + rng.random::<f64>()))
            .collect();
        let mass_total: f64 = raw.iter().map(|(_, w)| w).sum();
        let pts: Vec<(f64, f64)> = raw.iter().map(|&(e, w)| (e, w / mass_total)).collect();
        let inst = FiniteInstance::new(pts);

        for j in 0..coefficient_sets {
            let mut crng = root.stream("coefficients", (i * coefficient_sets + j) as u64);
            let coef = MetricCoefficients {
                c0: crng.random::<f64>() * 2.0 - 1.0,
                c1: crng.random::<f64>() * 2.0 - 1.0,
                c2: crng.random::<f64>() * 2.0 - 1.0,
                d0: 0.5 + 1.5 * crng.random::<f64>(),
                d1: crng.random::<f64>(),
                d2: crng.random::<f64>(),
            };
            let res = brute_force_optimal(&inst, &coef)?;
            if res.degenerate {
                degenerate_skips += 1;
                continue;
            }
            checked += 1;
            if !res.threshold_rule_optimal {
                threshold_failures.push(serde_json::json!({
                    "instance": i, "coefficients": j, "l_star": res.l_star,
                }));
                continue;
            }
            let formula = match optimal_threshold_formula(res.l_star, &coef) {
                Ok(f) => f,
                Err(_) => {
                    degenerate_skips += 1;
                    continue;
                }
            };
            let etas: Vec<f64> = inst.points.iter().map(|p| p.0).collect();
            if !separates(&etas, &res.threshold_subset, formula.delta_star, formula.direction) {
                separation_failures.push(serde_json::json!({
                    "instance": i,
                    "coefficients": j,
                    "delta_star": formula.delta_star,
                    "l_star": res.l_star,
                }));
            }
        }
    }

    let ok = threshold_failures.is_empty() && separation_failures.is_empty();
    let doc = serde_json::json!({
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "instances": instances,
        "points_per_instance": points,
        "coefficient_sets": coefficient_sets,
        "cases_checked": checked,
        "degenerate_skips": degenerate_skips,
        "threshold_rule_failures": threshold_failures,
        "separation_failures": separation_failures,
        "all_consistent": ok,
    });
    let path = common.out.join("threshold_report.json");
    write_artifact(&path, serde_json::to_string_pretty(&doc)?.as_bytes(), common.force)?;
    println!(
        "threshold-analyze: {checked} cases, {} threshold-rule failures, {} separation failures -> {}",
        doc["threshold_rule_failures"].as_array().unwrap().len(),
        doc["separation_failures"].as_array().unwrap().len(),
        path.display()
    );
    Ok(())
}

pub fn export_embeddings(
    common: &CommonArgs,
    diffusion: &Path,
    data: &Path,
    split: &Path,
    include_generated: usize,
) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref(), common.seed)?;
    let (model, sched) = load_diffusion_checkpoint(diffusion)?;
    let g = load_dataset(data)?;
    let split_data = load_split_file(split)?;

    let d_g = model.gin_cfg.embed_dim;
    let mut header = String::from("node_id,label");
    for i in 1..=d_g {
        header.push_str(&format!(",g_{i}"));
    }

    let mut rows = Vec::new();
    for v in 0..g.n_nodes() {
        let label = match g.label(v) {
            Label::Normal => 0,
            Label::Anomalous => 1,
            Label::Unknown => continue,
        };
        let ego = extract_ego_graph(&g, v, cfg.ego_hops, cfg.ego_n_max, cfg.seed);
        let emb = gin_encode(&model.store, &model.gin_cfg, &ego);
        let mut row = format!("{v},{label}");
        for &x in emb.data() {
            row.push_str(&format!(",{x}"));
        }
        rows.push(row);
    }

    if include_generated > 0 {
        let egos = anomalous_train_egos(&g, &split_data, &cfg, cfg.seed);
        if egos.is_empty() {
            return Err(CliError::Data("no anomalous training ego-graphs".to_string()));
        }
        let guidance = aggregate_train_guidance(&model, &egos)?;
        let sizes: Vec<usize> = egos.iter().map(EgoGraph::n_nodes).collect();
        let pool_rows: Vec<Vec<f64>> =
            egos.iter().map(|e| g.feature_row(e.center_id()).to_vec()).collect();
        let feature_pool = Matrix::from_rows(&pool_rows);
        let root = StreamRng::new(cfg.seed);
        for k in 0..include_generated {
            let mut rng = root.stream("export-generate", k as u64);
            let m = sizes[rng.random_range(0..sizes.len())];
            let adj = generate_adjacency(&model, &guidance, m, &sched, &mut rng);
            let ego = assemble_ego(&adj, &feature_pool, cfg.ego_hops, &mut rng);
            let emb = gin_encode(&model.store, &model.gin_cfg, &ego);
            let mut row = String::from("-1,1");
            for &x in emb.data() {
                row.push_str(&format!(",{x}"));
            }
            rows.push(row);
        }
    }

    let csv = csv_with_provenance(&header, &rows, &cfg.digest(), cfg.seed);
    let path = common.out.join("embeddings.csv");
    write_artifact(&path, csv.as_bytes(), common.force)?;
    println!("export-embeddings: {} rows -> {}", rows.len(), path.display());
    Ok(())
}

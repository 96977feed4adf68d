use super::*;
use crate::diffusion::{make_linear_schedule, DenoiserConfig};
use crate::graph::{synthesize_benchmark, BenchmarkConfig, EgoOrigin};
use crate::guidance::{GinConfig, GinReadout};
use crate::numeric::Matrix;

fn tiny_ego(m: usize, label: Label, id: usize) -> EgoGraph {
    let adj = Matrix::from_fn(m, m, |i, j| f64::from(i != j && i + j < m));
    EgoGraph {
        node_ids: (id * 100..id * 100 + m).collect(),
        adjacency: adj,
        features: Matrix::filled(m, 3, 0.5),
        hops: 1,
        label,
        origin: EgoOrigin::Extracted,
    }
}

fn tiny_diffusion(seed: u64) -> DiffusionModel {
    DiffusionModel::init(
        DenoiserConfig {
            model_dim: 8,
            heads: 2,
            blocks: 1,
            ff_dim: 16,
            guidance_dim: 4,
            n_max: 16,
            dropout: 0.0,
        },
        GinConfig {
            input_dim: 3,
            embed_dim: 4,
            layers: 1,
            epsilon: 0.0,
            readout: GinReadout::Mean,
        },
        seed,
    )
}

fn make_ctx<'a>(
    mode: AugmentMode,
    diffusion: Option<&'a DiffusionModel>,
    sched: Option<&'a NoiseSchedule>,
    ema: &'a mut EmaFallback,
    feature_pool: &'a Matrix,
    size_pool: &'a [usize],
    anomaly_pool: &'a [EgoGraph],
) -> BalanceContext<'a> {
    BalanceContext {
        mode,
        diffusion,
        sched,
        iteration: 5,
        total_iters: 10,
        epoch: 1,
        curriculum_alpha: 5.0,
        curriculum_shift: 0.5,
        ema,
        feature_pool,
        size_pool,
        anomaly_pool,
        hops: 1,
    }
}

#[test]
fn baed_balances_batch_to_exactly_half() {
    let model = tiny_diffusion(1);
    let sched = NoiseSchedule::from_betas(vec![0.4, 0.7, 0.95], 0.0).unwrap();
    let mut ema = EmaFallback::new(0.9);
    let feature_pool = Matrix::filled(2, 3, 1.0);
    let size_pool = vec![3, 4];
    let anomaly_pool = vec![tiny_ego(3, Label::Anomalous, 900)];

    let mut batch: Vec<(EgoGraph, f64)> =
        (0..30).map(|i| (tiny_ego(3, Label::Normal, i), 0.0)).collect();
    batch.push((tiny_ego(4, Label::Anomalous, 50), 1.0));
    batch.push((tiny_ego(3, Label::Anomalous, 51), 1.0));

    let losses = LossCache::new();
    let mut ctx = make_ctx(
        AugmentMode::Baed,
        Some(&model),
        Some(&sched),
        &mut ema,
        &feature_pool,
        &size_pool,
        &anomaly_pool,
    );
    let root = StreamRng::new(2);
    let out = balance_batch(batch, &losses, &mut ctx, &mut root.stream("b", 0)).unwrap();
    assert_eq!(out.len(), 60); // 28 generated
    let anoms = out.iter().filter(|(_, y)| *y == 1.0).count();
    assert_eq!(anoms as f64 / out.len() as f64, 0.5);
    // every generated sample carries label 1 and Generated origin
    for (ego, y) in &out[32..] {
        assert_eq!(*y, 1.0);
        assert_eq!(ego.origin, EgoOrigin::Generated);
    }
}

#[test]
fn anomaly_surplus_leaves_batch_unchanged() {
    let model = tiny_diffusion(1);
    let sched = NoiseSchedule::from_betas(vec![0.5], 0.0).unwrap();
    let mut ema = EmaFallback::new(0.9);
    let feature_pool = Matrix::filled(1, 3, 0.0);
    let size_pool = vec![3];
    let anomaly_pool = vec![tiny_ego(3, Label::Anomalous, 700)];

    let mut batch: Vec<(EgoGraph, f64)> =
        (0..5).map(|i| (tiny_ego(3, Label::Anomalous, i), 1.0)).collect();
    batch.extend((10..13).map(|i| (tiny_ego(3, Label::Normal, i), 0.0)));
    let losses = LossCache::new();
    let mut ctx = make_ctx(
        AugmentMode::Baed,
        Some(&model),
        Some(&sched),
        &mut ema,
        &feature_pool,
        &size_pool,
        &anomaly_pool,
    );
    let root = StreamRng::new(3);
    let out = balance_batch(batch.clone(), &losses, &mut ctx, &mut root.stream("b", 0)).unwrap();
    assert_eq!(out.len(), batch.len());
}

#[test]
fn none_mode_is_passthrough() {
    let mut ema = EmaFallback::new(0.9);
    let feature_pool = Matrix::filled(1, 3, 0.0);
    let size_pool = vec![3];
    let anomaly_pool: Vec<EgoGraph> = vec![];
    let batch: Vec<(EgoGraph, f64)> =
        (0..7).map(|i| (tiny_ego(3, Label::Normal, i), 0.0)).collect();
    let losses = LossCache::new();
    let mut ctx = make_ctx(
        AugmentMode::None,
        None,
        None,
        &mut ema,
        &feature_pool,
        &size_pool,
        &anomaly_pool,
    );
    let root = StreamRng::new(4);
    let out = balance_batch(batch.clone(), &losses, &mut ctx, &mut root.stream("b", 0)).unwrap();
    assert_eq!(out.len(), batch.len());
    for ((a, _), (b, _)) in batch.iter().zip(&out) {
        assert_eq!(a.node_ids, b.node_ids);
    }
}

#[test]
fn random_duplicate_draws_from_pool() {
    let mut ema = EmaFallback::new(0.9);
    let feature_pool = Matrix::filled(1, 3, 0.0);
    let size_pool = vec![3];
    let anomaly_pool = vec![tiny_ego(3, Label::Anomalous, 800), tiny_ego(4, Label::Anomalous, 801)];
    let batch: Vec<(EgoGraph, f64)> =
        (0..6).map(|i| (tiny_ego(3, Label::Normal, i), 0.0)).collect();
    let losses = LossCache::new();
    let mut ctx = make_ctx(
        AugmentMode::RandomDuplicate,
        None,
        None,
        &mut ema,
        &feature_pool,
        &size_pool,
        &anomaly_pool,
    );
    let root = StreamRng::new(5);
    let out = balance_batch(batch, &losses, &mut ctx, &mut root.stream("b", 0)).unwrap();
    assert_eq!(out.len(), 12);
    let dup_ids: Vec<usize> = out[6..].iter().map(|(e, _)| e.center_id()).collect();
    for id in dup_ids {
        assert!(id == 80000 || id == 80100, "duplicate came from the pool");
    }
}

#[test]
fn original_samples_survive_augmentation_unchanged() {
    // the multiset of original (ego, label) pairs is a sub-multiset of the
    // augmented batch, in order at the front
    let model = tiny_diffusion(6);
    let sched = NoiseSchedule::from_betas(vec![0.5, 0.9], 0.0).unwrap();
    let mut ema = EmaFallback::new(0.9);
    let feature_pool = Matrix::filled(1, 3, 0.25);
    let size_pool = vec![4];
    let anomaly_pool = vec![tiny_ego(4, Label::Anomalous, 901)];
    let batch: Vec<(EgoGraph, f64)> = vec![
        (tiny_ego(3, Label::Normal, 0), 0.0),
        (tiny_ego(4, Label::Anomalous, 1), 1.0),
        (tiny_ego(5, Label::Normal, 2), 0.0),
        (tiny_ego(3, Label::Normal, 3), 0.0),
    ];
    let losses = LossCache::new();
    let mut ctx = make_ctx(
        AugmentMode::Baed,
        Some(&model),
        Some(&sched),
        &mut ema,
        &feature_pool,
        &size_pool,
        &anomaly_pool,
    );
    let root = StreamRng::new(7);
    let out = balance_batch(batch.clone(), &losses, &mut ctx, &mut root.stream("b", 0)).unwrap();
    for ((orig, ly), (got, gy)) in batch.iter().zip(&out) {
        assert_eq!(orig.node_ids, got.node_ids);
        assert_eq!(orig.adjacency, got.adjacency);
        assert_eq!(ly, gy);
    }
}

#[test]
fn effective_ratio_examples() {
    // N_a=13, N_n=987, M=974 → 987/1974 = 0.5 exactly
    assert_eq!(effective_ratio(13, 987, 974).unwrap(), 0.5);
    // M=0 → identity
    let pi = effective_ratio(13, 987, 0).unwrap();
    assert!((pi - 13.0 / 1000.0).abs() < 1e-15);
    assert_eq!(effective_ratio(10, 90, 80).unwrap(), 0.5);
    assert!(effective_ratio(0, 0, 0).is_err());
}

#[test]
fn balancing_moves_ratio_toward_half() {
    // property over random triples with N_a < N_n, 0 < M ≤ N_n − N_a
    let root = StreamRng::new(8);
    let mut rng = root.stream("triples", 0);
    for _ in 0..1000 {
        let n_n = 2 + (rng.random::<u32>() % 1000) as usize;
        let n_a = (rng.random::<u32>() as usize) % n_n.max(2).min(n_n);
        let n_a = n_a.min(n_n - 1);
        let m = 1 + (rng.random::<u32>() as usize) % (n_n - n_a);
        let pi = n_a as f64 / (n_a + n_n) as f64;
        let pi_tilde = effective_ratio(n_a, n_n, m).unwrap();
        assert!(
            (pi_tilde - 0.5).abs() < (pi - 0.5).abs(),
            "n_a={n_a} n_n={n_n} m={m}: {pi_tilde} vs {pi}"
        );
    }
}

#[test]
fn ratio_strictly_increasing_in_m() {
    let root = StreamRng::new(9);
    let mut rng = root.stream("mono", 0);
    for _ in 0..500 {
        let n_n = 2 + (rng.random::<u32>() % 500) as usize;
        let n_a = (rng.random::<u32>() as usize % n_n).min(n_n - 1);
        let m = (rng.random::<u32>() % 300) as usize;
        let a = effective_ratio(n_a, n_n, m).unwrap();
        let b = effective_ratio(n_a, n_n, m + 1).unwrap();
        assert!(b > a, "π̃ must increase in M when N_a < N_n");
    }
}

fn small_benchmark() -> (AttributedGraph, DatasetSplit) {
    let cfg = BenchmarkConfig {
        n_normal: 90,
        n_clusters: 2,
        cluster_size: 5,
        bg_edge_prob: 0.03,
        feature_dim: 4,
        anomaly_feature_shift: 3.0,
    };
    let g = synthesize_benchmark(&cfg, 11).unwrap();
    let split = crate::graph::split_dataset(&g, (0.7, 0.15, 0.15), 11).unwrap();
    (g, split)
}

fn fast_cfg(seed: u64, mode: AugmentMode) -> TrainConfig {
    TrainConfig {
        epochs: 10,
        batch_size: 16,
        detector_lr: 1e-2,
        seed,
        mode,
        curriculum: CurriculumConfig { alpha: 5.0, beta_shift: None, total_iters: 1 },
        hops: 1,
        n_max: 8,
        hidden_dim: 16,
        layers: 2,
        agg: AggMode::Mean,
        ema_decay: 0.9,
    }
}

#[test]
fn plain_training_reduces_loss_on_separable_data() {
    // training loss decreases over the first 10 epochs in ≥ 4 of 5 seeds
    let (g, split) = small_benchmark();
    let mut successes = 0;
    for seed in 0..5u64 {
        let out = train_detector(&g, &split, &fast_cfg(seed, AugmentMode::None), None).unwrap();
        let first = out.history.first().unwrap().train_loss;
        let last = out.history.last().unwrap().train_loss;
        if last < first {
            successes += 1;
        }
    }
    assert!(successes >= 4, "loss decreased in only {successes}/5 seeds");
}

#[test]
fn history_bookkeeping_and_baed_fractions() {
    let (g, split) = small_benchmark();
    let diffusion = tiny_diffusion_for_graph(&g);
    let sched = make_linear_schedule(4, 0.2, 0.95, 0.0).unwrap();
    let mut cfg = fast_cfg(3, AugmentMode::Baed);
    cfg.epochs = 3;
    let out = train_detector(&g, &split, &cfg, Some((&diffusion, &sched))).unwrap();
    assert_eq!(out.history.len(), 3);
    for f in &out.batch_fractions {
        assert_eq!(*f, 0.5, "every baed batch balances to exactly one half");
    }
    assert!(out.history.iter().all(|h| h.generated_count > 0));
}

#[test]
fn training_is_bitwise_deterministic() {
    let (g, split) = small_benchmark();
    let diffusion = tiny_diffusion_for_graph(&g);
    let sched = make_linear_schedule(4, 0.2, 0.95, 0.0).unwrap();
    let mut cfg = fast_cfg(5, AugmentMode::Baed);
    cfg.epochs = 2;
    let a = train_detector(&g, &split, &cfg, Some((&diffusion, &sched))).unwrap();
    let b = train_detector(&g, &split, &cfg, Some((&diffusion, &sched))).unwrap();
    for (x, y) in a.history.iter().zip(&b.history) {
        assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
        assert_eq!(x.val_auroc.to_bits(), y.val_auroc.to_bits());
    }
}

#[test]
fn missing_diffusion_is_rejected() {
    let (g, split) = small_benchmark();
    let cfg = fast_cfg(0, AugmentMode::Baed);
    assert!(matches!(
        train_detector(&g, &split, &cfg, None),
        Err(TrainError::MissingDiffusion(AugmentMode::Baed))
    ));
}

fn tiny_diffusion_for_graph(g: &AttributedGraph) -> DiffusionModel {
    DiffusionModel::init(
        DenoiserConfig {
            model_dim: 8,
            heads: 2,
            blocks: 1,
            ff_dim: 16,
            guidance_dim: 4,
            n_max: 8,
            dropout: 0.0,
        },
        GinConfig {
            input_dim: g.feature_dim(),
            embed_dim: 4,
            layers: 1,
            epsilon: 0.0,
            readout: GinReadout::Mean,
        },
        77,
    )
}

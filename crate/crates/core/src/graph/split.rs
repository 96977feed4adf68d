//! Stratified train/validation/test splits over labeled nodes.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::{AttributedGraph, Label};
use crate::numeric::StreamRng;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("ratios must be positive and sum to 1 (got {0:?})")]
    BadRatios((f64, f64, f64)),
    #[error("stratification impossible: only {0} labeled anomalies (need at least 3)")]
    TooFewAnomalies(usize),
}

/// Disjoint labeled-node index sets.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train_ids: Vec<usize>,
    pub val_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

impl DatasetSplit {
    pub fn validate(&self, n_nodes: usize) {
        let mut seen = vec![false; n_nodes];
        for id in self.train_ids.iter().chain(&self.val_ids).chain(&self.test_ids) {
            assert!(*id < n_nodes, "split id out of range");
            assert!(!seen[*id], "split sets not disjoint");
            seen[*id] = true;
        }
    }
}

/// Largest-remainder apportionment of `total` into three parts.
fn apportion(total: usize, ratios: (f64, f64, f64)) -> [usize; 3] {
    let shares = [ratios.0, ratios.1, ratios.2].map(|r| r * total as f64);
    let mut counts = shares.map(|s| s.floor() as usize);
    let mut remainders: Vec<(usize, f64)> = shares
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s - s.floor()))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut leftover = total - counts.iter().sum::<usize>();
    for (i, _) in remainders {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    counts
}

/// Stratified split of the labeled nodes, deterministic for a fixed seed.
///
/// Anomaly counts per split follow largest-remainder apportionment of the
/// class total, with one anomaly forced into any empty split when the
/// source has at least 3; normals then fill each split to its overall
/// largest-remainder size.
pub fn split_dataset(
    g: &AttributedGraph,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit, SplitError> {
    let sum = ratios.0 + ratios.1 + ratios.2;
    if ratios.0 <= 0.0 || ratios.1 <= 0.0 || ratios.2 <= 0.0 || (sum - 1.0).abs() > 1e-9 {
        return Err(SplitError::BadRatios(ratios));
    }
    let mut anomalies: Vec<usize> = Vec::new();
    let mut normals: Vec<usize> = Vec::new();
    for v in 0..g.n_nodes() {
        match g.label(v) {
            Label::Anomalous => anomalies.push(v),
            Label::Normal => normals.push(v),
            Label::Unknown => {}
        }
    }
    if anomalies.len() < 3 {
        return Err(SplitError::TooFewAnomalies(anomalies.len()));
    }

    let root = StreamRng::new(seed);
    anomalies.shuffle(&mut root.stream("split-anomalies", 0));
    normals.shuffle(&mut root.stream("split-normals", 0));

    let total = anomalies.len() + normals.len();
    let split_sizes = apportion(total, ratios);
    let mut anom_counts = apportion(anomalies.len(), ratios);
    // every split carries at least one anomaly
    for i in 0..3 {
        if anom_counts[i] == 0 {
            let donor = (0..3).max_by_key(|&j| anom_counts[j]).unwrap();
            anom_counts[donor] -= 1;
            anom_counts[i] += 1;
        }
    }

    let mut sets = [Vec::new(), Vec::new(), Vec::new()];
    let mut a_iter = anomalies.into_iter();
    for (i, set) in sets.iter_mut().enumerate() {
        for _ in 0..anom_counts[i] {
            set.push(a_iter.next().unwrap());
        }
    }
    let mut n_iter = normals.into_iter();
    for (i, set) in sets.iter_mut().enumerate() {
        let need = split_sizes[i] - anom_counts[i];
        for _ in 0..need {
            set.push(n_iter.next().unwrap());
        }
    }
    for set in &mut sets {
        set.sort_unstable();
    }
    let [train_ids, val_ids, test_ids] = sets;
    Ok(DatasetSplit { train_ids, val_ids, test_ids })
}

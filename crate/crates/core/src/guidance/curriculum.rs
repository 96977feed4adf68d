//! Curriculum weighting of guidance embeddings.
//!
//! w_i = sigmoid(α·(l_i − β)) · h(t) with h(t) = t/T, so early training
//! down-weights everything and late training focuses generation on
//! high-loss (underfit) anomaly patterns.

use thiserror::Error;

use crate::numeric::Matrix;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("empty embedding sequence")]
    Empty,
    #[error("got {embeddings} embeddings but {weights} weights")]
    LengthMismatch { embeddings: usize, weights: usize },
}

/// User-facing curriculum settings; `beta_shift = None` tracks the running
/// median of per-sample anomaly losses.
#[derive(Debug, Clone)]
pub struct CurriculumConfig {
    /// Sigmoid sharpness α.
    pub alpha: f64,
    /// Loss shift β; None = self-calibrating running median.
    pub beta_shift: Option<f64>,
    /// Total training iterations T of h(t).
    pub total_iters: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig { alpha: 5.0, beta_shift: None, total_iters: 1 }
    }
}

impl CurriculumConfig {
    /// Resolve against the current running median.
    pub fn schedule(&self, median_loss: f64) -> CurriculumSchedule {
        assert!(self.alpha > 0.0, "alpha must be positive");
        assert!(self.total_iters >= 1, "total_iters must be at least 1");
        CurriculumSchedule {
            alpha: self.alpha,
            shift: self.beta_shift.unwrap_or(median_loss),
            total_iters: self.total_iters,
        }
    }
}

/// Fully resolved weighting rule.
#[derive(Debug, Clone, Copy)]
pub struct CurriculumSchedule {
    pub alpha: f64,
    pub shift: f64,
    pub total_iters: usize,
}

/// w_i = sigmoid(alpha·(l_i − shift)) · (t / total_iters).
pub fn curriculum_weight(loss: f64, t: usize, sched: &CurriculumSchedule) -> f64 {
    assert!(t <= sched.total_iters, "iteration {t} beyond horizon {}", sched.total_iters);
    let s = 1.0 / (1.0 + (-sched.alpha * (loss - sched.shift)).exp());
    s * (t as f64 / sched.total_iters as f64)
}

/// h̃^g = Σ_i (w_i / Σ_j w_j)·h^g_i; all-zero weights fall back to uniform.
pub fn aggregate_guidance(
    embeddings: &[Matrix],
    weights: &[f64],
) -> Result<Matrix, AggregateError> {
    if embeddings.is_empty() {
        return Err(AggregateError::Empty);
    }
    if embeddings.len() != weights.len() {
        return Err(AggregateError::LengthMismatch {
            embeddings: embeddings.len(),
            weights: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    let n = embeddings.len() as f64;
    let mut out = Matrix::zeros(1, embeddings[0].cols());
    for (e, &w) in embeddings.iter().zip(weights) {
        let norm_w = if total > 0.0 { w / total } else { 1.0 / n };
        out.add_assign_scaled(e, norm_w);
    }
    Ok(out)
}

/// Per-batch guidance bookkeeping.
#[derive(Debug, Clone)]
pub struct GuidanceState {
    pub embeddings: Vec<Matrix>,
    pub weights: Vec<f64>,
    pub aggregated: Matrix,
}

/// Exponential moving average of aggregated guidance; the fallback for
/// batches containing no anomalies.
#[derive(Debug, Clone)]
pub struct EmaFallback {
    value: Option<Matrix>,
    decay: f64,
}

impl EmaFallback {
    pub fn new(decay: f64) -> Self {
        assert!((0.0..1.0).contains(&decay));
        EmaFallback { value: None, decay }
    }

    pub fn update(&mut self, aggregated: &Matrix) {
        match &mut self.value {
            Some(v) => {
                let blended = v.scale(self.decay);
                let mut blended = blended;
                blended.add_assign_scaled(aggregated, 1.0 - self.decay);
                *v = blended;
            }
            none => *none = Some(aggregated.clone()),
        }
    }

    /// Current fallback; zeros before any anomaly has been seen.
    pub fn get(&self, dim: usize) -> Matrix {
        match &self.value {
            Some(v) => v.clone(),
            None => Matrix::zeros(1, dim),
        }
    }
}

/// Running median over the losses seen this epoch.
#[derive(Debug, Clone, Default)]
pub struct RunningMedian {
    epoch_losses: Vec<f64>,
    current: Option<f64>,
}

impl RunningMedian {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, loss: f64) {
        self.epoch_losses.push(loss);
    }

    /// Fold this epoch's losses into the median and reset.
    pub fn roll_epoch(&mut self) {
        if self.epoch_losses.is_empty() {
            return;
        }
        let mut sorted = self.epoch_losses.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        self.current = Some(median);
        self.epoch_losses.clear();
    }

    /// ln 2 (the loss of an uninformative detector) until data arrives.
    pub fn value(&self) -> f64 {
        self.current.unwrap_or(std::f64::consts::LN_2)
    }
}

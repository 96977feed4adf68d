//! Noise schedules for the discrete forward process.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("beta values must satisfy 0 < beta_start <= beta_end < 1 (got {start}..{end})")]
    BadBetaRange { start: f64, end: f64 },
    #[error("beta[{index}] = {value} outside [0,1]")]
    BetaOutOfRange { index: usize, value: f64 },
    #[error("schedule needs at least one step")]
    Empty,
    #[error(
        "schedule does not reach the prior: alpha_bar_T = {alpha_bar_t:.6} > 0.01; \
         use beta_end >= {required_beta_end:.4}"
    )]
    PriorUnreachable { alpha_bar_t: f64, required_beta_end: f64 },
}

/// Diffusion horizon T with β_t, α_t = 1−β_t, ᾱ_t = Πα and base rate p.
/// Indexing is 1-based in t; `alpha_bar(0) = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
    base_rate: f64,
}

impl NoiseSchedule {
    /// Build from explicit betas (diagnostic path: no prior-reachability
    /// enforcement, degenerate β ∈ {0,1} allowed).
    pub fn from_betas(betas: Vec<f64>, base_rate: f64) -> Result<Self, ScheduleError> {
        if betas.is_empty() {
            return Err(ScheduleError::Empty);
        }
        for (i, &b) in betas.iter().enumerate() {
            if !(0.0..=1.0).contains(&b) {
                return Err(ScheduleError::BetaOutOfRange { index: i, value: b });
            }
        }
        assert!((0.0..=1.0).contains(&base_rate), "base rate outside [0,1]");
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut prod = 1.0;
        for &b in &betas {
            prod *= 1.0 - b;
            alpha_bars.push(prod);
        }
        Ok(NoiseSchedule { betas, alpha_bars, base_rate })
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// β_t for t in 1..=T.
    pub fn beta(&self, t: usize) -> f64 {
        assert!((1..=self.len()).contains(&t), "t={t} outside [1,{}]", self.len());
        self.betas[t - 1]
    }

    /// ᾱ_t for t in 0..=T, with ᾱ_0 = 1.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        assert!(t <= self.len(), "t={t} outside [0,{}]", self.len());
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    pub fn base_rate(&self) -> f64 {
        self.base_rate
    }

    /// Digest of (T, betas, p) identifying the schedule in artifacts.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update((self.len() as u64).to_le_bytes());
        for &b in &self.betas {
            hasher.update(b.to_le_bytes());
        }
        hasher.update(self.base_rate.to_le_bytes());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Smallest beta_end for which the linear schedule reaches ᾱ_T ≤ 0.01.
fn required_beta_end(t: usize, beta_start: f64) -> f64 {
    let alpha_bar_final = |beta_end: f64| -> f64 {
        let mut prod = 1.0;
        for i in 0..t {
            let frac = if t == 1 { 0.0 } else { i as f64 / (t - 1) as f64 };
            prod *= 1.0 - (beta_start + frac * (beta_end - beta_start));
        }
        prod
    };
    let (mut lo, mut hi) = (beta_start, 1.0 - 1e-9);
    if alpha_bar_final(hi) > 0.01 {
        return hi;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if alpha_bar_final(mid) > 0.01 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Linear β_t from `beta_start` to `beta_end`, enforcing ᾱ_T ≤ 0.01 so the
/// prior is effectively independent of A^0.
pub fn make_linear_schedule(
    t: usize,
    beta_start: f64,
    beta_end: f64,
    base_rate: f64,
) -> Result<NoiseSchedule, ScheduleError> {
    if t == 0 {
        return Err(ScheduleError::Empty);
    }
    if !(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0) {
        return Err(ScheduleError::BadBetaRange { start: beta_start, end: beta_end });
    }
    let betas: Vec<f64> = (0..t)
        .map(|i| {
            let frac = if t == 1 { 0.0 } else { i as f64 / (t - 1) as f64 };
            beta_start + frac * (beta_end - beta_start)
        })
        .collect();
    let sched = NoiseSchedule::from_betas(betas, base_rate)?;
    let alpha_bar_t = sched.alpha_bar(t);
    if alpha_bar_t > 0.01 {
        return Err(ScheduleError::PriorUnreachable {
            alpha_bar_t,
            required_beta_end: required_beta_end(t, beta_start),
        });
    }
    Ok(sched)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_betas_cumulative_product() {
        // β=[0.1,0.2,0.3,0.4] → ᾱ=[0.9,0.72,0.504,0.3024]
        let s = NoiseSchedule::from_betas(vec![0.1, 0.2, 0.3, 0.4], 0.0).unwrap();
        let expected = [0.9, 0.72, 0.504, 0.3024];
        for (t, e) in expected.iter().enumerate() {
            assert!((s.alpha_bar(t + 1) - e).abs() < 1e-15);
        }
        assert_eq!(s.alpha_bar(0), 1.0);
    }

    #[test]
    fn single_large_step_reaches_prior() {
        // T=1, β=0.999 → ᾱ_1 = 0.001 ≤ 0.01
        let s = make_linear_schedule(1, 0.999, 0.999, 0.0).unwrap();
        assert!((s.alpha_bar(1) - 0.001).abs() < 1e-12);
    }

    #[test]
    fn default_schedule_reaches_prior() {
        // T=128, 1e-4 → 0.2 must satisfy ᾱ_128 ≤ 0.01; oracle = direct product
        let s = make_linear_schedule(128, 1e-4, 0.2, 0.0).unwrap();
        let mut prod = 1.0;
        for t in 1..=128 {
            prod *= 1.0 - s.beta(t);
        }
        assert!((s.alpha_bar(128) - prod).abs() < 1e-15);
        assert!(s.alpha_bar(128) <= 0.01);
    }

    #[test]
    fn conventional_low_beta_end_fails_at_128_steps() {
        // the 1000-step-conventional 0.02 does not reach the prior at T=128
        match make_linear_schedule(128, 1e-4, 0.02, 0.0) {
            Err(ScheduleError::PriorUnreachable { required_beta_end, .. }) => {
                assert!(required_beta_end > 0.02);
                // the reported fix must actually work
                assert!(make_linear_schedule(128, 1e-4, required_beta_end, 0.0).is_ok());
            }
            other => panic!("expected PriorUnreachable, got {other:?}"),
        }
    }

    #[test]
    fn alpha_bar_strictly_decreasing_for_linear() {
        let s = make_linear_schedule(64, 1e-3, 0.3, 0.0).unwrap();
        for t in 1..=64 {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
        }
    }

    #[test]
    fn digest_distinguishes_schedules() {
        let a = make_linear_schedule(16, 1e-3, 0.5, 0.0).unwrap();
        let b = make_linear_schedule(16, 1e-3, 0.51, 0.0).unwrap();
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.digest());
    }
}

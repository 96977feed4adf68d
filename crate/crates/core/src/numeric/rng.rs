//! Seeded, named-stream randomness.
//!
//! Every consumer derives an independent ChaCha stream from
//! `(seed, label, counter)`, so parallel or reordered work cannot perturb
//! results: identical triples yield identical draws on any platform.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use super::matrix::Matrix;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("bernoulli probability {value} at ({row},{col}) outside [0,1]")]
    ProbOutOfRange { row: usize, col: usize, value: f64 },
}

/// Root of all randomness: a 64-bit seed plus named-stream derivation.
#[derive(Debug, Clone, Copy)]
pub struct StreamRng {
    seed: u64,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        StreamRng { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent generator for `(label, counter)`.
    pub fn stream(&self, label: &str, counter: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix(self.seed, label, counter))
    }
}

/// FNV-1a over (seed, label, counter); stable across platforms.
fn mix(seed: u64, label: &str, counter: u64) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut h = OFFSET;
    for &b in seed
        .to_le_bytes()
        .iter()
        .chain(label.as_bytes())
        .chain(counter.to_le_bytes().iter())
    {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Independent Bernoulli draws, one per entry of `probs`.
///
/// In symmetric mode only i<j entries are drawn and mirrored; the diagonal
/// stays zero. `probs` must then be symmetric with zero diagonal.
pub fn sample_bernoulli_matrix(
    rng: &mut ChaCha8Rng,
    probs: &Matrix,
    symmetric: bool,
) -> Result<Matrix, SampleError> {
    for i in 0..probs.rows() {
        for j in 0..probs.cols() {
            let p = probs[(i, j)];
            if !(0.0..=1.0).contains(&p) {
                return Err(SampleError::ProbOutOfRange { row: i, col: j, value: p });
            }
        }
    }
    if symmetric {
        assert!(
            probs.is_symmetric_zero_diag(),
            "symmetric mode requires symmetric probs with zero diagonal"
        );
        let n = probs.rows();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let bit = if rng.random::<f64>() < probs[(i, j)] { 1.0 } else { 0.0 };
                out[(i, j)] = bit;
                out[(j, i)] = bit;
            }
        }
        Ok(out)
    } else {
        let mut out = Matrix::zeros(probs.rows(), probs.cols());
        for i in 0..probs.rows() {
            for j in 0..probs.cols() {
                out[(i, j)] = if rng.random::<f64>() < probs[(i, j)] { 1.0 } else { 0.0 };
            }
        }
        Ok(out)
    }
}

/// I.i.d. normal entries with the given mean and standard deviation.
pub fn sample_gaussian_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    mean: f64,
    std: f64,
) -> Matrix {
    assert!(std >= 0.0, "negative std");
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        mean + std * z
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let root = StreamRng::new(7);
        let a: f64 = root.stream("x", 0).random();
        let b: f64 = root.stream("x", 0).random();
        let c: f64 = root.stream("x", 1).random();
        let d: f64 = root.stream("y", 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn bernoulli_degenerate_probs() {
        let root = StreamRng::new(1);
        let zeros = Matrix::zeros(4, 4);
        let out = sample_bernoulli_matrix(&mut root.stream("b", 0), &zeros, true).unwrap();
        assert_eq!(out, Matrix::zeros(4, 4));

        let ones = Matrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { 1.0 });
        let out = sample_bernoulli_matrix(&mut root.stream("b", 1), &ones, true).unwrap();
        assert_eq!(out, ones);
    }

    #[test]
    fn bernoulli_rejects_bad_prob() {
        let root = StreamRng::new(1);
        let bad = Matrix::filled(1, 1, 1.5);
        assert!(sample_bernoulli_matrix(&mut root.stream("b", 0), &bad, false).is_err());
    }

    #[test]
    fn bernoulli_empirical_mean() {
        // 10,000 draws of a 1x1 matrix at p=0.3: within 3*sqrt(0.21/10000).
        let root = StreamRng::new(99);
        let probs = Matrix::filled(1, 1, 0.3);
        let mut rng = root.stream("bern-mean", 0);
        let mut sum = 0.0;
        for _ in 0..10_000 {
            sum += sample_bernoulli_matrix(&mut rng, &probs, false).unwrap()[(0, 0)];
        }
        let mean = sum / 10_000.0;
        let bound = 3.0 * (0.3f64 * 0.7 / 10_000.0).sqrt();
        assert!((mean - 0.3).abs() < bound, "mean {mean} not within {bound} of 0.3");
    }

    #[test]
    fn gaussian_zero_std_is_constant() {
        let root = StreamRng::new(3);
        let m = sample_gaussian_matrix(&mut root.stream("g", 0), 3, 2, 1.5, 0.0);
        assert_eq!(m, Matrix::filled(3, 2, 1.5));
    }

    #[test]
    fn gaussian_sample_mean_clt() {
        let root = StreamRng::new(5);
        let m = sample_gaussian_matrix(&mut root.stream("g", 1), 100, 100, 0.0, 1.0);
        let mean = m.sum() / 10_000.0;
        assert!(mean.abs() < 0.03, "sample mean {mean} too far from 0");
    }

    #[test]
    fn gaussian_repeatable_across_runs() {
        let root = StreamRng::new(11);
        let a = sample_gaussian_matrix(&mut root.stream("fix", 42), 4, 4, 0.0, 1.0);
        let b = sample_gaussian_matrix(&mut root.stream("fix", 42), 4, 4, 0.0, 1.0);
        assert_eq!(a, b);
    }
}

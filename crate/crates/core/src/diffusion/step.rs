//! Forward sampling and the closed-form posterior.

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::schedule::NoiseSchedule;
use crate::numeric::{sample_bernoulli_matrix, Matrix};

#[derive(Debug, Error)]
pub enum PosteriorError {
    #[error(
        "impossible conditioning pair: q(a_t={a_t}, a_0={a_0}) has probability zero at t={t} \
         (caller bug)"
    )]
    ImpossiblePair { a_t: u8, a_0: u8, t: usize },
}

/// One forward step: per edge i<j, Bernoulli((1−β_t)·A_prev + β_t·p),
/// mirrored.
pub fn q_sample_step(
    a_prev: &Matrix,
    t: usize,
    sched: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
) -> Matrix {
    debug_assert!(a_prev.is_symmetric_zero_diag());
    let beta = sched.beta(t);
    let p = sched.base_rate();
    let probs = Matrix::from_fn(a_prev.rows(), a_prev.cols(), |i, j| {
        if i == j {
            0.0
        } else {
            (1.0 - beta) * a_prev[(i, j)] + beta * p
        }
    });
    sample_bernoulli_matrix(rng, &probs, true).expect("probs in range by construction")
}

/// Closed-form jump: per edge, Bernoulli(ᾱ_t·A0 + (1−ᾱ_t)·p).
///
/// `t = 0` returns A0 itself (ᾱ_0 = 1).
pub fn q_sample_closed(
    a0: &Matrix,
    t: usize,
    sched: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
) -> Matrix {
    debug_assert!(a0.is_symmetric_zero_diag());
    if t == 0 {
        return a0.clone();
    }
    let ab = sched.alpha_bar(t);
    let p = sched.base_rate();
    let probs = Matrix::from_fn(a0.rows(), a0.cols(), |i, j| {
        if i == j {
            0.0
        } else {
            ab * a0[(i, j)] + (1.0 - ab) * p
        }
    });
    sample_bernoulli_matrix(rng, &probs, true).expect("probs in range by construction")
}

/// Closed-form posterior q(A^{t−1}=1 | A^t=a_t, A^0=a_0) for one edge:
/// the Bayes combination q(a_t|a_{t−1})·q(a_{t−1}|a_0)/q(a_t|a_0) for
/// general p. A probability-zero conditioning pair is a caller bug.
pub fn posterior_prob(
    a_t: bool,
    a_0: bool,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<f64, PosteriorError> {
    assert!((1..=sched.len()).contains(&t), "t outside [1,T]");
    let beta = sched.beta(t);
    let p = sched.base_rate();
    // prob a_{t-1} = 1 given a_0, from the closed-form marginal at t−1
    let ab_prev = sched.alpha_bar(t - 1);
    let nu = if a_0 { ab_prev + (1.0 - ab_prev) * p } else { (1.0 - ab_prev) * p };
    // step likelihoods q(a_t | a_{t-1} = b)
    let mu1 = (1.0 - beta) + beta * p;
    let mu0 = beta * p;
    let like = |mu: f64| if a_t { mu } else { 1.0 - mu };
    let num = like(mu1) * nu;
    let den = num + like(mu0) * (1.0 - nu);
    if den == 0.0 {
        return Err(PosteriorError::ImpossiblePair {
            a_t: a_t as u8,
            a_0: a_0 as u8,
            t,
        });
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::StreamRng;

    fn sym(m: usize, edges: &[(usize, usize)]) -> Matrix {
        let mut a = Matrix::zeros(m, m);
        for &(i, j) in edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    #[test]
    fn zero_beta_is_identity() {
        let sched = NoiseSchedule::from_betas(vec![0.0], 0.0).unwrap();
        let a = sym(4, &[(0, 1), (2, 3)]);
        let root = StreamRng::new(1);
        let out = q_sample_step(&a, 1, &sched, &mut root.stream("s", 0));
        assert_eq!(out, a);
    }

    #[test]
    fn full_beta_at_zero_rate_empties() {
        let sched = NoiseSchedule::from_betas(vec![1.0], 0.0).unwrap();
        let a = sym(4, &[(0, 1), (1, 2), (2, 3)]);
        let root = StreamRng::new(1);
        let out = q_sample_step(&a, 1, &sched, &mut root.stream("s", 1));
        assert_eq!(out, Matrix::zeros(4, 4));
    }

    #[test]
    fn half_beta_empirical_frequency() {
        // β=0.5, p=0, all-ones (m=2): edge survives with prob 0.5
        let sched = NoiseSchedule::from_betas(vec![0.5], 0.0).unwrap();
        let a = sym(2, &[(0, 1)]);
        let root = StreamRng::new(5);
        let mut rng = root.stream("freq", 0);
        let mut kept = 0.0;
        let n = 10_000;
        for _ in 0..n {
            kept += q_sample_step(&a, 1, &sched, &mut rng)[(0, 1)];
        }
        let freq = kept / n as f64;
        let se = (0.25f64 / n as f64).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn absent_edge_stays_absent_at_zero_rate() {
        // absorbing property of p=0, exhaustive over seeds
        let sched = NoiseSchedule::from_betas(vec![0.3, 0.5, 0.9], 0.0).unwrap();
        let a = sym(3, &[(0, 1)]); // (0,2) and (1,2) absent
        for seed in 0..200 {
            let root = StreamRng::new(seed);
            let mut rng = root.stream("abs", 0);
            for t in 1..=3 {
                let out = q_sample_closed(&a, t, &sched, &mut rng);
                assert_eq!(out[(0, 2)], 0.0);
                assert_eq!(out[(1, 2)], 0.0);
            }
        }
    }

    #[test]
    fn closed_form_quarter_marginal() {
        // ᾱ_2 = 0.25 via β=[0.5,0.5]; present edge stays with prob 0.25
        let sched = NoiseSchedule::from_betas(vec![0.5, 0.5], 0.0).unwrap();
        assert!((sched.alpha_bar(2) - 0.25).abs() < 1e-15);
        let a = sym(2, &[(0, 1)]);
        let root = StreamRng::new(9);
        let mut rng = root.stream("marg", 0);
        let n = 20_000;
        let mut kept = 0.0;
        for _ in 0..n {
            kept += q_sample_closed(&a, 2, &sched, &mut rng)[(0, 1)];
        }
        let freq = kept / n as f64;
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((freq - 0.25).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn posterior_present_edge_with_zero_rate_is_certain() {
        let sched = NoiseSchedule::from_betas(vec![0.3, 0.6, 0.2], 0.0).unwrap();
        for t in 1..=3 {
            assert_eq!(posterior_prob(true, true, t, &sched).unwrap(), 1.0);
        }
    }

    #[test]
    fn posterior_hand_computed_third() {
        // β=0.5 ∀t, t=2: ᾱ_1=0.5, ᾱ_2=0.25; (a_t=0, a_0=1) → β·ᾱ_1/(1−ᾱ_2) = 1/3
        let sched = NoiseSchedule::from_betas(vec![0.5, 0.5], 0.0).unwrap();
        let p = posterior_prob(false, true, 2, &sched).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn posterior_zero_rate_impossible_pair() {
        let sched = NoiseSchedule::from_betas(vec![0.5, 0.5], 0.0).unwrap();
        assert!(posterior_prob(true, false, 2, &sched).is_err());
    }

    #[test]
    fn posterior_zero_rate_from_absent_origin() {
        let sched = NoiseSchedule::from_betas(vec![0.5, 0.5], 0.0).unwrap();
        assert_eq!(posterior_prob(false, false, 2, &sched).unwrap(), 0.0);
    }

    /// Independent 2-state enumeration: weight each a_{t−1} ∈ {0,1} by
    /// marginal × step likelihood computed from raw schedule numbers.
    fn posterior_enumeration(a_t: bool, a_0: bool, t: usize, sched: &NoiseSchedule) -> Option<f64> {
        let p = sched.base_rate();
        let step = |prev: f64, cur: bool| -> f64 {
            let mu = (1.0 - sched.beta(t)) * prev + sched.beta(t) * p;
            if cur {
                mu
            } else {
                1.0 - mu
            }
        };
        let marg_prev = |bit: f64| -> f64 {
            let ab = sched.alpha_bar(t - 1);
            let mu = ab * (a_0 as u8 as f64) + (1.0 - ab) * p;
            if bit == 1.0 {
                mu
            } else {
                1.0 - mu
            }
        };
        let w1 = marg_prev(1.0) * step(1.0, a_t);
        let w0 = marg_prev(0.0) * step(0.0, a_t);
        if w0 + w1 == 0.0 {
            None
        } else {
            Some(w1 / (w0 + w1))
        }
    }

    #[test]
    fn posterior_matches_enumeration_for_general_p() {
        for &p in &[0.0, 0.1, 0.5] {
            let sched = make_sched(p);
            for t in 1..=sched.len() {
                for a_t in [false, true] {
                    for a_0 in [false, true] {
                        let oracle = posterior_enumeration(a_t, a_0, t, &sched);
                        let got = posterior_prob(a_t, a_0, t, &sched).ok();
                        match (oracle, got) {
                            (Some(o), Some(g)) => {
                                assert!((o - g).abs() <= 1e-12, "p={p} t={t} {a_t}/{a_0}: {o} vs {g}")
                            }
                            (None, None) => {}
                            other => panic!("oracle/impl disagree on possibility: {other:?}"),
                        }
                    }
                }
            }
        }
    }

    fn make_sched(p: f64) -> NoiseSchedule {
        let betas: Vec<f64> = (0..16).map(|i| 0.05 + 0.9 * i as f64 / 15.0).collect();
        NoiseSchedule::from_betas(betas, p).unwrap()
    }

    #[test]
    fn chain_vs_closed_marginal_consistency() {
        // sequential steps 1..t vs closed form: matching per-edge frequency
        let sched = NoiseSchedule::from_betas(vec![0.2, 0.3, 0.25, 0.4], 0.1).unwrap();
        let a0 = sym(3, &[(0, 1), (1, 2)]);
        let root = StreamRng::new(33);
        let trials = 4000;
        for target_t in [1usize, 2, 4] {
            let mut chain_freq = 0.0;
            let mut closed_freq = 0.0;
            let mut rng_chain = root.stream("chain", target_t as u64);
            let mut rng_closed = root.stream("closed", target_t as u64);
            for _ in 0..trials {
                let mut a = a0.clone();
                for t in 1..=target_t {
                    a = q_sample_step(&a, t, &sched, &mut rng_chain);
                }
                chain_freq += a[(0, 1)];
                closed_freq += q_sample_closed(&a0, target_t, &sched, &mut rng_closed)[(0, 1)];
            }
            let p_true = sched.alpha_bar(target_t) + (1.0 - sched.alpha_bar(target_t)) * 0.1;
            let se = (p_true * (1.0 - p_true) / trials as f64).sqrt();
            let chain_freq = chain_freq / trials as f64;
            let closed_freq = closed_freq / trials as f64;
            assert!((chain_freq - p_true).abs() < 4.0 * se, "chain t={target_t}: {chain_freq} vs {p_true}");
            assert!((closed_freq - p_true).abs() < 4.0 * se, "closed t={target_t}: {closed_freq} vs {p_true}");
        }
    }
}

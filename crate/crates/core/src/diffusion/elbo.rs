//! ELBO diagnostics: reconstruction, prior-matching, and consistency terms.
//!
//! Training uses the simpler one-step likelihood; these Monte-Carlo
//! estimates exist to inspect what that objective implies for the ELBO.
//! All Bernoulli parameters are clamped to [1e-6, 1−1e-6] so every log and
//! KL stays finite (the p=0 prior is degenerate), and the prior term
//! carries no θ-gradient by construction.

use rand_chacha::ChaCha8Rng;

use super::denoiser::{denoise_probs, EDGE_PROB_CLAMP};
use super::schedule::NoiseSchedule;
use super::step::{posterior_prob, q_sample_closed};
use super::train::DiffusionModel;
use crate::numeric::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    /// E_q[−log p_θ(A^0 | A^1, h^g)].
    pub reconstruction: f64,
    /// KL(q(A^T | A^0) ‖ p(A^T)); analytic, no Monte-Carlo noise.
    pub prior: f64,
    /// Σ_{t≥2} E_q[KL(q(A^{t−1}|A^t,A^0) ‖ p_θ(A^{t−1}|A^t))].
    pub consistency: f64,
}

fn clamp(p: f64) -> f64 {
    p.clamp(EDGE_PROB_CLAMP, 1.0 - EDGE_PROB_CLAMP)
}

/// Two-point KL(Bern(q) ‖ Bern(r)) with both parameters clamped.
fn kl2(q: f64, r: f64) -> f64 {
    let q = clamp(q);
    let r = clamp(r);
    q * (q / r).ln() + (1.0 - q) * ((1.0 - q) / (1.0 - r)).ln()
}

/// −log Bern(target; p) with p clamped.
fn nll(p: f64, target: f64) -> f64 {
    let p = clamp(p);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Monte-Carlo ELBO terms for a clean adjacency `a0` under guidance `h_g`.
pub fn elbo_terms(
    a0: &Matrix,
    h_g: &Matrix,
    model: &DiffusionModel,
    sched: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
    n_mc: usize,
) -> ElboTerms {
    assert!(n_mc >= 1, "need at least one Monte-Carlo sample");
    let m = a0.rows();
    let t_max = sched.len();
    let p = sched.base_rate();

    // reconstruction: A^1 ~ q(·|A^0), score −log p_θ(A^0 | A^1)
    let mut reconstruction = 0.0;
    for _ in 0..n_mc {
        let a1 = q_sample_closed(a0, 1, sched, rng);
        let probs = denoise_probs(&model.store, &model.denoiser_cfg, &a1, 1, h_g);
        for i in 0..m {
            for j in (i + 1)..m {
                reconstruction += nll(probs.prob(i, j), a0[(i, j)]);
            }
        }
    }
    reconstruction /= n_mc as f64;

    // prior: exact per-edge KL between q(A^T|A^0) and B(p)
    let ab_t = sched.alpha_bar(t_max);
    let mut prior = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let q_t = ab_t * a0[(i, j)] + (1.0 - ab_t) * p;
            prior += kl2(q_t, p);
        }
    }

    // consistency: for t ≥ 2, A^t ~ q(·|A^0), per-edge KL(posterior ‖ p_θ)
    let mut consistency = 0.0;
    for t in 2..=t_max {
        let mut term = 0.0;
        for _ in 0..n_mc {
            let a_t = q_sample_closed(a0, t, sched, rng);
            let probs = denoise_probs(&model.store, &model.denoiser_cfg, &a_t, t, h_g);
            for i in 0..m {
                for j in (i + 1)..m {
                    let q_star =
                        posterior_prob(a_t[(i, j)] != 0.0, a0[(i, j)] != 0.0, t, sched)
                            .expect("sampled pair is always possible");
                    term += kl2(q_star, probs.prob(i, j));
                }
            }
        }
        consistency += term / n_mc as f64;
    }

    ElboTerms { reconstruction, prior, consistency }
}

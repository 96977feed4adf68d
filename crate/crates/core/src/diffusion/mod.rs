//! Discrete Bernoulli diffusion over symmetric binary adjacency matrices.
//!
//! Forward process: each edge independently resamples with probability β_t
//! toward base rate p, giving the closed-form marginal
//! q(A^t | A^0) = B(ᾱ_t·A^0 + (1−ᾱ_t)·p) and a closed-form posterior that
//! the conditional denoiser is trained against.

mod denoiser;
mod elbo;
mod generate;
mod schedule;
mod step;
mod train;

pub use denoiser::{
    denoise_probs, sample_dropout_masks, time_embedding, DenoiserConfig, EdgeProbMatrix,
};
pub use elbo::{elbo_terms, ElboTerms};
pub use generate::{assemble_ego, generate_adjacency, generated_ego_to_json, reverse_chain};
pub use schedule::{make_linear_schedule, NoiseSchedule, ScheduleError};
pub use step::{posterior_prob, q_sample_closed, q_sample_step, PosteriorError};
pub use train::{diffusion_loss_on_tape, diffusion_train_step, DiffusionModel, TrainStepOutcome};

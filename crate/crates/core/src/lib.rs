//! Balanced anomaly-guided ego-graph diffusion (BAED) for inductive graph
//! anomaly detection.
//!
//! The crate is organized around the stages of the pipeline:
//!
//! - [`numeric`] — dense f64 matrices, seeded named-stream randomness, a
//!   reverse-mode tape over dense kernels, Adam, and a finite-difference
//!   gradient checker.
//! - [`graph`] — attributed graphs, ego-graph extraction, dataset ingestion,
//!   the synthetic planted-clique benchmark, and stratified splits.
//! - [`detector`] — the inductive detector: stacked graph convolutions,
//!   layer aggregation, deviation readout, and an MLP discriminator.
//! - [`guidance`] — the GIN guidance encoder plus curriculum weighting and
//!   embedding aggregation.
//! - [`diffusion`] — discrete Bernoulli diffusion over symmetric binary
//!   adjacency matrices: schedules, forward/posterior closed forms, the
//!   conditional denoiser, training, ELBO diagnostics, and guided generation.
//! - [`trainer`] — the balanced training loop that synthesizes anomalous
//!   ego-graphs to even out each batch.
//! - [`eval`] — AUROC/AUPRC/F1 and the linear-fractional metric theory with
//!   a brute-force verifier.

pub mod detector;
pub mod diffusion;
pub mod eval;
pub mod graph;
pub mod guidance;
pub mod numeric;
pub mod trainer;

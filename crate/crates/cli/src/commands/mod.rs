pub mod analysis;
pub mod data;
pub mod detector;
pub mod diffusion;

//! Unsupervised discovery of lexical tone categories from per-syllable
//! pitch contours: F0 extraction, a small convolutional autoencoder with a
//! 2-D latent space, mean shift clustering, and NMI evaluation against tone
//! labels.

pub mod autoencoder;
pub mod cluster;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod nn;
pub mod pipeline;
pub mod pitch;
pub mod svg;
pub mod synth;

pub use error::{Error, Result};

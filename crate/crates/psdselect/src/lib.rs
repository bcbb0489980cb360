//! Model selection workbench for image deconvolution under circulant
//! Gaussian priors.
//!
//! The pipeline: synthesize blurred noisy images from a chosen model
//! (`synth`), sample the per-model posterior over image and precisions
//! with a Fourier-domain Gibbs sampler (`gibbs`), turn chains into
//! marginal-likelihood estimates and posterior model probabilities
//! (`evidence`), and cross-check everything against brute-force
//! references (`oracle`). `bench` drives the confusion-matrix experiment
//! and `cli` exposes the lot as commands.

pub mod bench;
pub mod cli;
pub mod error;
pub mod evidence;
pub mod gibbs;
pub mod io;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod psd;
pub mod seed;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};

//! Universal sparse models.
//!
//! Sparse coding and dictionary learning with regularizers derived from
//! universal codes for Laplacian coefficients:
//!
//! | Model | Density (symmetric) | Regularizer ψ(t) |
//! |-------|---------------------|------------------|
//! | Laplacian | (θ/2)·e^{−θ\|a\|} | t |
//! | MOE | ½κβ^κ(\|a\|+β)^{−(κ+1)} | log(t+β) |
//! | JOE | (e^{−θ₁\|a\|} − e^{−θ₂\|a\|}) / (2\|a\| ln(θ₂/θ₁)) | log t − log(e^{−θ₁t} − e^{−θ₂t}) |
//!
//! CMOE is an MOE whose parameters are read off the first few samples.
//!
//! Non-convex regularizers are handled by local linear approximation: each
//! round solves a weighted-ℓ1 problem with weights λ·ψ′(|a_k|) taken at the
//! previous iterate.
//!
//! The numeric core is generic over the scalar type ([`Scalar`], implemented
//! for `f32` and `f64`); the aliases at the crate root fix it to one of them.
//!
//! ## Modules
//!
//! - [`model`]: matrices, USM/CSV/PGM files, patch extraction and PSNR.
//! - [`priors`]: densities, regularizers, moments and parameter fits.
//! - [`coder`]: thresholding, weighted-ℓ1, LLA, constrained coding, OMP.
//! - [`dictlearn`]: alternate minimization with an incoherence penalty.
//! - [`empirics`]: quantized histograms, KLD, codelengths and regret in bits.
//! - [`experiments`]: support recovery, patch denoising, MAP classification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coder;
pub mod dictlearn;
pub mod empirics;
mod error;
pub mod experiments;
mod linalg;
pub mod model;
pub mod priors;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use coder::{CodeOptions, CodeResult};
pub use model::{ActiveSet, CoeffMatrix, Dictionary, Image, PatchGeometry, SampleMatrix};
pub use priors::{JoeParams, LaplacianParams, MoeParams, PriorModel};

pub type SampleMatrix64 = SampleMatrix<f64>;
pub type SampleMatrix32 = SampleMatrix<f32>;
pub type Dictionary64 = Dictionary<f64>;
pub type Dictionary32 = Dictionary<f32>;
pub type CoeffMatrix64 = CoeffMatrix<f64>;
pub type CoeffMatrix32 = CoeffMatrix<f32>;
pub type PriorModel64 = PriorModel<f64>;
pub type PriorModel32 = PriorModel<f32>;
pub type MoeParams64 = MoeParams<f64>;
pub type JoeParams64 = JoeParams<f64>;
pub type CodeOptions64 = CodeOptions<f64>;
pub type CodeResult64 = CodeResult<f64>;

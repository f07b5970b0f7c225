//! Low-frequency filtering for domain adaptation, end to end.
//!
//! Images and feature maps decompose into a low-frequency part that carries
//! shape and a high-frequency part that carries fine detail and texture.
//! When two datasets share classes but differ in style, the low band tends
//! to transfer while the high band tends to mislead. This crate builds the
//! machinery to study that effect at desk scale:
//!
//! - [`spectral`] — 2D DFT/IDFT (direct reference path plus a validated
//!   radix-2 fast path), circular spectral filtering and radial band energy
//!   reports.
//! - [`filters`] — the truncated discrete Gaussian kernel, same-size 2D
//!   convolution with zero/reflect/circular padding and stride, low-pass and
//!   high-pass image filtering.
//! - [`lfm`] — the fixed (non-learnable) Gaussian blur as a network
//!   operator with an exact backward pass, and the two wiring strategies:
//!   insert-before-pooling and replace-strided-convolutions.
//! - [`nn`] — a small CNN with exact backpropagation, source-only training
//!   and evaluation.
//! - [`discrepancy`] — maximum mean discrepancy between two samples, the
//!   scalar domain-gap meter.
//! - [`synthdata`] — a deterministic two-domain shape/texture dataset
//!   generator that makes the frequency split true by construction.
//! - [`tensorio`] — bit-exact PGM, tensor and checkpoint file formats.
//! - [`cli`] — the `lfm` command-line tool built from the pieces above.
//!
//! The `examples/` directory demonstrates each capability as a runnable
//! program; start with `filter_image` and `ablation_grid`.

pub mod cli;
pub mod discrepancy;
pub mod error;
pub mod filters;
pub mod image;
pub mod lfm;
pub mod nn;
pub mod rng;
pub mod spectral;
pub mod synthdata;
pub mod tensor;
pub mod tensorio;

pub use error::{Error, Result};
pub use image::Image;
pub use tensor::{Scalar, Tensor};

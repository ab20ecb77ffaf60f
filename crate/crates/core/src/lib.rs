//! Reduced-order surrogates for one-parameter families of complex chirps.
//!
//! The pipeline runs: [`waveform`] training sets, a greedy reduced basis
//! ([`rom`]), empirical interpolation ([`eim`]), latent-structure analysis
//! ([`latent`]), and coefficient regressors with an optional learnable
//! spiral input layer ([`spiral`], [`nnet`], [`surrogate`]). Artifacts
//! persist through the self-describing container in [`io`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod eim;
pub mod error;
pub mod io;
pub mod latent;
pub mod matrix;
pub mod nnet;
pub mod rom;
pub mod spiral;
pub mod surrogate;
pub mod waveform;

pub use error::{Error, Result};

/// Library version recorded in every artifact and provenance record.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

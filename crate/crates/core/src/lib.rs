//! Mondrian random forest regression with pointwise statistical inference.
//!
//! A Mondrian random forest averages axis-aligned regression trees whose
//! partitions are drawn from the Mondrian process `M([0,1]^d, lambda)`,
//! independently of the data. Because the partitions are data-independent,
//! the estimator is a linear smoother with tractable bias and variance,
//! which this crate exploits to provide:
//!
//! - exact sampling of Mondrian trees and forests ([`process`], [`forest`]);
//! - generalized-jackknife debiasing across a ladder of lifetimes
//!   ([`debias`]);
//! - variance estimation and asymptotically valid confidence intervals
//!   ([`variance`]);
//! - closed-form evaluation of the limiting variance and leading bias, so
//!   simulations can be checked against theory ([`theory`]);
//! - data-driven lifetime selection: AIMSE plug-in, leave-one-out CV, and
//!   GCV, plus forest-size rules ([`tuning`]).
//!
//! The crate is `no_std` (with `alloc`); all floating-point special
//! functions go through `libm` so results are bit-reproducible across
//! platforms. Randomness is ChaCha8 with per-(replicate, level, tree)
//! substreams derived from a single master seed, so fits are reproducible
//! under any parallel schedule. IO, data generation, and the command-line
//! interface live in the companion `mondrian-rf-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cell;
pub mod debias;
pub mod error;
mod fmath;
pub mod forest;
mod linalg;
pub mod process;
pub mod rng;
pub mod theory;
pub mod tuning;
pub mod variance;

pub use cell::Cell;
pub use debias::{DebiasConfig, DebiasedForest};
pub use error::Error;
pub use forest::{Forest, TrainingSet};
pub use process::MondrianTree;
pub use rng::RngStream;
pub use theory::LocalModel;
pub use tuning::{CvMethod, TuneMethod, TuneReport};
pub use variance::InferenceResult;

/// Crate-wide result type.
pub type Result<T> = core::result::Result<T, Error>;

//! Moment-preserving distribution descriptors.
//!
//! A point set in `R^d` is projected onto `L` directions on the unit sphere,
//! a `K`-component univariate Gaussian mixture is fitted to every projection,
//! and the canonically ordered per-slice parameters form a fixed-size
//! descriptor of `3·K·L` numbers. Because every slice of a Gaussian mixture is
//! again a Gaussian mixture with closed-form moments, the degree-`k`
//! multivariate moments of the underlying measure can be recovered from the
//! descriptor by a linear least-squares solve.
//!
//! Module map:
//!
//! * [`momentindex`]: multi-indices, multinomial coefficients, canonical order.
//! * [`model`]: point sets, Gaussian mixtures, sampling, file formats.
//! * [`moments`]: exact and empirical moments, Hankel and Carleman diagnostics.
//! * [`slicing`]: directions on the sphere, projections, collision scores.
//! * [`gmm1d`]: univariate EM fitting.
//! * [`reconstruct`]: design matrices, moment recovery, rate study.
//! * [`descriptor`]: the descriptor pipeline and baseline poolings.
//! * [`bench`](mod@bench): synthetic set-classification benchmark.
//! * [`cli`]: the `emperor` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod descriptor;
pub mod error;
pub mod gmm1d;
pub mod model;
pub mod momentindex;
pub mod moments;
pub mod reconstruct;
pub mod rng;
pub mod slicing;
mod util;

pub use descriptor::{emperor_descriptor, Descriptor, DescriptorConfig};
pub use error::{Error, Result};
pub use model::{MultivariateGmm, PointSet, UnivariateGmm};

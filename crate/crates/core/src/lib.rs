//! `comminfo-core`: common-information quantities and their relatives for
//! finite-alphabet and bivariate Gaussian sources.
//!
//! The crate is organized around the pipeline the quantities themselves form:
//!
//! - [`prob`] — pmfs, joint pmfs, named sources (DSBS, SBES, Gaussian pair),
//!   entropies, divergences, binary helpers;
//! - [`coupling`] — optimization over the transportation polytope: maximal
//!   (mixed) cross entropies, minimal relative entropy, minimal chi-square,
//!   maximal and guessing couplings;
//! - [`ci`] — Wyner, Rényi, exact, and GKW common information: closed forms
//!   and multi-start numeric optimizers over Markov decompositions;
//! - [`synthesis`] — channel-synthesis rate regions and a finite-blocklength
//!   soft-covering simulator;
//! - [`nnrank`] — exact nonnegative rank for small matrices and the
//!   nonnegative alpha-rank bridge to common entropy;
//! - [`boolfn`] — Boolean-function analysis on the hypercube: Walsh spectra,
//!   influences, noise stability, NICD brute force;
//! - [`exponents`] — large/moderate-deviations exponents, Gaussian copula and
//!   stability functions, discrete convex envelopes;
//! - [`funcineq`] — hypercontractivity regions, Brascamp-Lieb exponents,
//!   log-Sobolev functions, and the strengthened hypercontractivity ODE.

pub mod boolfn;
pub mod ci;
pub mod coupling;
pub mod error;
pub mod exponents;
pub mod funcineq;
pub mod nnrank;
pub mod numeric;
pub mod prob;
pub mod synthesis;

pub use error::{Error, Result};
pub use prob::{DsbsParams, GaussianPair, JointPmf, Pmf, SbesParams};

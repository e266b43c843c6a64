//! Splitting Gibbs measures of the mixed-spin Ising-Potts model on Cayley trees.
//!
//! The crate has four layers:
//!
//! - [`polyroot`]: exact univariate polynomial arithmetic over the rationals,
//!   Sturm chains, Descartes bounds and bisection root isolation.
//! - [`model`]: model parameters, finite tree slices, the Hamiltonian, exact
//!   finite-volume measures and the brute-force compatibility oracle.
//! - [`boundary`]: the boundary-law operator, propagation of fields on finite
//!   trees and fixed-point iteration.
//! - [`tigm`]: translation-invariant fixed points, root counting of the
//!   reduced polynomial systems and phase classification.

pub mod boundary;
pub mod model;
pub mod polyroot;
pub mod tigm;

pub mod cli;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("the zero polynomial is not a valid input here")]
    ZeroPolynomial,
    #[error("division by the zero polynomial")]
    ZeroDivisor,
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("boundary field entries must be strictly positive")]
    NonpositiveField,
    #[error("missing boundary field on vertex {0}")]
    MissingField(usize),
    #[error("configuration does not match the tree slice")]
    ConfigMismatch,
    #[error("enumeration size limit exceeded ({0} configurations)")]
    SizeLimit(u128),
    #[error("empty list of child fields")]
    EmptyChildren,
    #[error("invalid range: {0}")]
    InvalidRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Pricing of American-style contracts in nonlinear markets on finite event trees.
//!
//! The issuer and holder prices are the initial values of reflected BSDEs with
//! a lower and an upper obstacle. Every solver is generic over [`Scalar`], so
//! the same code runs in `f64` or in exact rationals, and the [`oracle`] module
//! re-derives each answer by brute force.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod evaluation;
pub mod generators;
pub mod lattice;
pub mod linalg;
pub mod oracle;
pub mod pricing;
pub mod reflected;
pub mod scalar;

pub use error::{Error, Result};
pub use lattice::{Adapted, EventTree, NodeId, Predictable, StoppingTime};
pub use scalar::{Rational, Scalar};

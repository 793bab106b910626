//! Quantized-motion Jaynes–Cummings dynamics.
//!
//! A two-level atom with quantized centre-of-mass motion along `z` couples to a
//! single cavity mode through a position-dependent strength `g(ẑ)`. The crate
//! builds the interaction-picture Hamiltonian on a truncated
//! spin ⊗ CM ⊗ field space and propagates it three ways:
//!
//! * [`dynamics::propagate_oracle`]: brute-force spectral exponentiation of the
//!   full matrix;
//! * [`dynamics::propagate_decomposed`]: the right-unitary (Susskind–Glogower)
//!   factorization, which splits the generator into independent field-Fock
//!   sectors;
//! * [`analytic`]: the closed-form generalized-squeezing propagator for
//!   quadratic couplings on resonance.

// `!(x > 0.0)` is used deliberately so that NaN is rejected alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod analytic;
pub mod config;
pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod observables;
pub mod runner;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

//! Radial laboratory for the focusing cubic Schrödinger equation with an
//! inverse-square potential in three dimensions,
//!
//! ```text
//! i ∂_t u = L_a u - |u|^2 u,     L_a = -Δ + a/|x|^2,   a > -1/4,
//! ```
//!
//! restricted to radial data. The crate computes ground states and sharp
//! Gagliardo-Nirenberg constants, the mass-energy and mass-kinetic thresholds
//! derived from them, time evolution with conservation and virial monitoring,
//! spectral (heat-semigroup) checks, and the scattering/blowup classifier.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod error;
pub mod evolution;
pub mod functionals;
pub mod grid;
pub mod ground_state;
pub mod io;
pub mod operator;
pub mod spectral;
pub mod tridiag;
pub mod virial;

pub use error::{Error, Result};
pub use functionals::{functionals_of, gn_quotient, Functionals};
pub use grid::{sigma_of, PotentialParam, RadialField, RadialGrid};
pub use operator::{assemble_operator, quadratic_form, QuadMode, RadialOperator};

//! Numerical laboratory for thin Dirichlet tubes around closed submanifolds.
//!
//! The pipeline runs from catalog geometry ([`geometry`]) through Fermi-coordinate
//! expansions and the effective potential ([`fermi`]), the unit-ball fiber spectrum
//! ([`ball`]), finite element forms on the unit tube ([`assembly`]) and a sparse
//! generalized eigensolver ([`eigen`]) to convergence studies ([`lab`]) and a
//! command line front end ([`cli`]).

pub mod assembly;
pub mod cli;
pub mod ball;
pub mod eigen;
pub mod error;
pub mod fermi;
pub mod geometry;
pub mod lab;

pub use error::{Error, Result};

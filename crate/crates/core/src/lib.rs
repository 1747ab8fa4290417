//! Radial critical points of zeta-regularized determinants on the round
//! four-sphere.

pub mod bubble;
pub mod disc;
pub mod error;
pub mod hamiltonian;
pub mod integrate;
pub mod linear;
pub mod model;
pub mod quad;
pub mod roots;
pub mod shooting;
pub mod verify;

pub use error::{Error, Result};

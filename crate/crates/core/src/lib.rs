//! Quantum metric structures on finite truncations of AF algebra towers.
//!
//! The crate builds inductive towers of finite-dimensional C*-algebras
//! (UHF, Effros-Shen and Cantor towers), their trace-preserving conditional
//! expectations and Lip-norms, Monge-Kantorovich distances between states,
//! and certified upper bounds on the quantum propinquity between towers.

pub mod algebra;
pub mod cantor;
pub mod cfrac;
pub mod error;
pub mod expectation;
pub mod linalg;
pub mod mk;
pub mod propinquity;
pub mod lipnorm;
pub mod random;
pub mod simplex;
pub mod spec;
pub mod sweep;
pub mod tower;
pub mod verify;

pub use error::{Error, Result};

//! Mixed displacement/pressure virtual elements for frictionless two-body contact.

pub mod assembly;
pub mod bench;
pub mod contact;
pub mod error;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod vem;

pub use error::{Result, VemError};

//! Krein-type resolvent formulas and scattering for the Laplacian in R^3
//! perturbed by a compactly supported potential and a singular interface.

pub mod error;
pub mod interface_models;
pub mod layer_ops;
pub mod linalg;
pub mod mesh;
pub mod operator_core;
pub mod oracle;
pub mod potential_ops;
pub mod quadrature;
pub mod smatrix;
pub mod special;

pub use error::{Error, Result};
pub use num_complex::Complex64 as c64;

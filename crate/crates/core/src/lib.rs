//! L1-stabilized mixed discontinuous Galerkin discretization of non-divergence
//! form elliptic equations, solved by an explicit fixed-point proximity iteration.

pub mod assembly;
pub mod dgspace;
pub mod error;
pub mod experiment;
pub mod fppa;
pub mod linalg;
pub mod mesh;
pub mod multiscale;
pub mod norms;
pub mod problems;

pub use error::{Error, Result};

//! Numerical laboratory for the scalar wave equation on slowly rotating Kerr
//! black holes: geometry, trapped null geodesics, separated radial and angular
//! problems, logarithmic-loss weight symbols with their Weyl quantization, and
//! the energy, local-energy and Strichartz norm framework.

pub mod angular;
pub mod error;
pub mod evolution;
pub mod geodesics;
pub mod geometry;
pub mod grid;
pub mod norms;
pub mod quad;
pub mod quantization;
pub mod radial;
pub mod smooth;
pub mod symbols;

pub use error::{Error, Result};
pub use geometry::BlackHoleParams;

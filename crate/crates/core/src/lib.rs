pub mod constants;
pub mod cutoff;
pub mod dual_sim;
pub mod error;
pub mod geometry;
pub mod moments;
pub mod output;
pub mod quadrature;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{Family, ManifoldSpec, RadialGeometry};

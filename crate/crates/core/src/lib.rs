//! Numerical laboratory for the Monge-Ampere obstacle problem and its
//! singular dual.

pub mod body;
pub mod cli;
pub mod convex;
pub mod cz;
pub mod dual;
pub mod error;
pub mod fit;
pub mod grid;
pub mod halfspace;
pub mod keldysh;
pub mod obstacle;
pub mod quad;
pub mod radial;
pub mod special;

pub use error::{Error, Result};
pub use grid::{AxisBox, ScalarGrid};

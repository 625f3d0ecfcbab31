//! Summation-by-parts solver for strongly anisotropic diffusion on curvilinear
//! multi-block grids, with a field-line-following parallel operator.

pub mod error;
pub mod fields;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod parallel;
pub mod perp;
pub mod sbp;
pub mod sbp2d;
pub mod solver;

pub use error::{Error, Result};
pub use sbp::SbpSet1D;
pub use sbp2d::{Sbp2D, Side};

pub mod assembly;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod mesh3d;
pub mod net1d;
pub mod postproc;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};

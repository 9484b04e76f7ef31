pub mod analysis;
pub mod basis;
pub mod dgd_ops;
pub mod error;
pub mod euler;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod residual;
pub mod sbp;
pub mod stencil;
pub mod timeint;

pub use error::{DgdError, Result};

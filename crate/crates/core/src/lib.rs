pub mod data;
pub mod dirichlet;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod loss;
pub mod net;
pub mod oracle;
pub mod seed;
pub mod specfun;

pub use error::{Error, Result};

pub mod als;
pub mod bspline;
pub mod error;
pub mod exec;
mod linalg;
pub mod model;
pub mod model_file;
pub mod synth;
pub mod tensor;

pub use error::{Result, TnbsError};
pub use exec::Execution;

//! Functional and timing simulation of a decoupled vector engine extended
//! with an indexed multiply-accumulate instruction, together with kernel
//! generators and a benchmark harness for structured-sparse x dense matrix
//! multiplication.

pub mod codegen;
pub mod error;
pub mod harness;
pub mod isa;
pub mod matrix;
pub mod timing;

pub use error::{Error, Result};

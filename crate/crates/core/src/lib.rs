pub mod assembly;
pub mod benchmarks;
pub mod dofmap;
pub mod error;
pub mod fem;
pub mod flow;
pub mod functional;
pub mod linalg;
pub mod mesh;
pub mod mms;
pub mod multipliers;
pub mod problem;
pub mod vi;

pub use error::{Error, Result};

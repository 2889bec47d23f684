pub mod engine;
pub mod error;
pub mod integration;
pub mod jet;
pub mod linalg;
pub mod poly;
pub mod polytope;
pub mod quadrature;
pub mod report;
pub mod summation;
pub mod symbols;
pub mod todd;

pub use error::{Error, ErrorCategory, Result};

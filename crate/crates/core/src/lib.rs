pub mod cfg;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod gnn;
pub mod model;
pub mod pcode;
pub mod synth;
pub mod trees;

pub use error::{Error, Result};

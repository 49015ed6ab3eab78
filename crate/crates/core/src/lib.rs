pub mod benchgen;
pub mod cad;
pub mod error;
pub mod fme;
pub mod formula;
pub mod graph;
pub mod ordering;
pub mod pace;
pub mod parse;
pub mod pipeline;
pub mod poly;
pub mod polyalg;
pub mod stats;
pub mod treedecomp;

pub use error::{Error, Result};

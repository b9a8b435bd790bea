pub mod cli;
pub mod graph;
pub mod linalg;
pub mod protocol;
pub mod regulator;
pub mod scenario;
pub mod sim;
pub mod systems;

pub use linalg::{DenseMatrix, Vector};

pub mod config;
pub mod error;
pub mod frame;
mod linalg;
pub mod outliers;
pub mod batch;
pub mod bench;
pub mod cli;
pub mod solver;
pub mod stiefel;
pub mod threshold;

pub mod error;
pub mod model;
pub mod solver;
pub mod flex;
pub mod market;
pub mod agents;
pub mod game;
pub mod scenario;
pub mod reporting;
pub mod cli;

pub use error::{Error, Result};

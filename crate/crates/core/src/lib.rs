pub mod config;
pub mod decode;
pub mod error;
pub mod geometry;
pub mod grasp;
pub mod mesh;
pub mod model;
pub mod pipeline;
pub mod render;
pub mod sim;

pub use error::{Error, Result};

pub mod attachment;
pub mod error;
pub mod gen;
pub mod geom;
pub mod pipeline;
pub mod report;
pub mod scoring;
pub mod segmentation;
pub mod sim;
pub mod superquadric;
pub mod taxonomy;

pub use error::{Error, Result};

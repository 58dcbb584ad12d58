pub mod coarse;
pub mod detect;
pub mod error;
pub mod eval;
pub mod fine;
pub mod phase;
pub mod pipeline;
pub mod raster;

pub use error::{Error, Result};

//! Per-sample channel model and capacity tools for the zero-dispersion
//! nonlinear optical fiber.

pub mod error;
pub mod quad;
pub mod special;
pub mod bounds;
pub mod capacity;
pub mod channel;
pub mod cli;
pub mod dmc;
pub mod presets;
pub mod samplers;
pub mod stats;

pub use channel::{FiberParams, PolarSample};
pub use error::{Error, Result};

pub mod analytic_bounds;
pub mod channel;
pub mod densities;
pub mod error;
pub mod fbl;
pub mod linalg;
pub mod mvn;
pub mod region;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};

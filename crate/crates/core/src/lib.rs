pub mod catalog;
pub mod derivatives;
pub mod error;
pub mod expectation;
pub mod functional;
pub mod martingale;
pub mod path;
pub mod quadrature;
pub mod rng;
pub mod semigroup;
pub mod source;

pub use error::{Error, Result};
pub use path::{concat_at_zero, Path, PathMetricValue, TimeGrid};

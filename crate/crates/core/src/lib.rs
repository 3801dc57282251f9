//! Instance-dependent uniform tail bounds for empirical processes indexed by
//! finite function classes, together with a seeded Monte Carlo harness that
//! checks every probabilistic guarantee empirically.

pub mod cgf;
pub mod chaining;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod linalg;
pub mod numeric;
pub mod orlicz;
pub mod verify;

pub use error::{Error, Result};

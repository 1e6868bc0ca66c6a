//! Subagging with cross-validated risk estimates, concentration bounds and
//! split selection.

pub mod bounds;
pub mod cv;
pub mod data;
pub mod error;
pub mod learners;
mod serde_ext;
pub mod sim;
pub mod split_select;
pub mod subagging;

pub use error::{Error, Result};

//! Beta-coalescent merger rates, small-time limits and an exact simulator.

pub mod bell;
pub mod error;
pub mod harness;
pub mod limits;
pub mod rates;
pub mod sim;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};

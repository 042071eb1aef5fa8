//! Smooth two-box vertical-mixing model with a `tanh` convective switch,
//! and its piecewise-smooth limit.

pub mod atlas;
pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod filippov;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod output;
pub mod periodic;
pub mod zone;

pub use error::{Error, Result};
pub use model::{ModelParams, State};

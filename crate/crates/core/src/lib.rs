pub mod dlr;
pub mod config;
pub mod error;
pub mod integrators;
pub mod io;
pub mod linalg;
pub mod models;
pub mod pipeline;
pub mod psd;
pub mod rom;
pub mod symplin;

pub use error::{Error, Result};

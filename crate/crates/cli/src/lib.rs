//! File formats, session store, command-line interface and HTTP service
//! for the elicit engine.

pub mod api;
pub mod commands;
pub mod data;
pub mod document;
pub mod error;
pub mod ops;
pub mod query;
pub mod store;

pub use document::{Model, ModelDocument};
pub use error::{CliError, Result};

//! Scene simulation, file formats, pipeline stages and the query service
//! around `flowmap-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod placement;
pub mod scene;
pub mod service;
pub mod simulate;

pub use error::{Error, Result};

//! Synthesis of GUI-grounding training records and bounding-box evaluation.

pub mod action;
pub mod dataset;
pub mod element;
pub mod error;
pub mod eval;
pub mod filter;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod office;
pub mod par;
pub mod pipeline;
pub mod provider;
pub mod seed;

pub use error::{Error, ErrorKind, Result};

//! Manifold NARX surrogate modelling.
//!
//! Polynomial NARX models are chained over an exogenous-input manifold that
//! grows stage by stage: raw inputs, optional DCT-reduced spatial fields,
//! direct transforms and the predictions of intermediate NARX models.
//!
//! The crate also ships a coupled spring-mass simulator used as ground
//! truth, validation metrics, file formats and an end-to-end benchmark.

pub mod basis;
pub mod bench;
pub mod dimreduce;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod lstsq;
pub mod manifold;
pub mod metrics;
pub mod narx;
pub mod series;
pub mod transform;

pub use error::{Error, Result};

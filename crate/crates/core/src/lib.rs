//! Identification and estimation of sparse causal effects in linear
//! instrumental-variable models.
//!
//! The crate is `no_std` (with `alloc`): it holds the model, graph,
//! identifiability and estimation logic plus the random-model generator used
//! by the benchmark. File formats, the command line and the parallel
//! benchmark runner live in the `spaceiv` crate.

#![no_std]

extern crate alloc;

pub mod bench;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod identifiability;
pub mod linalg;
pub mod model;
pub mod special;

pub use nalgebra;

pub use error::{Error, Result};
pub use estimators::{FitResult, StageEstimator, TestConfig};
pub use graph::{CausalGraph, GraphReport, Node};
pub use identifiability::IdentReport;
pub use model::{Dataset, MomentSystem, NoiseSpec, Scm};

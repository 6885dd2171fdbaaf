//! Lattice PDE datasets, patch tokenization, observability certificates and
//! linear world models.

pub mod dataset;
pub mod error;
pub mod grid;
pub mod lattice_ops;
pub mod observability;
pub mod learners;
pub mod random_fields;
pub mod rollout_metrics;
pub mod solvers;
pub mod spectral;
pub mod tokenizer;

pub use error::{Error, Result};

//! Phenotype extraction, HPO standardization and learning-to-rank
//! prioritization for clinical notes, with the evaluation harness used to
//! measure each stage.

pub mod annotations;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod io;
pub mod ontology;
pub mod ranking;
pub mod remote;
pub mod seed;
pub mod standardization;
pub mod text;

pub use error::{Error, ErrorClass, Result};

//! Diagnostic classification models treated as restricted latent class models.
//!
//! The crate covers the whole workflow: building response-probability tables
//! from DINA/DINO/NIDA/reduced NC-RUM/C-RUM/LCDM parameters
//! ([`models`]), checking sufficient identifiability conditions via T-matrix
//! ranks ([`identifiability`]), simulating data ([`simulate`]), fitting an
//! infinite stick-breaking mixture with a slice Gibbs sampler ([`sampler`]),
//! recovering per-item partial-information partitions, Q-matrices and
//! structural parameters ([`inference`]), and running replication studies
//! ([`harness`]).

pub mod cluster;
pub mod designs;
pub mod error;
pub mod harness;
pub mod identifiability;
pub mod inference;
pub mod linalg;
pub mod models;
pub mod sampler;
pub mod simulate;

pub use error::{Error, Result};

//! HNSW search with pluggable distance comparison operators.
//!
//! The search loop asks a [`Dco`] whether each candidate can beat the
//! current result-set threshold. Operators range from the exact baseline
//! through transformations with early abandoning, random projections,
//! product quantization and per-edge geometry; [`harness`] measures their
//! accuracy and pruning on a workload.

mod binio;
mod error;

pub mod data;
pub mod dco;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod projection;
pub mod quant;
pub mod transform;

pub use data::{GroundTruth, VectorSet};
pub use dco::{CompareOutcome, Dco, DcoKind, DcoModel, ExactDco, Family, QueryContext};
pub use error::{Error, Result};
pub use graph::{build_hnsw, BuildParams, GraphIndex, SearchOptions, SearchOutput, SearchStats};

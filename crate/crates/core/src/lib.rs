//! Workload-driven horizontal fragmentation of star-schema XML data
//! warehouses.
//!
//! The pipeline extracts selection predicates from a query workload, groups
//! them into fragment definitions (k-means clustering of the query-predicate
//! matrix, or the predicate-construction and affinity-based baselines),
//! materializes dimension and derived fact fragments, and measures query
//! cost over the fragmented warehouse.

pub mod clustering;
pub mod engine;
pub mod error;
pub mod eval;
pub mod fragmenter;
pub mod generator;
pub mod model;
pub mod predicate;
pub mod sat;
pub mod store;
pub mod strategies;
pub mod workload;
pub mod xml;

pub use error::{Error, Result};

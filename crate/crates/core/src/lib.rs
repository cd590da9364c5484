//! Guaranteed result intervals for SUM/COUNT/AVG queries over two tables
//! whose row linkage is only known up to a candidate set.
//!
//! The pipeline is: load a base and an augmenting [`tables::Relation`],
//! group augmenting rows into entity groups, build a
//! [`candidate::CandidateSet`] from a similarity test, then turn an
//! [`query::AggregateQuery`] into a capacity-constrained assignment problem
//! whose maximum and minimum give the interval.

pub mod assignment;
pub mod baselines;
pub mod candidate;
pub mod cli;
pub mod error;
pub mod eval;
pub mod exec;
pub mod query;
pub mod similarity;
pub mod synth;
pub mod tables;

pub use error::{Error, Result};

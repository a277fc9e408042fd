//! Path cost-sensitive naive Bayes and EM for hierarchical text
//! classification.
//!
//! Documents are modeled as a mixture of multinomials with one component per
//! root-to-leaf path of the class hierarchy. Labels enter estimation as graded
//! path scores, so a path that is right at the upper levels still earns
//! partial credit, and every prediction is a full path and hence consistent
//! with the hierarchy.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod math;
pub mod model;
pub mod persist;
pub mod scoring;
pub mod taxonomy;

pub use error::{Error, Result};

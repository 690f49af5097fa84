//! Baseline reference identification for scientific papers.

pub mod context;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod heuristics;
pub mod mma;
pub mod sectionmap;

//! Screening scientific full texts for rigor criteria: parsing, detection,
//! blinded curation of tool disagreements, and evaluation of tools and their
//! ensembles.

pub mod adapters;
pub mod corpus;
pub mod curation;
pub mod detectors;
pub mod ensemble;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod report;

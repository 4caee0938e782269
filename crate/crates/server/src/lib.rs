//! Curation API and command-line driver.

pub mod api;
pub mod cli;

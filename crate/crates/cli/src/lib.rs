//! Command-line entry points, the HTTP service and on-disk persistence.

pub mod commands;
pub mod report;
pub mod service;
pub mod store;
